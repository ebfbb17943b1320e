// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "sopforge/datafree.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "sopforge/error.hpp"
#include "sopforge/toyworld.hpp"

namespace sopforge {

namespace {

using nlohmann::json;

double mean_or_nan(double sum, std::size_t n) {
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

std::string make_set_id(std::size_t iteration, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "it%zu-set%02zu", iteration, index);
  return buf;
}

Video oracle_target(const EnhancedPrompt& prompt, std::size_t t_frames) {
  return oracle_render(OracleParams{prompt.vector, false}, t_frames);
}

Seed64 set_seed_for(const DataFreeConfig& cfg, const std::string& set_id) {
  return cfg.train_cfg.seed ^ hash_text(set_id);
}

}  // namespace

std::string_view route_name(RouteKind kind) noexcept {
  switch (kind) {
    case RouteKind::AutoAccepted: return "auto_accepted";
    case RouteKind::NeedsHuman: return "needs_human";
    case RouteKind::Discarded: return "discarded";
  }
  return "unknown";
}

std::string_view hitl_mode_name(HitlMode mode) noexcept {
  switch (mode) {
    case HitlMode::Interactive: return "interactive";
    case HitlMode::AutoOracle: return "auto_oracle";
    case HitlMode::AutoDiscard: return "auto_discard";
  }
  return "unknown";
}

HitlMode hitl_mode_from_name(std::string_view name) {
  for (HitlMode m : {HitlMode::Interactive, HitlMode::AutoOracle, HitlMode::AutoDiscard}) {
    if (hitl_mode_name(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown hitl mode: " + std::string(name));
}

void DataFreeConfig::validate() const {
  if (iterations < 1) throw Error(ErrorCode::InvalidConfig, "iterations must be >= 1");
  if (prompts_per_iter < 1 || prompts_per_iter > prompt_grammar_size()) {
    throw Error(ErrorCode::InvalidConfig, "prompts_per_iter must be in 1.." +
                                              std::to_string(prompt_grammar_size()));
  }
  if (judges.size() < 2) throw Error(ErrorCode::InvalidConfig, "at least two judges are required");
  for (const auto& j : judges) j.validate();
  if (!std::isfinite(candidate_noise_sigma) || candidate_noise_sigma < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "candidate_noise_sigma must be finite and >= 0");
  }
  train_cfg.validate();
}

std::string judge_label(const std::vector<JudgeSpec>& judges, std::size_t position) {
  const std::string base(judge_kind_name(judges.at(position).kind));
  std::size_t same_before = 0;
  for (std::size_t i = 0; i < position; ++i) same_before += judges[i].kind == judges[position].kind;
  return same_before == 0 ? base : base + "#" + std::to_string(same_before + 1);
}

CandidateSet generate_candidates(const TrainState& state, const EnhancedPrompt& prompt,
                                 const DataFreeConfig& cfg, Seed64 set_seed, std::string set_id) {
  CandidateSet set;
  set.set_id = std::move(set_id);
  set.prompt = prompt;
  SplitMix64 seeds(set_seed);
  for (auto& s : set.gen_seeds) s = seeds.next();
  set.criterion_id = draw_criterion(seeds.next());
  for (Seed64 s : set.gen_seeds) {
    std::vector<double> jitter = rng_stream(s, kModulationSize);
    for (double& v : jitter) v *= cfg.candidate_noise_sigma;
    const ChainCache cache = forward_chain(state.params, state.modulation, prompt, cfg.train_cfg, jitter);
    set.candidates.push_back(chain_video(cache));
  }
  set.target = oracle_target(prompt, cfg.train_cfg.t_frames);
  return set;
}

RouteOutcome consensus_route(std::span<const Ranking> rankings) {
  if (rankings.size() < 2) throw Error(ErrorCode::CountMismatch, "consensus needs at least two rankings");
  for (const auto& r : rankings) {
    if (r.size() != rankings.front().size()) {
      throw Error(ErrorCode::CountMismatch, "rankings cover different candidate counts");
    }
  }
  const std::size_t top = rankings.front().top();
  for (const auto& r : rankings) {
    if (r.top() != top) return {RouteKind::NeedsHuman, 0};
  }
  return {RouteKind::AutoAccepted, top};
}

RouteOutcome consensus_route(const std::map<std::string, Ranking>& rankings) {
  std::vector<Ranking> flat;
  for (const auto& [label, r] : rankings) flat.push_back(r);
  return consensus_route(std::span<const Ranking>(flat));
}

void resolve_review(ReviewItem& item, ReviewDecision decision) {
  if (item.status == ReviewStatus::Resolved) {
    throw Error(ErrorCode::AlreadyResolved, "review " + item.item_id + " is already resolved");
  }
  if (decision.index && *decision.index >= item.candidate_set.candidates.size()) {
    throw Error(ErrorCode::BadIndex, "candidate index " + std::to_string(*decision.index) +
                                         " out of range");
  }
  item.resolution = decision;
  item.status = ReviewStatus::Resolved;
}

std::vector<ReviewItem*> IterationOutput::pending() {
  std::vector<ReviewItem*> out;
  for (auto& r : reviews) {
    if (r.status == ReviewStatus::PendingHuman) out.push_back(&r);
  }
  return out;
}

IterationOutput run_iteration(const TrainState& state, const DataFreeConfig& cfg, std::size_t iteration) {
  cfg.validate();
  IterationOutput out;
  out.iteration = iteration;
  const Seed64 prompt_seed = cfg.train_cfg.seed ^ (static_cast<Seed64>(iteration) * kGoldenGamma);
  const auto prompts = synthesize_prompts(prompt_seed, cfg.prompts_per_iter);

  for (std::size_t p = 0; p < prompts.size(); ++p) {
    const std::string set_id = make_set_id(iteration, p);
    CandidateSet set = generate_candidates(state, enhance_prompt(prompts[p]), cfg,
                                           set_seed_for(cfg, set_id), set_id);
    const JudgeContext ctx{set.criterion_id, &*set.target};
    for (std::size_t j = 0; j < cfg.judges.size(); ++j) {
      const std::string label = judge_label(cfg.judges, j);
      try {
        set.rankings.emplace(label, rank_candidates(cfg.judges[j], set.candidates, ctx));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::JudgeUnavailable && e.code() != ErrorCode::MalformedRanking) throw;
        set.unavailable_judges.push_back(label);
      }
    }
    RouteOutcome route{RouteKind::NeedsHuman, 0};
    if (set.unavailable_judges.empty()) route = consensus_route(set.rankings);

    if (route.kind == RouteKind::NeedsHuman) {
      ReviewItem item;
      item.item_id = set_id;
      item.iteration = iteration;
      item.candidate_set = set;
      if (cfg.hitl_mode == HitlMode::AutoOracle) {
        resolve_review(item, ReviewDecision::accept(oracle_judge_rank(set.candidates, *set.target).top()));
      } else if (cfg.hitl_mode == HitlMode::AutoDiscard) {
        resolve_review(item, ReviewDecision::discard());
      }
      out.reviews.push_back(std::move(item));
    }
    out.routes.push_back(route);
    out.sets.push_back(std::move(set));
  }
  return out;
}

std::vector<DatasetRecord> finalize_dataset(const IterationOutput& out) {
  std::vector<DatasetRecord> records;
  std::size_t review = 0;
  for (std::size_t s = 0; s < out.sets.size(); ++s) {
    const CandidateSet& set = out.sets[s];
    const RouteOutcome& route = out.routes.at(s);
    if (route.kind == RouteKind::AutoAccepted) {
      records.push_back({set.prompt, set.candidates.at(route.index),
                         {out.iteration, set.set_id, RecordRoute::AutoAccepted, route.index}});
      continue;
    }
    const ReviewItem& item = out.reviews.at(review++);
    if (item.status != ReviewStatus::Resolved) {
      throw Error(ErrorCode::PendingHumanReviews, "review " + item.item_id + " is still pending");
    }
    if (item.resolution->index) {
      const std::size_t i = *item.resolution->index;
      records.push_back({set.prompt, set.candidates.at(i),
                         {out.iteration, set.set_id, RecordRoute::HumanAccepted, i}});
    }
  }
  return records;
}

namespace {

double oracle_loss(const TrainState& state, std::span<const CandidateSet> sets, const TrainConfig& cfg) {
  double sum = 0.0;
  for (const auto& set : sets) {
    sum += loss_mse(forward_chain(state.params, state.modulation, set.prompt, cfg).output(), *set.target);
  }
  return mean_or_nan(sum, sets.size());
}

}  // namespace

DataFreeResult datafree_train(const DataFreeConfig& cfg, std::optional<TrainState> initial,
                              const ReviewHandler& reviewer, const IterationObserver& observer,
                              const BatchObserver& batch_observer) {
  cfg.validate();
  DataFreeResult result;
  result.state = initial ? std::move(*initial) : initial_state(cfg.train_cfg);

  for (std::size_t n = 1; n <= cfg.iterations; ++n) {
    IterationOutput out = run_iteration(result.state, cfg, n);
    auto pending = out.pending();
    if (!pending.empty() && reviewer) reviewer(pending);
    std::vector<DatasetRecord> records = finalize_dataset(out);

    IterationReport rep;
    rep.iteration = n;
    rep.prompts = out.sets.size();
    rep.dataset_size = records.size();
    for (const auto& set : out.sets) rep.judge_unavailable += !set.unavailable_judges.empty();
    for (const auto& r : records) {
      (r.provenance.route == RecordRoute::AutoAccepted ? rep.auto_accepted : rep.human_accepted)++;
    }
    for (const auto& item : out.reviews) rep.discarded += !item.resolution->index.has_value();

    double sel = 0.0, unsel = 0.0;
    std::size_t n_sel = 0, n_unsel = 0;
    std::size_t next_record = 0;
    for (const auto& set : out.sets) {
      std::optional<std::size_t> chosen;
      if (next_record < records.size() && records[next_record].provenance.set_id == set.set_id) {
        chosen = records[next_record++].provenance.candidate_index;
      }
      for (std::size_t c = 0; c < set.candidates.size(); ++c) {
        const double mse = loss_mse(set.candidates[c], *set.target);
        if (chosen && *chosen == c) {
          sel += mse;
          ++n_sel;
        } else {
          unsel += mse;
          ++n_unsel;
        }
      }
    }
    rep.selected_oracle_mse = mean_or_nan(sel, n_sel);
    rep.unselected_oracle_mse = mean_or_nan(unsel, n_unsel);
    rep.oracle_loss_before = oracle_loss(result.state, out.sets, cfg.train_cfg);

    if (records.empty()) {
      rep.skipped = true;
      std::fprintf(stderr, "warning: iteration %zu produced an empty dataset, skipping training\n", n);
      rep.initial_loss = rep.final_loss = std::numeric_limits<double>::quiet_NaN();
    } else {
      std::vector<TrainSample> samples;
      samples.reserve(records.size());
      for (const auto& r : records) samples.push_back({r.prompt, r.video});
      TrainResult trained = train(samples, cfg.train_cfg, result.state, batch_observer);
      for (const auto& h : trained.history) rep.loss_curve.push_back(h.loss);
      rep.initial_loss = rep.loss_curve.front();
      result.state = std::move(trained.state);
      rep.final_loss = dataset_loss(result.state, samples, cfg.train_cfg);
    }
    rep.oracle_loss_after = oracle_loss(result.state, out.sets, cfg.train_cfg);

    if (observer) observer(rep);
    result.reports.push_back(std::move(rep));
    for (auto& r : records) result.dataset.push_back(std::move(r));
  }
  return result;
}

json report_to_json(const IterationReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v == 0.0 ? 0.0 : v) : json(nullptr); };
  json curve = json::array();
  for (double v : r.loss_curve) curve.push_back(num(v));
  return json{{"iteration", r.iteration},
              {"prompts", r.prompts},
              {"dataset_size", r.dataset_size},
              {"auto_accepted", r.auto_accepted},
              {"human_accepted", r.human_accepted},
              {"discarded", r.discarded},
              {"judge_unavailable", r.judge_unavailable},
              {"skipped", r.skipped},
              {"loss_curve", curve},
              {"initial_loss", num(r.initial_loss)},
              {"final_loss", num(r.final_loss)},
              {"selected_oracle_mse", num(r.selected_oracle_mse)},
              {"unselected_oracle_mse", num(r.unselected_oracle_mse)},
              {"oracle_loss_before", num(r.oracle_loss_before)},
              {"oracle_loss_after", num(r.oracle_loss_after)}};
}

}  // namespace sopforge
