// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-generated training data. Each iteration synthesizes S prompts, renders
// four jittered candidates per prompt, asks every judge for a ranking and keeps
// a candidate only when all judges agree on the best one. Disagreements go to
// a reviewer who either picks a candidate or discards the whole set. The
// resulting dataset fine-tunes the chain, and the next iteration starts from
// the fine-tuned state.

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sopforge/judges.hpp"
#include "sopforge/selfmod.hpp"

namespace sopforge {

inline constexpr std::size_t kCandidatesPerSet = 4;

struct CandidateSet {
  std::string set_id;
  EnhancedPrompt prompt;
  std::vector<Video> candidates;
  std::array<Seed64, kCandidatesPerSet> gen_seeds{};
  /// Keyed by judge label, see judge_label().
  std::map<std::string, Ranking> rankings;
  std::vector<std::string> unavailable_judges;
  int criterion_id = 1;
  /// Oracle rendering of the prompt; only the oracle judge and the reports use it.
  std::optional<Video> target;
};

enum class RouteKind { AutoAccepted, NeedsHuman, Discarded };

struct RouteOutcome {
  RouteKind kind = RouteKind::NeedsHuman;
  std::size_t index = 0;  // meaningful for AutoAccepted only

  friend bool operator==(const RouteOutcome&, const RouteOutcome&) = default;
};

std::string_view route_name(RouteKind kind) noexcept;

/// Accept candidate `index`, or discard the set when `index` is empty.
struct ReviewDecision {
  std::optional<std::size_t> index;

  static ReviewDecision accept(std::size_t i) { return {i}; }
  static ReviewDecision discard() { return {}; }
  friend bool operator==(const ReviewDecision&, const ReviewDecision&) = default;
};

enum class ReviewStatus { PendingHuman, Resolved };

struct ReviewItem {
  std::string item_id;
  std::size_t iteration = 0;
  CandidateSet candidate_set;
  ReviewStatus status = ReviewStatus::PendingHuman;
  std::optional<ReviewDecision> resolution;
};

enum class HitlMode { Interactive, AutoOracle, AutoDiscard };

std::string_view hitl_mode_name(HitlMode mode) noexcept;
/// Throws InvalidConfig.
HitlMode hitl_mode_from_name(std::string_view name);

struct DataFreeConfig {
  std::size_t iterations = 3;
  std::size_t prompts_per_iter = 16;
  std::vector<JudgeSpec> judges = default_judges();
  double candidate_noise_sigma = 0.1;
  TrainConfig train_cfg;
  HitlMode hitl_mode = HitlMode::AutoOracle;

  /// Throws InvalidConfig.
  void validate() const;
};

enum class RecordRoute { AutoAccepted, HumanAccepted };

struct DatasetRecord {
  EnhancedPrompt prompt;
  Video video;
  struct Provenance {
    std::size_t iteration = 0;
    std::string set_id;
    RecordRoute route = RecordRoute::AutoAccepted;
    std::size_t candidate_index = 0;
  } provenance;
};

/// Label under which judge `position` of `judges` files its ranking.
std::string judge_label(const std::vector<JudgeSpec>& judges, std::size_t position);

/// Four candidates for `prompt`. Candidate j adds rng_stream(gen_seed_j, 16)·σ
/// to every z_i for its own forward pass; `state` is left untouched.
CandidateSet generate_candidates(const TrainState& state, const EnhancedPrompt& prompt,
                                 const DataFreeConfig& cfg, Seed64 set_seed,
                                 std::string set_id = {});

/// Unanimous top-1 accepts, anything else needs a human. Throws CountMismatch
/// for fewer than two rankings or rankings of different sizes.
RouteOutcome consensus_route(std::span<const Ranking> rankings);
RouteOutcome consensus_route(const std::map<std::string, Ranking>& rankings);

/// Throws AlreadyResolved or BadIndex; the item is unchanged on error.
void resolve_review(ReviewItem& item, ReviewDecision decision);

/// One iteration's candidate sets and their routing. Reviews that need a human
/// stay pending in Interactive mode until resolved.
struct IterationOutput {
  std::size_t iteration = 0;
  std::vector<CandidateSet> sets;
  std::vector<RouteOutcome> routes;
  std::vector<ReviewItem> reviews;

  std::vector<ReviewItem*> pending();
};

/// Generates, judges and routes S prompts. `iteration` is 1-based.
IterationOutput run_iteration(const TrainState& state, const DataFreeConfig& cfg,
                              std::size_t iteration);

/// D_n in set order. Throws PendingHumanReviews while any review is pending.
std::vector<DatasetRecord> finalize_dataset(const IterationOutput& out);

struct IterationReport {
  std::size_t iteration = 0;
  std::size_t prompts = 0;
  std::size_t dataset_size = 0;
  std::size_t auto_accepted = 0;
  std::size_t human_accepted = 0;
  std::size_t discarded = 0;
  std::size_t judge_unavailable = 0;
  bool skipped = false;
  /// Batch losses in training order; empty for a skipped iteration.
  std::vector<double> loss_curve;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  /// Mean MSE to the oracle of accepted vs. every other candidate.
  double selected_oracle_mse = 0.0;
  double unselected_oracle_mse = 0.0;
  /// Mean MSE of the un-jittered chain output to the oracle, before and after
  /// this iteration's training.
  double oracle_loss_before = 0.0;
  double oracle_loss_after = 0.0;
};

struct DataFreeResult {
  TrainState state;
  std::vector<IterationReport> reports;
  std::vector<DatasetRecord> dataset;
};

/// Called in Interactive mode with the unresolved reviews of an iteration. It
/// must resolve them (or throw, e.g. Cancelled) before returning.
using ReviewHandler = std::function<void(std::vector<ReviewItem*>& pending)>;
using IterationObserver = std::function<void(const IterationReport&)>;

/// N rounds of run_iteration + train. An empty D_n skips training for that
/// round and is flagged in the report.
DataFreeResult datafree_train(const DataFreeConfig& cfg, std::optional<TrainState> initial = {},
                              const ReviewHandler& reviewer = {},
                              const IterationObserver& observer = {},
                              const BatchObserver& batch_observer = {});

nlohmann::json report_to_json(const IterationReport& r);

}  // namespace sopforge
