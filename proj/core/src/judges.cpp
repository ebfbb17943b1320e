// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "sopforge/judges.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sopforge/metrics.hpp"
#include "sopforge/selfmod.hpp"
#include "sopforge/store.hpp"

namespace sopforge {

const std::vector<Criterion>& criteria_catalog() {
  static const std::vector<Criterion> catalog = {
      {1, "Evaluate the visual clarity and resolution, ranking videos based on image sharpness, "
          "smoothness of transitions, and noise levels."},
      {2, "Assess object consistency and scene stability across frames, ranking videos on object "
          "motion and interactions."},
      {3, "Examine the temporal coherence, identifying the best frame-to-frame continuity."},
      {4, "Evaluate the narrative coherence or logical progression, ranking based on storytelling "
          "consistency."},
      {5, "Assess color grading and lighting consistency, determining the best video based on "
          "smooth lighting transitions and uniform color."},
      {6, "Evaluate the realism of objects, background textures, and scene complexity, ranking "
          "videos from most realistic to least."},
      {7, "Analyze content relevance to the task, ranking videos based on theme alignment and "
          "task appropriateness."},
      {8, "Compare the aesthetic quality, focusing on artistic composition, balance, and overall "
          "visual appeal."},
      {9, "Evaluate noise and artifact levels, identifying the video with the cleanest and "
          "smoothest output."},
      {10, "Examine frame rate consistency and smoothness of motion, ranking videos based on "
           "natural motion without lag or stuttering."},
  };
  return catalog;
}

int draw_criterion(Seed64 seed) {
  const double u = rng_stream(seed, 1).front();
  const int id = static_cast<int>((u + 1.0) / 2.0 * 10.0) + 1;
  return std::clamp(id, 1, 10);
}

Ranking::Ranking(std::vector<std::size_t> order) : order_(std::move(order)) {
  std::vector<bool> seen(order_.size(), false);
  for (std::size_t idx : order_) {
    if (idx >= order_.size() || seen[idx]) {
      throw Error(ErrorCode::MalformedRanking, "ranking is not a permutation");
    }
    seen[idx] = true;
  }
  if (order_.empty()) throw Error(ErrorCode::MalformedRanking, "ranking is empty");
}

std::string_view judge_kind_name(JudgeKind kind) noexcept {
  switch (kind) {
    case JudgeKind::OracleDistance: return "oracle_distance";
    case JudgeKind::QualityProxy: return "quality_proxy";
    case JudgeKind::External: return "external";
  }
  return "unknown";
}

JudgeKind judge_kind_from_name(std::string_view name) {
  for (JudgeKind k : {JudgeKind::OracleDistance, JudgeKind::QualityProxy, JudgeKind::External}) {
    if (judge_kind_name(k) == name) return k;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown judge kind: " + std::string(name));
}

void JudgeSpec::validate() const {
  if (kind == JudgeKind::External && (!endpoint || endpoint->empty())) {
    throw Error(ErrorCode::InvalidConfig, "external judge needs an endpoint");
  }
}

std::vector<JudgeSpec> default_judges() {
  return {JudgeSpec{JudgeKind::OracleDistance, std::nullopt, 1, std::chrono::milliseconds{10000}},
          JudgeSpec{JudgeKind::QualityProxy, std::nullopt, 2, std::chrono::milliseconds{10000}}};
}

namespace {

void require_candidates(std::span<const Video> candidates) {
  if (candidates.size() < 2) {
    throw Error(ErrorCode::TooFewCandidates, "ranking needs at least two candidates");
  }
}

// Stable sort by key; stability gives the lower-index tie break.
Ranking rank_by(const std::vector<double>& keys) {
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&keys](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  return Ranking(std::move(order));
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

Ranking external_rank(const JudgeSpec& spec, std::span<const Video> candidates,
                      const JudgeContext& context) {
  const auto& catalog = criteria_catalog();
  const int cid = std::clamp(context.criterion_id, 1, static_cast<int>(catalog.size()));
  nlohmann::json body;
  body["criterion_text"] = std::string(catalog[cid - 1].text);
  body["candidates"] = nlohmann::json::array();
  for (const auto& v : candidates) body["candidates"].push_back(base64_encode(encode_tvid(v)));

  const Endpoint ep = split_endpoint(*spec.endpoint);
  httplib::Client client(ep.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(spec.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(spec.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  auto res = client.Post(ep.path, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::JudgeUnavailable,
                "judge at " + *spec.endpoint + " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::JudgeUnavailable,
                "judge at " + *spec.endpoint + " answered " + std::to_string(res->status));
  }
  const auto reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("order") ||
      !reply["order"].is_array()) {
    throw Error(ErrorCode::MalformedRanking, "judge reply has no order array");
  }
  std::vector<std::size_t> order;
  for (const auto& v : reply["order"]) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw Error(ErrorCode::MalformedRanking, "judge order must hold non-negative integers");
    }
    order.push_back(v.get<std::size_t>());
  }
  if (order.size() != candidates.size()) {
    throw Error(ErrorCode::MalformedRanking, "judge order has the wrong length");
  }
  return Ranking(std::move(order));
}

}  // namespace

Ranking oracle_judge_rank(std::span<const Video> candidates, const Video& target) {
  require_candidates(candidates);
  std::vector<double> losses;
  losses.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (!c.same_shape(target)) {
      throw Error(ErrorCode::DimensionMismatch, "candidate shape differs from target");
    }
    losses.push_back(loss_mse(c, target));
  }
  return rank_by(losses);
}

double quality_score(const Video& v) {
  return motion_smoothness(v) - std::abs(dynamic_degree(v) - 0.15);
}

Ranking quality_judge_rank(std::span<const Video> candidates) {
  require_candidates(candidates);
  std::vector<double> keys;
  keys.reserve(candidates.size());
  for (const auto& c : candidates) keys.push_back(-quality_score(c));
  return rank_by(keys);
}

Ranking rank_candidates(const JudgeSpec& spec, std::span<const Video> candidates,
                        const JudgeContext& context) {
  spec.validate();
  require_candidates(candidates);
  switch (spec.kind) {
    case JudgeKind::OracleDistance:
      if (!context.target) throw Error(ErrorCode::InputMismatch, "oracle judge needs a target");
      return oracle_judge_rank(candidates, *context.target);
    case JudgeKind::QualityProxy:
      return quality_judge_rank(candidates);
    case JudgeKind::External:
      return external_rank(spec, candidates, context);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown judge kind");
}

}  // namespace sopforge
