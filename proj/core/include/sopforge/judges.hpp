// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sopforge/core.hpp"
#include "sopforge/toyworld.hpp"

namespace sopforge {

struct Criterion {
  int id = 0;
  std::string_view text;
};

/// The ten judging criteria, verbatim and in catalog order.
const std::vector<Criterion>& criteria_catalog();

/// Maps a seed onto a criterion id in 1..10.
int draw_criterion(Seed64 seed);

/// Candidate indices, best first. Always a permutation of 0..k-1.
class Ranking {
 public:
  /// Throws MalformedRanking unless `order` is a permutation.
  explicit Ranking(std::vector<std::size_t> order);

  const std::vector<std::size_t>& order() const noexcept { return order_; }
  std::size_t size() const noexcept { return order_.size(); }
  std::size_t top() const { return order_.front(); }

  friend bool operator==(const Ranking&, const Ranking&) = default;

 private:
  std::vector<std::size_t> order_;
};

enum class JudgeKind { OracleDistance, QualityProxy, External };

std::string_view judge_kind_name(JudgeKind kind) noexcept;
/// Throws InvalidConfig.
JudgeKind judge_kind_from_name(std::string_view name);

struct JudgeSpec {
  JudgeKind kind = JudgeKind::OracleDistance;
  std::optional<std::string> endpoint;  // http://host:port/path, External only
  Seed64 seed = 0;
  std::chrono::milliseconds timeout{10000};

  /// Throws InvalidConfig when an External judge has no endpoint.
  void validate() const;
};

/// The two deterministic built-in judges.
std::vector<JudgeSpec> default_judges();

/// Ascending MSE to the target, ties to the lower index.
Ranking oracle_judge_rank(std::span<const Video> candidates, const Video& target);

/// motion_smoothness − |dynamic_degree − 0.15|.
double quality_score(const Video& v);
/// Descending quality_score, ties to the lower index.
Ranking quality_judge_rank(std::span<const Video> candidates);

struct JudgeContext {
  int criterion_id = 1;
  const Video* target = nullptr;  // required by OracleDistance
};

/// Dispatches to a built-in judge or POSTs to an external one:
///   request  {"criterion_text": str, "candidates": [tvid base64, ...]}
///   response {"order": [int, ...]}
/// Throws JudgeUnavailable when the endpoint cannot be reached or answers
/// with a non-2xx status, MalformedRanking for an invalid order.
Ranking rank_candidates(const JudgeSpec& spec, std::span<const Video> candidates,
                        const JudgeContext& context);

}  // namespace sopforge
