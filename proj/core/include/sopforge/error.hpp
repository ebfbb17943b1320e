// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sopforge {

/// Every failure the library reports carries one of these codes. The server
/// maps each code onto exactly one HTTP status and stable wire identifier.
enum class ErrorCode {
  EmptyVideo,
  DimensionMismatch,
  InvalidPixel,
  InvalidLength,
  EmptyPrompt,
  InvalidCount,
  NoParams,
  RoleMismatch,
  InputMismatch,
  AgentFailure,
  WrongStage,
  NotAwaitingDecision,
  RetryExhausted,
  CacheIncomplete,
  InvalidN,
  ShapeMismatch,
  EmptyDataset,
  InvalidConfig,
  TooFewCandidates,
  JudgeUnavailable,
  MalformedRanking,
  CountMismatch,
  AlreadyResolved,
  BadIndex,
  PendingHumanReviews,
  ZeroVector,
  LengthMismatch,
  BadMagic,
  BadVersion,
  TruncatedPayload,
  ManifestMismatch,
  CorruptRecord,
  Io,
  NotFound,
  TrainingActive,
  BadRequest,
  Cancelled,
};

/// Stable snake_case identifier, e.g. "retry_exhausted".
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sopforge
