// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "sopforge/error.hpp"

namespace sopforge {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyVideo: return "empty_video";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::InvalidPixel: return "invalid_pixel";
    case ErrorCode::InvalidLength: return "invalid_length";
    case ErrorCode::EmptyPrompt: return "empty_prompt";
    case ErrorCode::InvalidCount: return "invalid_count";
    case ErrorCode::NoParams: return "no_params";
    case ErrorCode::RoleMismatch: return "role_mismatch";
    case ErrorCode::InputMismatch: return "input_mismatch";
    case ErrorCode::AgentFailure: return "agent_failure";
    case ErrorCode::WrongStage: return "wrong_stage";
    case ErrorCode::NotAwaitingDecision: return "not_awaiting";
    case ErrorCode::RetryExhausted: return "retry_exhausted";
    case ErrorCode::CacheIncomplete: return "cache_incomplete";
    case ErrorCode::InvalidN: return "invalid_n";
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::EmptyDataset: return "empty_dataset";
    case ErrorCode::InvalidConfig: return "bad_config";
    case ErrorCode::TooFewCandidates: return "too_few_candidates";
    case ErrorCode::JudgeUnavailable: return "judge_unavailable";
    case ErrorCode::MalformedRanking: return "malformed_ranking";
    case ErrorCode::CountMismatch: return "count_mismatch";
    case ErrorCode::AlreadyResolved: return "already_resolved";
    case ErrorCode::BadIndex: return "bad_index";
    case ErrorCode::PendingHumanReviews: return "pending_human_reviews";
    case ErrorCode::ZeroVector: return "zero_vector";
    case ErrorCode::LengthMismatch: return "length_mismatch";
    case ErrorCode::BadMagic: return "bad_magic";
    case ErrorCode::BadVersion: return "bad_version";
    case ErrorCode::TruncatedPayload: return "truncated_payload";
    case ErrorCode::ManifestMismatch: return "manifest_mismatch";
    case ErrorCode::CorruptRecord: return "corrupt_record";
    case ErrorCode::Io: return "io_error";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::TrainingActive: return "training_active";
    case ErrorCode::BadRequest: return "bad_request";
    case ErrorCode::Cancelled: return "cancelled";
  }
  return "unknown";
}

}  // namespace sopforge
