// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic world. The hash and PRNG below are wire-level
// contracts: FNV-1a 64 and splitmix64 must match their reference outputs
// bit for bit, because every seed in the system is derived from them.

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "sopforge/core.hpp"

namespace sopforge {

using Seed64 = std::uint64_t;

inline constexpr std::uint64_t kFnvOffsetBasis = 0xCBF29CE484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001B3ULL;
inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// FNV-1a 64-bit over the UTF-8 bytes of `s`.
std::uint64_t hash_text(std::string_view s) noexcept;

class SplitMix64 {
 public:
  explicit SplitMix64(Seed64 seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;

  /// Next output mapped onto [-1, 1) with 53 bits of precision.
  double next_signed_unit() noexcept;

 private:
  std::uint64_t state_;
};

std::vector<double> rng_stream(Seed64 seed, std::size_t count);

/// Text embedder E_i of agent `agent_id` (1..5); length kEmbeddingSize.
Embedding embed_text(int agent_id, std::string_view text);

/// Throws EmptyPrompt for empty text.
PromptVec prompt_vector(std::string_view text);

inline constexpr std::string_view kEnhanceSuffix = " | enhanced: subject, motion, style";

/// Annotates the prompt text; the vector stays anchored to the original text.
EnhancedPrompt enhance_prompt(const TextPrompt& p);

struct OracleParams {
  PromptVec prompt_vec{};
  bool digital_style = false;
};

/// Moving Gaussian blob that serves as ground truth for a prompt.
Video oracle_render(const OracleParams& params, std::size_t t_frames,
                    std::size_t height = kDefaultHeight, std::size_t width = kDefaultWidth);

/// Unclamped scalar value of the oracle at pixel (x, y) of frame t.
double oracle_pixel(const OracleParams& params, std::size_t t, double x, double y,
                    std::size_t height = kDefaultHeight, std::size_t width = kDefaultWidth);

/// Number of distinct prompts the template grammar can produce.
std::size_t prompt_grammar_size() noexcept;

/// `count` distinct prompts of the form
/// "a {size} {texture} blob moving {direction} {speed}".
std::vector<TextPrompt> synthesize_prompts(Seed64 seed, std::size_t count);

}  // namespace sopforge
