// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "sopforge/toyworld.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>

namespace sopforge {

std::uint64_t hash_text(std::string_view s) noexcept {
  std::uint64_t h = kFnvOffsetBasis;
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t SplitMix64::next() noexcept {
  state_ += kGoldenGamma;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::next_signed_unit() noexcept {
  constexpr double kTwoPow53 = 9007199254740992.0;
  return static_cast<double>(next() >> 11) / kTwoPow53 * 2.0 - 1.0;
}

std::vector<double> rng_stream(Seed64 seed, std::size_t count) {
  SplitMix64 gen(seed);
  std::vector<double> out(count);
  for (auto& v : out) v = gen.next_signed_unit();
  return out;
}

Embedding embed_text(int agent_id, std::string_view text) {
  const Seed64 seed = hash_text(text) ^ (static_cast<std::uint64_t>(agent_id) * kGoldenGamma);
  return rng_stream(seed, kEmbeddingSize);
}

PromptVec prompt_vector(std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::EmptyPrompt, "prompt is empty");
  const auto values = rng_stream(hash_text(text), kPromptVecSize);
  PromptVec vec{};
  std::copy(values.begin(), values.end(), vec.begin());
  return vec;
}

EnhancedPrompt enhance_prompt(const TextPrompt& p) {
  return EnhancedPrompt{p.text() + std::string(kEnhanceSuffix), prompt_vector(p.text())};
}

double oracle_pixel(const OracleParams& params, std::size_t t, double x, double y,
                    std::size_t height, std::size_t width) {
  const auto& p = params.prompt_vec;
  const double cx0 = (p[0] + 1.0) / 2.0 * static_cast<double>(width - 1);
  const double cy0 = (p[1] + 1.0) / 2.0 * static_cast<double>(height - 1);
  const double vx = 0.8 * p[2];
  const double vy = 0.8 * p[3];
  const double r = 1.0 + 1.5 * (p[4] + 1.0) / 2.0;
  const double a = 0.5 + (p[5] + 1.0) / 4.0;
  const double td = static_cast<double>(t);
  const double dx = x - cx0 - vx * td;
  const double dy = y - cy0 - vy * td;
  const double g = a * std::exp(-(dx * dx + dy * dy) / (2.0 * r * r));
  return 2.0 * g - 1.0;
}

Video oracle_render(const OracleParams& params, std::size_t t_frames, std::size_t height,
                    std::size_t width) {
  if (t_frames < 1) throw Error(ErrorCode::InvalidLength, "oracle video needs t_frames >= 1");
  std::vector<Frame> frames;
  frames.reserve(t_frames);
  for (std::size_t t = 0; t < t_frames; ++t) {
    std::vector<float> pixels(height * width);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        double value = oracle_pixel(params, t, static_cast<double>(x), static_cast<double>(y),
                                    height, width);
        if (params.digital_style) {
          value += ((x + y) % 2 == 0) ? 0.1 : -0.1;
          value = std::clamp(value, -1.0, 1.0);
        }
        pixels[y * width + x] = static_cast<float>(value);
      }
    }
    frames.emplace_back(height, width, std::move(pixels));
  }
  return Video(std::move(frames));
}

namespace {

constexpr std::array<std::string_view, 4> kSizes = {"tiny", "small", "medium", "large"};
constexpr std::array<std::string_view, 4> kTextures = {"smooth", "grainy", "glowing", "faded"};
constexpr std::array<std::string_view, 4> kDirections = {"left", "right", "up", "down"};
constexpr std::array<std::string_view, 4> kSpeeds = {"slowly", "steadily", "quickly", "gently"};

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& words, double u) {
  auto idx = static_cast<std::size_t>((u + 1.0) / 2.0 * static_cast<double>(N));
  return words[std::min(idx, N - 1)];
}

}  // namespace

std::size_t prompt_grammar_size() noexcept {
  return kSizes.size() * kTextures.size() * kDirections.size() * kSpeeds.size();
}

std::vector<TextPrompt> synthesize_prompts(Seed64 seed, std::size_t count) {
  if (count < 1 || count > prompt_grammar_size()) {
    throw Error(ErrorCode::InvalidCount, "prompt count must be in 1.." +
                                             std::to_string(prompt_grammar_size()));
  }
  SplitMix64 gen(seed);
  std::set<std::string> seen;
  std::vector<TextPrompt> prompts;
  prompts.reserve(count);
  while (prompts.size() < count) {
    std::string text = "a ";
    text += pick(kSizes, gen.next_signed_unit());
    text += ' ';
    text += pick(kTextures, gen.next_signed_unit());
    text += " blob moving ";
    text += pick(kDirections, gen.next_signed_unit());
    text += ' ';
    text += pick(kSpeeds, gen.next_signed_unit());
    if (seen.insert(text).second) prompts.emplace_back(std::move(text));
  }
  return prompts;
}

}  // namespace sopforge
