// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "sopforge/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sopforge/toyworld.hpp"

namespace sopforge {

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::LengthMismatch, "cosine of unequal lengths");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

const std::vector<double>& feature_projection() {
  static const std::vector<double> r = rng_stream(kProjectionSeed, kFeatureSize * 2 * kPooledSize);
  return r;
}

std::vector<double> pool_frame(std::span<const double> pixels, std::size_t height,
                               std::size_t width) {
  if (height != kDefaultHeight || width != kDefaultWidth || pixels.size() != height * width) {
    throw Error(ErrorCode::DimensionMismatch, "feature extraction expects 8x8 frames");
  }
  std::vector<double> pooled(kPooledSize, 0.0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      pooled[(y / 2) * (width / 2) + x / 2] += pixels[y * width + x] / 4.0;
    }
  }
  return pooled;
}

std::vector<double> video_descriptor(const Video& v) {
  const std::size_t h = v.height();
  const std::size_t w = v.width();
  const std::size_t n = h * w;
  std::vector<double> mean(n, 0.0);
  std::vector<double> diff(n, 0.0);
  for (std::size_t t = 0; t < v.length(); ++t) {
    const auto px = v.frame(t).pixels();
    for (std::size_t i = 0; i < n; ++i) mean[i] += px[i];
    if (t > 0) {
      const auto prev = v.frame(t - 1).pixels();
      for (std::size_t i = 0; i < n; ++i) {
        diff[i] += std::abs(static_cast<double>(px[i]) - static_cast<double>(prev[i]));
      }
    }
  }
  for (auto& m : mean) m /= static_cast<double>(v.length());
  if (v.length() > 1) {
    for (auto& d : diff) d /= static_cast<double>(v.length() - 1);
  }
  auto out = pool_frame(mean, h, w);
  const auto pooled_diff = pool_frame(diff, h, w);
  out.insert(out.end(), pooled_diff.begin(), pooled_diff.end());
  return out;
}

namespace {

std::vector<double> project(std::span<const double> input) {
  const auto& r = feature_projection();
  const std::size_t cols = 2 * kPooledSize;
  std::vector<double> out(kFeatureSize, 0.0);
  for (std::size_t i = 0; i < kFeatureSize; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[i] += r[i * cols + j] * input[j];
  }
  return out;
}

}  // namespace

VideoFeature video_feature(const Video& v) { return project(video_descriptor(v)); }

double tcon(const Video& input, const Video& output) {
  return cosine(video_feature(input), video_feature(output));
}

double tmean(const Video& prev, const Video& mid, const Video& next) {
  return (tcon(mid, prev) + tcon(mid, next)) / 2.0;
}

double video_ti(std::string_view prompt_text, const std::optional<Frame>& input_frame,
                const Video& generated) {
  std::vector<double> mix(2 * kPooledSize, 0.0);
  const auto pv = prompt_vector(prompt_text);
  std::copy(pv.begin(), pv.end(), mix.begin());
  if (input_frame) {
    const auto pooled = pool_frame(flatten(*input_frame), input_frame->height(),
                                   input_frame->width());
    std::copy(pooled.begin(), pooled.end(), mix.begin() + kPooledSize);
  }
  return cosine(project(mix), video_feature(generated));
}

double dynamic_degree(const Video& v) {
  if (v.length() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < v.length(); ++t) {
    const auto a = v.frame(t).pixels();
    const auto b = v.frame(t + 1).pixels();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      s += std::abs(static_cast<double>(b[i]) - static_cast<double>(a[i]));
    }
    total += s / static_cast<double>(a.size());
  }
  return total / static_cast<double>(v.length() - 1);
}

double motion_smoothness(const Video& v) {
  if (v.length() <= 2) return 1.0;
  double total = 0.0;
  for (std::size_t t = 1; t + 1 < v.length(); ++t) {
    const auto prev = v.frame(t - 1).pixels();
    const auto cur = v.frame(t).pixels();
    const auto next = v.frame(t + 1).pixels();
    double s = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      s += std::abs(static_cast<double>(next[i]) - 2.0 * static_cast<double>(cur[i]) +
                    static_cast<double>(prev[i]));
    }
    total += s / static_cast<double>(cur.size());
  }
  return 1.0 - total / static_cast<double>(v.length() - 2) / 4.0;
}

}  // namespace sopforge
