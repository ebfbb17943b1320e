// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Cosine-based consistency metrics (VideoTI, TCON, Tmean) over one fixed
// random-projection feature extractor, plus pixel-difference proxies for
// dynamic degree and motion smoothness.

#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sopforge/core.hpp"

namespace sopforge {

inline constexpr std::size_t kFeatureSize = 16;
inline constexpr std::size_t kPooledSize = 16;
inline constexpr std::uint64_t kProjectionSeed = 0xFEA7;

using VideoFeature = std::vector<double>;

/// Throws LengthMismatch or ZeroVector.
double cosine(std::span<const double> u, std::span<const double> v);

/// The shared 16×32 projection, row-major.
const std::vector<double>& feature_projection();

/// 2×2 average pooling of an 8×8 frame into 16 values.
std::vector<double> pool_frame(std::span<const double> pixels, std::size_t height, std::size_t width);

/// Pooled mean frame (16) and pooled mean |temporal difference| (16),
/// before projection.
std::vector<double> video_descriptor(const Video& v);

/// Throws DimensionMismatch unless frames are 8×8.
VideoFeature video_feature(const Video& v);

double tcon(const Video& input, const Video& output);
double tmean(const Video& prev, const Video& mid, const Video& next);
double video_ti(std::string_view prompt_text, const std::optional<Frame>& input_frame,
                const Video& generated);

/// Mean over frame pairs of the mean absolute pixel change; 0 for T == 1.
double dynamic_degree(const Video& v);

/// 1 − mean |second temporal difference| / 4; 1 for T <= 2.
double motion_smoothness(const Video& v);

}  // namespace sopforge
