// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Value types shared by every module: grayscale frames, videos, prompts and
// embeddings. All of them are immutable once constructed and validate their
// invariants on construction.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sopforge/error.hpp"

namespace sopforge {

inline constexpr std::size_t kDefaultHeight = 8;
inline constexpr std::size_t kDefaultWidth = 8;
inline constexpr std::size_t kDefaultFrames = 6;
inline constexpr std::size_t kEmbeddingSize = 16;
inline constexpr std::size_t kPromptVecSize = 8;

/// Single-channel image with intensities in [-1, 1], stored row-major.
class Frame {
 public:
  /// All-zero frame.
  Frame(std::size_t height = kDefaultHeight, std::size_t width = kDefaultWidth);
  Frame(std::size_t height, std::size_t width, std::vector<float> pixels);

  static Frame filled(std::size_t height, std::size_t width, float value);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  std::span<const float> pixels() const noexcept { return pixels_; }
  float at(std::size_t y, std::size_t x) const { return pixels_.at(y * width_ + x); }

  bool same_shape(const Frame& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<float> pixels_;
};

/// Ordered, non-empty sequence of equally sized frames.
class Video {
 public:
  explicit Video(std::vector<Frame> frames);

  std::size_t length() const noexcept { return frames_.size(); }
  std::size_t height() const noexcept { return frames_.front().height(); }
  std::size_t width() const noexcept { return frames_.front().width(); }
  const std::vector<Frame>& frames() const noexcept { return frames_; }
  const Frame& frame(std::size_t t) const { return frames_.at(t); }

  bool same_shape(const Video& other) const noexcept {
    return length() == other.length() && frames_.front().same_shape(other.frames_.front());
  }

  friend bool operator==(const Video&, const Video&) = default;

 private:
  std::vector<Frame> frames_;
};

class TextPrompt {
 public:
  /// Throws EmptyPrompt when the text is blank after trimming.
  explicit TextPrompt(std::string text);

  const std::string& text() const noexcept { return text_; }

  friend bool operator==(const TextPrompt&, const TextPrompt&) = default;

 private:
  std::string text_;
};

/// Numeric stand-in for prompt semantics; every value lies in [-1, 1].
using PromptVec = std::array<double, kPromptVecSize>;

struct EnhancedPrompt {
  std::string text;
  PromptVec vector{};

  friend bool operator==(const EnhancedPrompt&, const EnhancedPrompt&) = default;
};

using Embedding = std::vector<double>;

Video video_from_frames(std::vector<Frame> frames);
const Frame& last_frame(const Video& v);
const Frame& first_frame(const Video& v);
Video concat_videos(const Video& a, const Video& b);
double frame_l2_distance(const Frame& a, const Frame& b);

/// Frame as a flat double vector (row-major), the layout agents compute on.
std::vector<double> flatten(const Frame& f);

/// Inverse of flatten. Values are narrowed to float; non-finite input or
/// values outside [-1, 1] raise InvalidPixel.
Frame frame_from_values(std::span<const double> values, std::size_t height, std::size_t width);

}  // namespace sopforge
