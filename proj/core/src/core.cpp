// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "sopforge/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace sopforge {

namespace {

void check_pixels(const std::vector<float>& pixels) {
  for (float p : pixels) {
    if (!std::isfinite(p) || p < -1.0f || p > 1.0f) {
      throw Error(ErrorCode::InvalidPixel, "pixel outside [-1, 1]: " + std::to_string(p));
    }
  }
}

std::string shape_string(const Frame& f) {
  return std::to_string(f.height()) + "x" + std::to_string(f.width());
}

}  // namespace

Frame::Frame(std::size_t height, std::size_t width)
    : height_(height), width_(width), pixels_(height * width, 0.0f) {
  if (height == 0 || width == 0) {
    throw Error(ErrorCode::DimensionMismatch, "frame dimensions must be positive");
  }
}

Frame::Frame(std::size_t height, std::size_t width, std::vector<float> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height == 0 || width == 0) {
    throw Error(ErrorCode::DimensionMismatch, "frame dimensions must be positive");
  }
  if (pixels_.size() != height * width) {
    throw Error(ErrorCode::DimensionMismatch,
                "frame has " + std::to_string(pixels_.size()) + " pixels, expected " +
                    std::to_string(height * width));
  }
  check_pixels(pixels_);
}

Frame Frame::filled(std::size_t height, std::size_t width, float value) {
  return Frame(height, width, std::vector<float>(height * width, value));
}

Video::Video(std::vector<Frame> frames) : frames_(std::move(frames)) {
  if (frames_.empty()) {
    throw Error(ErrorCode::EmptyVideo, "a video needs at least one frame");
  }
  for (const auto& f : frames_) {
    if (!f.same_shape(frames_.front())) {
      throw Error(ErrorCode::DimensionMismatch,
                  "frame " + shape_string(f) + " does not match " + shape_string(frames_.front()));
    }
  }
}

TextPrompt::TextPrompt(std::string text) : text_(std::move(text)) {
  const bool blank = std::all_of(text_.begin(), text_.end(),
                                 [](unsigned char c) { return std::isspace(c) != 0; });
  if (blank) throw Error(ErrorCode::EmptyPrompt, "prompt is empty");
}

Video video_from_frames(std::vector<Frame> frames) { return Video(std::move(frames)); }

const Frame& last_frame(const Video& v) { return v.frames().back(); }

const Frame& first_frame(const Video& v) { return v.frames().front(); }

Video concat_videos(const Video& a, const Video& b) {
  if (!a.frames().front().same_shape(b.frames().front())) {
    throw Error(ErrorCode::DimensionMismatch, "cannot concatenate videos of different frame size");
  }
  std::vector<Frame> frames = a.frames();
  frames.insert(frames.end(), b.frames().begin(), b.frames().end());
  return Video(std::move(frames));
}

double frame_l2_distance(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::DimensionMismatch,
                "distance between " + shape_string(a) + " and " + shape_string(b));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.pixels()[i]) - static_cast<double>(b.pixels()[i]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

std::vector<double> flatten(const Frame& f) {
  return std::vector<double>(f.pixels().begin(), f.pixels().end());
}

Frame frame_from_values(std::span<const double> values, std::size_t height, std::size_t width) {
  std::vector<float> pixels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::InvalidPixel, "non-finite pixel value");
    }
    pixels[i] = static_cast<float>(values[i]);
  }
  return Frame(height, width, std::move(pixels));
}

}  // namespace sopforge
