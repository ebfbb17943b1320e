// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "sopforge/core.hpp"
#include "sopforge/error.hpp"
#include "sopforge/toyworld.hpp"

namespace testing_support {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sopforge-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Seeded video with pixels uniform in [-1, 1).
inline sopforge::Video random_video(sopforge::Seed64 seed, std::size_t t, std::size_t h = 8, std::size_t w = 8) {
  const auto v = sopforge::rng_stream(seed, t * h * w);
  std::vector<sopforge::Frame> frames;
  for (std::size_t k = 0; k < t; ++k) {
    std::vector<float> px(v.begin() + static_cast<std::ptrdiff_t>(k * h * w),
                          v.begin() + static_cast<std::ptrdiff_t>((k + 1) * h * w));
    frames.emplace_back(h, w, std::move(px));
  }
  return sopforge::Video(std::move(frames));
}

inline sopforge::Video oracle_video(std::string_view prompt, std::size_t t = sopforge::kDefaultFrames,
                                    bool digital = false) {
  return sopforge::oracle_render({sopforge::prompt_vector(prompt), digital}, t);
}

inline sopforge::Video constant_video(std::size_t t, float value) {
  return sopforge::Video(std::vector<sopforge::Frame>(t, sopforge::Frame::filled(8, 8, value)));
}

}  // namespace testing_support

/// Asserts that `stmt` throws sopforge::Error carrying `expected`.
#define EXPECT_ERROR_CODE(stmt, expected)                                    \
  do {                                                                       \
    try {                                                                    \
      stmt;                                                                  \
      ADD_FAILURE() << "no exception from " #stmt;                           \
    } catch (const ::sopforge::Error& e) {                                   \
      EXPECT_EQ(e.code(), expected) << ::sopforge::error_code_name(e.code()) \
                                    << ": " << e.what();                     \
    }                                                                        \
  } while (0)
