// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "sopforge/core.hpp"

using namespace sopforge;
using testing_support::random_video;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::Io;
}

}  // namespace

TEST(Frame, RejectsOutOfRangeAndNonFinitePixels) {
  EXPECT_EQ(code_of([] { Frame(1, 2, {0.5f, 1.5f}); }), ErrorCode::InvalidPixel);
  EXPECT_EQ(code_of([] { Frame(1, 1, {NAN}); }), ErrorCode::InvalidPixel);
  EXPECT_EQ(code_of([] { Frame(1, 1, {INFINITY}); }), ErrorCode::InvalidPixel);
  EXPECT_EQ(code_of([] { Frame(2, 2, {0.f, 0.f, 0.f}); }), ErrorCode::DimensionMismatch);
  EXPECT_NO_THROW(Frame(1, 2, {-1.f, 1.f}));
}

TEST(Video, FromFramesMinimalAndOrdered) {
  const Video one = video_from_frames({Frame()});
  EXPECT_EQ(one.length(), 1u);
  const Frame a = Frame::filled(8, 8, 0.25f), b = Frame::filled(8, 8, -0.5f);
  const Video two = video_from_frames({a, b});
  EXPECT_EQ(two.frame(0), a);
  EXPECT_EQ(two.frame(1), b);
}

TEST(Video, EmptyAndMixedShapesRejected) {
  EXPECT_EQ(code_of([] { video_from_frames({}); }), ErrorCode::EmptyVideo);
  EXPECT_EQ(code_of([] { video_from_frames({Frame(8, 8), Frame(4, 4)}); }), ErrorCode::DimensionMismatch);
}

TEST(Video, RoundTripThroughFrames) {
  const Video v = random_video(3, 5);
  EXPECT_EQ(video_from_frames(v.frames()), v);
}

TEST(Video, LastAndFirstFrame) {
  const Video v = random_video(4, 3);
  EXPECT_EQ(last_frame(v), v.frame(2));
  const Video single = random_video(5, 1);
  EXPECT_EQ(last_frame(single), single.frame(0));
  const Video a = random_video(6, 2), b = random_video(7, 3);
  EXPECT_EQ(last_frame(concat_videos(a, b)), last_frame(b));
  EXPECT_EQ(first_frame(concat_videos(a, b)), first_frame(a));
}

TEST(Video, ConcatLengthsAndAssociativity) {
  const Video a = random_video(1, 2), b = random_video(2, 3), c = random_video(3, 1);
  EXPECT_EQ(concat_videos(a, b).length(), 5u);
  EXPECT_EQ(concat_videos(concat_videos(a, b), c), concat_videos(a, concat_videos(b, c)));
  EXPECT_EQ(code_of([&] { concat_videos(a, random_video(4, 1, 4, 4)); }), ErrorCode::DimensionMismatch);
}

TEST(TextPrompt, BlankRejected) {
  EXPECT_EQ(code_of([] { TextPrompt("   \t\n"); }), ErrorCode::EmptyPrompt);
  EXPECT_EQ(code_of([] { TextPrompt(""); }), ErrorCode::EmptyPrompt);
  EXPECT_EQ(TextPrompt(" blob ").text(), " blob ");
}

TEST(FrameDistance, AnalyticCases) {
  const Frame z = Frame::filled(8, 8, 0.f), o = Frame::filled(8, 8, 1.f);
  EXPECT_DOUBLE_EQ(frame_l2_distance(z, z), 0.0);
  EXPECT_DOUBLE_EQ(frame_l2_distance(z, o), 8.0);
  EXPECT_EQ(code_of([&] { frame_l2_distance(z, Frame(4, 4)); }), ErrorCode::DimensionMismatch);
}

TEST(FrameDistance, MatchesElementwiseOracleAndMetricAxioms) {
  for (Seed64 s = 0; s < 50; ++s) {
    const Video v = random_video(s, 3);
    const Frame &a = v.frame(0), &b = v.frame(1), &c = v.frame(2);
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = static_cast<double>(a.pixels()[i]) - b.pixels()[i];
      sq += d * d;
    }
    EXPECT_NEAR(frame_l2_distance(a, b), std::sqrt(sq), 1e-12);
    EXPECT_DOUBLE_EQ(frame_l2_distance(a, b), frame_l2_distance(b, a));
    EXPECT_LE(frame_l2_distance(a, c), frame_l2_distance(a, b) + frame_l2_distance(b, c) + 1e-9);
  }
}

TEST(FrameValues, FlattenRoundTrip) {
  const Frame f = random_video(9, 1).frame(0);
  const auto values = flatten(f);
  EXPECT_EQ(frame_from_values(values, 8, 8), f);
}
