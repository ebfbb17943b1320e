// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sopforge/agents.hpp"
#include "sopforge/toyworld.hpp"

using namespace sopforge;
using oracle::Vec;

namespace {

Vec emb(Seed64 seed) { return rng_stream(seed, kAugmentedSize); }
Vec frame_values(Seed64 seed) { return rng_stream(seed, kDefaultPixels); }

AugmentedEmbedding aug(const Vec& e) {
  return augment(std::span(e).first(16), std::span(e).subspan(16));
}

Frame as_frame(const Vec& v) { return frame_from_values(v, 8, 8); }

void expect_near_vec(const Vec& a, const Vec& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], tol) << "index " << i;
}

/// Outputs of a role for the given inputs, via the double kernels.
std::vector<Vec> run_role(const AgentParams& p, const std::vector<Vec>& frames, const Vec& e, std::size_t len) {
  switch (p.role()) {
    case AgentId::TextToImage: return {t2i_apply(p, e)};
    case AgentId::ImageToImage: return {i2i_apply(p, frames[0], e)};
    case AgentId::ImageToVideo: return i2v_apply(p, frames[0], e, len);
    case AgentId::VideoConnect: return connect_apply(p, frames[0], frames[1], e, len);
    default: return {};
  }
}

std::size_t input_frames(AgentId id) {
  return id == AgentId::TextToImage ? 0 : id == AgentId::VideoConnect ? 2 : 1;
}

}  // namespace

TEST(Init, DeterministicShapesAndNoParamsForEnhancer) {
  EXPECT_EQ(init_params(AgentId::TextToImage, 5), init_params(AgentId::TextToImage, 5));
  EXPECT_NE(init_params(AgentId::TextToImage, 5), init_params(AgentId::TextToImage, 6));
  EXPECT_THROW(init_params(AgentId::PromptEnhance, 5), Error);
  const auto p = init_params(AgentId::VideoConnect, 1);
  EXPECT_EQ(p.tensor("Ua").rows, 64u);
  EXPECT_EQ(p.tensor("Ua").cols, 64u);
  EXPECT_EQ(p.tensor("V5").cols, 32u);
  EXPECT_EQ(p.tensor("c5").values.size(), 64u);
  EXPECT_EQ(init_params(AgentId::TextToImage, 1).parameter_count(), 64u * 32 + 64);
}

TEST(Init, W2VarianceMatchesFanInScaling) {
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (Seed64 s = 0; s < 10; ++s) {
    for (double v : init_params(AgentId::TextToImage, s).tensor("W2").values) {
      sum += v;
      sq += v * v;
      ++n;
    }
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  const double expected = (1.0 / 32.0) * (1.0 / 3.0);
  EXPECT_NEAR(var, expected, 0.2 * expected);
}

TEST(Init, StoredValuesAreFloat32Exact) {
  const AgentParams p = init_params(AgentId::ImageToVideo, 3);
  for (const auto& t : p.tensors()) {
    for (double v : t.values) ASSERT_EQ(v, static_cast<double>(static_cast<float>(v)));
  }
}

TEST(T2I, ZeroInputZeroBiasGivesZeroFrame) {
  AgentParams p = init_params(AgentId::TextToImage, 1);
  for (auto& b : p.tensor("b2").values) b = 0.0;
  const Frame f = t2i_forward(p, aug(Vec(32, 0.0)));
  for (float px : f.pixels()) EXPECT_EQ(px, 0.f);
}

TEST(T2I, MatchesScalarOracleAndStaysInOpenInterval) {
  for (Seed64 s = 0; s < 5; ++s) {
    const AgentParams p = init_params(AgentId::TextToImage, s);
    const Vec e = emb(100 + s);
    expect_near_vec(t2i_apply(p, e), oracle::t2i(p, e), 1e-12);
    const Frame f = t2i_forward(p, aug(e));
    for (float px : f.pixels()) {
      EXPECT_GT(px, -1.f);
      EXPECT_LT(px, 1.f);
    }
  }
  EXPECT_THROW(t2i_forward(init_params(AgentId::ImageToVideo, 0), aug(emb(1))), Error);
}

TEST(I2I, MatchesScalarOracleAndDependsOnEmbedding) {
  const AgentParams p = init_params(AgentId::ImageToImage, 2);
  const Vec f = frame_values(3), e = emb(4);
  expect_near_vec(i2i_apply(p, f, e), oracle::i2i(p, f, e), 1e-12);
  // Sensitivity to the modulation half.
  Vec e2 = e;
  e2[20] += 1e-3;
  const Vec a = i2i_apply(p, f, e), b = i2i_apply(p, f, e2);
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
  EXPECT_GT(diff, 1e-6);
  const Frame zero_out = i2i_forward(zero_params(AgentId::ImageToImage), as_frame(f), aug(e));
  for (float px : zero_out.pixels()) EXPECT_EQ(px, 0.f);
  EXPECT_THROW(i2i_forward(init_params(AgentId::TextToImage, 0), as_frame(f), aug(e)), Error);
}

TEST(I2V, RecurrenceMatchesOracle) {
  const AgentParams p = init_params(AgentId::ImageToVideo, 5);
  const Vec f0 = frame_values(6), e = emb(7);
  const auto got = i2v_apply(p, f0, e, 3);
  const auto want = oracle::i2v(p, f0, e, 3);
  ASSERT_EQ(got.size(), 3u);
  for (std::size_t t = 0; t < 3; ++t) expect_near_vec(got[t], want[t], 1e-12);
}

TEST(I2V, FirstFramePassesThroughAndZeroParamsGiveZeros) {
  const Frame f0 = as_frame(frame_values(8));
  const AgentParams p = init_params(AgentId::ImageToVideo, 1);
  const Video single = i2v_forward(p, f0, aug(emb(1)), 1);
  EXPECT_EQ(single, Video({f0}));
  const Video v = i2v_forward(zero_params(AgentId::ImageToVideo), f0, aug(emb(1)), 4);
  EXPECT_EQ(v.frame(0), f0);
  for (std::size_t t = 1; t < 4; ++t) EXPECT_EQ(v.frame(t), Frame());
  EXPECT_THROW(i2v_forward(p, f0, aug(emb(1)), 0), Error);
}

TEST(I2V, EarlierFramesIndependentOfLength) {
  const AgentParams p = init_params(AgentId::ImageToVideo, 9);
  const Vec f0 = frame_values(1), e = emb(2);
  const auto short_run = i2v_apply(p, f0, e, 3);
  const auto long_run = i2v_apply(p, f0, e, 6);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(short_run[t], long_run[t]);
}

TEST(Connect, MatchesOraclePhaseAndConstantWithoutC5) {
  const AgentParams p = init_params(AgentId::VideoConnect, 3);
  const Vec fa = frame_values(1), fb = frame_values(2), e = emb(3);
  const auto got = connect_apply(p, fa, fb, e, 2);
  const auto want = oracle::connect(p, fa, fb, e, 2);
  for (std::size_t m = 0; m < 2; ++m) expect_near_vec(got[m], want[m], 1e-12);

  // m_frames = 1 uses phase 1/2.
  const auto one = connect_apply(p, fa, fb, e, 1);
  expect_near_vec(one[0], oracle::connect(p, fa, fb, e, 1)[0], 1e-12);

  AgentParams flat = p;
  for (auto& c : flat.tensor("c5").values) c = 0.0;
  const Video v = connect_forward(flat, as_frame(fa), as_frame(fb), aug(e), 4);
  for (std::size_t m = 1; m < 4; ++m) EXPECT_EQ(v.frame(m), v.frame(0));
  EXPECT_THROW(connect_forward(p, as_frame(fa), as_frame(fb), aug(e), 0), Error);
}

TEST(Augment, RejectsWrongLengths) {
  const Vec e(16, 0.0), z(15, 0.0);
  EXPECT_THROW(augment(e, z), Error);
  EXPECT_EQ(augment(e, Vec(16, 1.0)).values.size(), 32u);
}

class VjpTest : public ::testing::TestWithParam<std::tuple<AgentId, Seed64>> {};

TEST_P(VjpTest, EveryCoordinateMatchesCentralDifferences) {
  const auto [role, seed] = GetParam();
  const AgentParams p = init_params(role, seed);
  const std::size_t len = role == AgentId::ImageToVideo ? 3 : role == AgentId::VideoConnect ? 2 : 1;
  std::vector<Vec> frames;
  for (std::size_t i = 0; i < input_frames(role); ++i) frames.push_back(frame_values(seed * 10 + i));
  const Vec e = emb(seed + 77);

  const auto outputs = run_role(p, frames, e, len);
  std::vector<Vec> upstream;
  for (std::size_t k = 0; k < outputs.size(); ++k) upstream.push_back(rng_stream(seed * 31 + k, outputs[k].size()));
  auto objective = [&](const AgentParams& q, const std::vector<Vec>& fs, const Vec& em) {
    const auto out = run_role(q, fs, em, len);
    double s = 0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      for (std::size_t i = 0; i < out[k].size(); ++i) s += upstream[k][i] * out[k][i];
    }
    return s;
  };

  const AgentTrace trace = forward_jacobians(p, AgentInputs{frames, e, len});
  ASSERT_EQ(trace.outputs.size(), outputs.size());
  const AgentVjp g = trace.vjp(upstream);
  constexpr double eps = 1e-4;
  double worst = 0;

  AgentParams q = p;
  for (std::size_t k = 0; k < p.tensors().size(); ++k) {
    for (std::size_t i = 0; i < p.tensors()[k].values.size(); ++i) {
      double& slot = q.tensors()[k].values[i];
      const double saved = slot;
      slot = saved + eps;
      const double up = objective(q, frames, e);
      slot = saved - eps;
      const double down = objective(q, frames, e);
      slot = saved;
      worst = std::max(worst, oracle::relative_error(g.d_params.tensors()[k].values[i], (up - down) / (2 * eps)));
    }
  }
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (std::size_t i = 0; i < frames[f].size(); ++i) {
      const double fd = oracle::central_difference(
          [&](const Vec& x) {
            auto fs = frames;
            fs[f] = x;
            return objective(p, fs, e);
          },
          frames[f], i, eps);
      worst = std::max(worst, oracle::relative_error(g.d_inputs[f][i], fd));
    }
  }
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double fd = oracle::central_difference([&](const Vec& x) { return objective(p, frames, x); }, e, i, eps);
    worst = std::max(worst, oracle::relative_error(g.d_embedding[i], fd));
  }
  EXPECT_LT(worst, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllRolesThreeSeeds, VjpTest,
                         ::testing::Combine(::testing::Values(AgentId::TextToImage, AgentId::ImageToImage,
                                                              AgentId::ImageToVideo, AgentId::VideoConnect),
                                            ::testing::Values(Seed64{1}, Seed64{2}, Seed64{3})));

TEST(Vjp, ZeroUpstreamGivesZeroGradients) {
  const AgentParams p = init_params(AgentId::ImageToVideo, 4);
  const AgentTrace trace = forward_jacobians(p, AgentInputs{{frame_values(1)}, emb(2), 4});
  std::vector<Vec> zero(trace.outputs.size(), Vec(64, 0.0));
  const AgentVjp g = trace.vjp(zero);
  for (const auto& t : g.d_params.tensors()) {
    for (double v : t.values) EXPECT_EQ(v, 0.0);
  }
  for (double v : g.d_embedding) EXPECT_EQ(v, 0.0);
}

TEST(Vjp, I2VFrameZeroGradientIncludesChainTerm) {
  // With T = 2 the gradient on f0 is the pass-through term plus the path
  // through f1; the finite difference sees both.
  const AgentParams p = init_params(AgentId::ImageToVideo, 12);
  const Vec f0 = frame_values(5), e = emb(6);
  const AgentTrace trace = forward_jacobians(p, AgentInputs{{f0}, e, 2});
  const std::vector<Vec> up = {Vec(64, 0.0), rng_stream(3, 64)};
  const AgentVjp g = trace.vjp(up);
  double nonzero = 0;
  for (std::size_t i = 0; i < 64; ++i) {
    const double fd = oracle::central_difference(
        [&](const Vec& x) {
          const auto out = i2v_apply(p, x, e, 2);
          double s = 0;
          for (std::size_t j = 0; j < 64; ++j) s += up[1][j] * out[1][j];
          return s;
        },
        f0, i, 1e-4);
    EXPECT_LT(oracle::relative_error(g.d_inputs[0][i], fd), 1e-4);
    nonzero += std::abs(g.d_inputs[0][i]);
  }
  EXPECT_GT(nonzero, 0.0);
}

TEST(Vjp, LaterUpstreamDoesNotReachEarlierFrames) {
  // Upstream only on frame 1 of a T = 4 rollout equals the T = 2 gradient.
  const AgentParams p = init_params(AgentId::ImageToVideo, 2);
  const Vec f0 = frame_values(1), e = emb(2);
  const Vec u = rng_stream(9, 64);
  const AgentVjp g4 = forward_jacobians(p, AgentInputs{{f0}, e, 4}).vjp({Vec(64, 0.0), u, Vec(64, 0.0), Vec(64, 0.0)});
  const AgentVjp g2 = forward_jacobians(p, AgentInputs{{f0}, e, 2}).vjp({Vec(64, 0.0), u});
  EXPECT_EQ(g4.d_inputs, g2.d_inputs);
  EXPECT_EQ(g4.d_embedding, g2.d_embedding);
}
