// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations used only by tests. They are written from the
// formulas directly and share no code with the library beyond value types.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "sopforge/agents.hpp"
#include "sopforge/core.hpp"

namespace oracle {

using Vec = std::vector<double>;

// ---- hash / PRNG ----------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;  // 0xcbf29ce484222325
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;  // 0x100000001b3
  }
  return h;
}

struct SplitMix {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

inline double unit(std::uint64_t x) { return std::ldexp(static_cast<double>(x >> 11), -53) * 2.0 - 1.0; }

inline Vec stream(std::uint64_t seed, std::size_t n) {
  SplitMix g{seed};
  Vec out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(unit(g.next()));
  return out;
}

inline Vec embed(int agent, std::string_view text) {
  return stream(fnv1a64(text) ^ (static_cast<std::uint64_t>(agent) * 0x9E3779B97F4A7C15ULL), 16);
}

// Values produced by an independent Python implementation of the same
// algorithms, kept here so a shared mistake in the C++ code cannot hide.
inline constexpr std::uint64_t kSplitMixSeed1[4] = {0x910a2dec89025cc1ULL, 0xbeeb8da1658eec67ULL,
                                                   0xf893a2eefb32555eULL, 0x71c18690ee42c90bULL};
// Published splitmix64 outputs for seed 0.
inline constexpr std::uint64_t kSplitMixSeed0[3] = {0xe220a8397b1dcdafULL, 0x6e789e6aa1b965f4ULL,
                                                   0x06c45d188009454fULL};
inline constexpr double kStreamSeed1[4] = {0.1331231503445618, 0.49156351452540226, 0.9420055071735924,
                                           -0.11128156588845584};
inline constexpr std::uint64_t kFnvModToken = 0x839d1b9abd27d9d9ULL;
inline constexpr std::uint64_t kFnvBlobPrompt = 0x0e29356927be179dULL;  // "a red blob drifting right"
inline constexpr double kPromptVecBlob[8] = {0.2831756348762817, -0.902382648482192, 0.0016272895295987855,
                                             -0.8374998999170058, 0.606351816310885, 0.12629059356256245,
                                             0.8233938431192085, -0.38492622749354166};
inline constexpr double kEmbedModAgent2[16] = {
    -0.7927869386996986, 0.061814735047134306, -0.1984540847481988, 0.530585107718256,
    0.6979569596952193,  -0.07041597111581188, -0.2575800901782821, 0.7432922102779949,
    -0.3694186072802619, -0.7367891960333752,  -0.2683910443844877, -0.5661322978510508,
    -0.6529988872204655, -0.5370535394643807,  0.2416336893192106,  0.21863231589790377};

// ---- dense algebra --------------------------------------------------------

inline const Vec& values(const sopforge::AgentParams& p, std::string_view name) { return p.tensor(name).values; }

/// y += W x with W row-major rows×cols.
inline void matvec_acc(const Vec& w, std::size_t rows, std::size_t cols, const Vec& x, Vec& y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += w[r * cols + c] * x[c];
    y[r] += s;
  }
}

inline Vec tanh_all(Vec v) {
  for (auto& x : v) x = std::tanh(x);
  return v;
}

inline Vec t2i(const sopforge::AgentParams& p, const Vec& e) {
  Vec y = values(p, "b2");
  matvec_acc(values(p, "W2"), 64, 32, e, y);
  return tanh_all(y);
}

inline Vec i2i(const sopforge::AgentParams& p, const Vec& f, const Vec& e) {
  Vec y = values(p, "b3");
  matvec_acc(values(p, "U3"), 64, 64, f, y);
  matvec_acc(values(p, "V3"), 64, 32, e, y);
  return tanh_all(y);
}

inline std::vector<Vec> i2v(const sopforge::AgentParams& p, const Vec& f0, const Vec& e, std::size_t t) {
  std::vector<Vec> frames{f0};
  while (frames.size() < t) {
    Vec y = values(p, "b4");
    matvec_acc(values(p, "U4"), 64, 64, frames.back(), y);
    matvec_acc(values(p, "V4"), 64, 32, e, y);
    frames.push_back(tanh_all(y));
  }
  return frames;
}

inline std::vector<Vec> connect(const sopforge::AgentParams& p, const Vec& fa, const Vec& fb, const Vec& e,
                                std::size_t m_frames) {
  std::vector<Vec> out;
  for (std::size_t m = 1; m <= m_frames; ++m) {
    const double phase = static_cast<double>(m) / static_cast<double>(m_frames + 1);
    Vec y = values(p, "b5");
    const Vec& c5 = values(p, "c5");
    for (std::size_t i = 0; i < 64; ++i) y[i] += c5[i] * phase;
    matvec_acc(values(p, "Ua"), 64, 64, fa, y);
    matvec_acc(values(p, "Ub"), 64, 64, fb, y);
    matvec_acc(values(p, "V5"), 64, 32, e, y);
    out.push_back(tanh_all(y));
  }
  return out;
}

inline Vec concat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline Vec flat(const sopforge::Frame& f) {
  Vec out;
  for (float p : f.pixels()) out.push_back(p);
  return out;
}

inline double mse(const std::vector<Vec>& out, const sopforge::Video& target) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < out.size(); ++t) {
    const auto px = target.frame(t).pixels();
    for (std::size_t i = 0; i < px.size(); ++i, ++n) s += (out[t][i] - px[i]) * (out[t][i] - px[i]);
  }
  return s / static_cast<double>(n);
}

inline double mse(const sopforge::Video& a, const sopforge::Video& b) {
  std::vector<Vec> av;
  for (const auto& f : a.frames()) av.push_back(flat(f));
  return mse(av, b);
}

/// Central difference of f at x[i].
inline double central_difference(const std::function<double(const Vec&)>& f, Vec x, std::size_t i, double eps) {
  const double x0 = x[i];
  x[i] = x0 + eps;
  const double up = f(x);
  x[i] = x0 - eps;
  const double down = f(x);
  return (up - down) / (2.0 * eps);
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// ---- oracle renderer ------------------------------------------------------

inline double blob_pixel(const sopforge::PromptVec& p, double t, double x, double y, bool digital) {
  const double cx = (p[0] + 1.0) / 2.0 * 7.0;
  const double cy = (p[1] + 1.0) / 2.0 * 7.0;
  const double vx = 0.8 * p[2];
  const double vy = 0.8 * p[3];
  const double r = 1.0 + 1.5 * (p[4] + 1.0) / 2.0;
  const double a = 0.5 + (p[5] + 1.0) / 4.0;
  const double dx = x - cx - vx * t;
  const double dy = y - cy - vy * t;
  double v = 2.0 * a * std::exp(-(dx * dx + dy * dy) / (2.0 * r * r)) - 1.0;
  if (digital) v = std::clamp(v + ((static_cast<int>(x) + static_cast<int>(y)) % 2 == 0 ? 0.1 : -0.1), -1.0, 1.0);
  return v;
}

// ---- metrics --------------------------------------------------------------

inline double cos_sim(const Vec& u, const Vec& v) {
  const double dot = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
  const double nu = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
  const double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  return dot / (nu * nv);
}

inline Vec pool2x2(const Vec& px) {
  Vec out(16);
  for (std::size_t by = 0; by < 4; ++by) {
    for (std::size_t bx = 0; bx < 4; ++bx) {
      const std::size_t y = 2 * by, x = 2 * bx;
      out[by * 4 + bx] = (px[y * 8 + x] + px[y * 8 + x + 1] + px[(y + 1) * 8 + x] + px[(y + 1) * 8 + x + 1]) / 4.0;
    }
  }
  return out;
}

inline Vec project(const Vec& in32) {
  const Vec r = stream(0xFEA7, 512);
  Vec out(16, 0.0);
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t j = 0; j < 32; ++j) out[i] += r[i * 32 + j] * in32[j];
  }
  return out;
}

inline Vec feature(const sopforge::Video& v) {
  const std::size_t T = v.length();
  Vec mean(64, 0.0), diff(64, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const Vec f = flat(v.frame(t));
    for (std::size_t i = 0; i < 64; ++i) mean[i] += f[i] / static_cast<double>(T);
    if (t + 1 < T) {
      const Vec g = flat(v.frame(t + 1));
      for (std::size_t i = 0; i < 64; ++i) diff[i] += std::abs(g[i] - f[i]) / static_cast<double>(T - 1);
    }
  }
  return project(concat(pool2x2(mean), pool2x2(diff)));
}

inline double dynamic_degree(const sopforge::Video& v) {
  if (v.length() == 1) return 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t + 1 < v.length(); ++t) {
    const Vec a = flat(v.frame(t)), b = flat(v.frame(t + 1));
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(b[i] - a[i]);
    s += d / static_cast<double>(a.size());
  }
  return s / static_cast<double>(v.length() - 1);
}

inline double motion_smoothness(const sopforge::Video& v) {
  if (v.length() <= 2) return 1.0;
  double s = 0.0;
  for (std::size_t t = 1; t + 1 < v.length(); ++t) {
    const Vec a = flat(v.frame(t - 1)), b = flat(v.frame(t)), c = flat(v.frame(t + 1));
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(c[i] - 2 * b[i] + a[i]);
    s += d / static_cast<double>(a.size());
  }
  return 1.0 - s / static_cast<double>(v.length() - 2) / 4.0;
}

// ---- ranking / routing ----------------------------------------------------

/// Indices sorted by key, ties to the lower index, via insertion sort.
inline std::vector<std::size_t> argsort(const Vec& key, bool descending) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < key.size(); ++i) {
    std::size_t pos = idx.size();
    while (pos > 0) {
      const double prev = key[idx[pos - 1]];
      const bool after = descending ? key[i] > prev : key[i] < prev;
      if (!after) break;
      --pos;
    }
    idx.insert(idx.begin() + static_cast<std::ptrdiff_t>(pos), i);
  }
  return idx;
}

/// Brute-force routing rule: every ranking's first entry equal.
inline bool unanimous(const std::vector<std::vector<std::size_t>>& orders) {
  for (const auto& o : orders) {
    if (o[0] != orders[0][0]) return false;
  }
  return true;
}

inline std::vector<std::vector<std::size_t>> all_permutations(std::size_t k) {
  std::vector<std::size_t> p(k);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<std::size_t>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace oracle
