// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// The five agent roles as single-layer tanh generators. Each role has a
// public Frame/Video API used by the pipeline and a double-precision kernel
// with an explicit vector-Jacobian product used by end-to-end training.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sopforge/core.hpp"
#include "sopforge/toyworld.hpp"

namespace sopforge {

enum class AgentId : int {
  PromptEnhance = 1,
  TextToImage = 2,
  ImageToImage = 3,
  ImageToVideo = 4,
  VideoConnect = 5,
};

std::string_view agent_name(AgentId id) noexcept;
/// Throws InvalidConfig for values outside 1..5.
AgentId agent_from_int(int value);
inline int agent_index(AgentId id) noexcept { return static_cast<int>(id); }

inline constexpr std::size_t kModulationSize = 16;
inline constexpr std::size_t kAugmentedSize = kEmbeddingSize + kModulationSize;
inline constexpr std::size_t kDefaultPixels = kDefaultHeight * kDefaultWidth;

/// Parameters are held in double but always rounded to float32-representable
/// values after initialization and every optimizer step, so checkpoints
/// round-trip exactly.
inline double to_storage(double v) noexcept { return static_cast<double>(static_cast<float>(v)); }

/// Row-major matrix (or a vector when cols == 1).
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

class AgentParams {
 public:
  AgentParams(AgentId role, std::vector<Tensor> tensors);

  AgentId role() const noexcept { return role_; }
  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }
  std::vector<Tensor>& tensors() noexcept { return tensors_; }

  /// Throws ShapeMismatch if the tensor does not exist.
  const Tensor& tensor(std::string_view name) const;
  Tensor& tensor(std::string_view name);

  std::size_t parameter_count() const noexcept;
  std::size_t pixels() const noexcept { return tensors_.front().rows; }

  /// Same names and shapes, all values zero.
  AgentParams zeros_like() const;
  bool same_shape(const AgentParams& other) const noexcept;

  friend bool operator==(const AgentParams&, const AgentParams&) = default;

 private:
  AgentId role_;
  std::vector<Tensor> tensors_;
};

/// Seeded init, each tensor uniform in [-1, 1) scaled by 1/sqrt(fan_in).
/// Throws NoParams for PromptEnhance.
AgentParams init_params(AgentId role, Seed64 seed, std::size_t pixels = kDefaultPixels);

/// All-zero parameters of the role's shape.
AgentParams zero_params(AgentId role, std::size_t pixels = kDefaultPixels);

/// ẽ = [e ; z], 32 values.
struct AugmentedEmbedding {
  std::vector<double> values;
};

/// Throws LengthMismatch unless e has 16 values and z has 16 values.
AugmentedEmbedding augment(std::span<const double> e, std::span<const double> z);

Frame t2i_forward(const AgentParams& params, const AugmentedEmbedding& emb,
                  std::size_t height = kDefaultHeight, std::size_t width = kDefaultWidth);
Frame i2i_forward(const AgentParams& params, const Frame& f, const AugmentedEmbedding& emb);
Video i2v_forward(const AgentParams& params, const Frame& f0, const AugmentedEmbedding& emb,
                  std::size_t t_frames);
Video connect_forward(const AgentParams& params, const Frame& fa, const Frame& fb,
                      const AugmentedEmbedding& emb, std::size_t m_frames);

// Double-precision kernels. Frames are flat row-major vectors of `pixels`.
using FrameValues = std::vector<double>;

FrameValues t2i_apply(const AgentParams& params, std::span<const double> emb);
FrameValues i2i_apply(const AgentParams& params, std::span<const double> frame,
                      std::span<const double> emb);
/// Returns t_frames frames; index 0 is f0 itself.
std::vector<FrameValues> i2v_apply(const AgentParams& params, std::span<const double> f0,
                                   std::span<const double> emb, std::size_t t_frames);
std::vector<FrameValues> connect_apply(const AgentParams& params, std::span<const double> fa,
                                       std::span<const double> fb, std::span<const double> emb,
                                       std::size_t m_frames);

/// Gradients produced by one agent's backward pass.
struct AgentVjp {
  AgentParams d_params;
  std::vector<FrameValues> d_inputs;  // one per input frame, in input order
  std::vector<double> d_embedding;
};

struct AgentInputs {
  std::vector<FrameValues> frames;  // 0 (t2i), 1 (i2i, i2v) or 2 (connect) frames
  std::vector<double> embedding;
  std::size_t length = 1;  // t_frames for i2v, m_frames for connect
};

/// Outputs of a forward pass plus the closure computing its VJP. The closure
/// references `params`, which must outlive it.
struct AgentTrace {
  std::vector<FrameValues> outputs;
  std::function<AgentVjp(const std::vector<FrameValues>& upstream)> vjp;
};

AgentTrace forward_jacobians(const AgentParams& params, AgentInputs inputs);

}  // namespace sopforge
