// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "sopforge/agents.hpp"

#include <algorithm>
#include <cmath>

namespace sopforge {

std::string_view agent_name(AgentId id) noexcept {
  switch (id) {
    case AgentId::PromptEnhance: return "prompt_enhance";
    case AgentId::TextToImage: return "text_to_image";
    case AgentId::ImageToImage: return "image_to_image";
    case AgentId::ImageToVideo: return "image_to_video";
    case AgentId::VideoConnect: return "video_connect";
  }
  return "unknown";
}

AgentId agent_from_int(int value) {
  if (value < 1 || value > 5) {
    throw Error(ErrorCode::InvalidConfig, "agent id must be in 1..5, got " + std::to_string(value));
  }
  return static_cast<AgentId>(value);
}

AgentParams::AgentParams(AgentId role, std::vector<Tensor> tensors)
    : role_(role), tensors_(std::move(tensors)) {
  if (tensors_.empty()) throw Error(ErrorCode::NoParams, "agent has no tensors");
  for (const auto& t : tensors_) {
    if (t.values.size() != t.rows * t.cols) {
      throw Error(ErrorCode::ShapeMismatch, "tensor " + t.name + " has inconsistent size");
    }
  }
}

const Tensor& AgentParams::tensor(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::ShapeMismatch, "no tensor named " + std::string(name));
}

Tensor& AgentParams::tensor(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).tensor(name));
}

std::size_t AgentParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.values.size();
  return n;
}

AgentParams AgentParams::zeros_like() const {
  AgentParams out = *this;
  for (auto& t : out.tensors_) std::fill(t.values.begin(), t.values.end(), 0.0);
  return out;
}

bool AgentParams::same_shape(const AgentParams& other) const noexcept {
  if (role_ != other.role_ || tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name || a.rows != b.rows || a.cols != b.cols) return false;
  }
  return true;
}

namespace {

struct TensorShape {
  const char* name;
  std::size_t rows;
  std::size_t cols;
};

std::vector<TensorShape> layout(AgentId role, std::size_t p) {
  const std::size_t e = kAugmentedSize;
  switch (role) {
    case AgentId::TextToImage:
      return {{"W2", p, e}, {"b2", p, 1}};
    case AgentId::ImageToImage:
      return {{"U3", p, p}, {"V3", p, e}, {"b3", p, 1}};
    case AgentId::ImageToVideo:
      return {{"U4", p, p}, {"V4", p, e}, {"b4", p, 1}};
    case AgentId::VideoConnect:
      return {{"Ua", p, p}, {"Ub", p, p}, {"V5", p, e}, {"c5", p, 1}, {"b5", p, 1}};
    case AgentId::PromptEnhance:
      break;
  }
  throw Error(ErrorCode::NoParams, "the prompt-enhance agent has no parameters");
}

// Total input width of the layer, used as fan-in for the vector tensors.
std::size_t layer_fan_in(const std::vector<TensorShape>& shapes) {
  std::size_t n = 0;
  for (const auto& s : shapes) {
    if (s.cols > 1) n += s.cols;
  }
  return n;
}

void require_role(const AgentParams& params, AgentId role) {
  if (params.role() != role) {
    throw Error(ErrorCode::RoleMismatch, "expected " + std::string(agent_name(role)) +
                                             " params, got " +
                                             std::string(agent_name(params.role())));
  }
}

void require_size(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw Error(ErrorCode::LengthMismatch, std::string(what) + " has length " +
                                               std::to_string(v.size()) + ", expected " +
                                               std::to_string(n));
  }
}

// y += W x
void matvec_acc(const Tensor& w, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = &w.values[r * w.cols];
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// y += Wᵀ d
void matvec_t_acc(const Tensor& w, std::span<const double> d, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = &w.values[r * w.cols];
    const double dr = d[r];
    for (std::size_t c = 0; c < w.cols; ++c) y[c] += row[c] * dr;
  }
}

// G += d xᵀ
void outer_acc(Tensor& g, std::span<const double> d, std::span<const double> x) {
  for (std::size_t r = 0; r < g.rows; ++r) {
    double* row = &g.values[r * g.cols];
    const double dr = d[r];
    for (std::size_t c = 0; c < g.cols; ++c) row[c] += dr * x[c];
  }
}

void add_to(Tensor& g, std::span<const double> d, double scale = 1.0) {
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] += d[i] * scale;
}

void tanh_inplace(std::span<double> v) {
  for (auto& x : v) x = std::tanh(x);
}

// d = upstream ⊙ (1 − out²)
FrameValues tanh_backward(std::span<const double> upstream, std::span<const double> out) {
  FrameValues d(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) d[i] = upstream[i] * (1.0 - out[i] * out[i]);
  return d;
}

FrameValues bias_copy(const Tensor& b) { return FrameValues(b.values.begin(), b.values.end()); }

}  // namespace

AgentParams init_params(AgentId role, Seed64 seed, std::size_t pixels) {
  const auto shapes = layout(role, pixels);
  const double vector_scale = 1.0 / std::sqrt(static_cast<double>(layer_fan_in(shapes)));
  std::vector<Tensor> tensors;
  for (const auto& s : shapes) {
    const Seed64 tensor_seed =
        seed ^ hash_text(s.name) ^ (static_cast<std::uint64_t>(role) * kGoldenGamma);
    auto values = rng_stream(tensor_seed, s.rows * s.cols);
    const double scale = s.cols > 1 ? 1.0 / std::sqrt(static_cast<double>(s.cols)) : vector_scale;
    for (auto& v : values) v = to_storage(v * scale);
    tensors.push_back(Tensor{s.name, s.rows, s.cols, std::move(values)});
  }
  return AgentParams(role, std::move(tensors));
}

AgentParams zero_params(AgentId role, std::size_t pixels) {
  std::vector<Tensor> tensors;
  for (const auto& s : layout(role, pixels)) {
    tensors.push_back(Tensor{s.name, s.rows, s.cols, std::vector<double>(s.rows * s.cols, 0.0)});
  }
  return AgentParams(role, std::move(tensors));
}

AugmentedEmbedding augment(std::span<const double> e, std::span<const double> z) {
  require_size(e, kEmbeddingSize, "text embedding");
  require_size(z, kModulationSize, "modulation embedding");
  AugmentedEmbedding out;
  out.values.reserve(kAugmentedSize);
  out.values.insert(out.values.end(), e.begin(), e.end());
  out.values.insert(out.values.end(), z.begin(), z.end());
  return out;
}

FrameValues t2i_apply(const AgentParams& params, std::span<const double> emb) {
  require_role(params, AgentId::TextToImage);
  require_size(emb, kAugmentedSize, "augmented embedding");
  FrameValues out = bias_copy(params.tensor("b2"));
  matvec_acc(params.tensor("W2"), emb, out);
  tanh_inplace(out);
  return out;
}

FrameValues i2i_apply(const AgentParams& params, std::span<const double> frame,
                      std::span<const double> emb) {
  require_role(params, AgentId::ImageToImage);
  require_size(emb, kAugmentedSize, "augmented embedding");
  require_size(frame, params.pixels(), "input frame");
  FrameValues out = bias_copy(params.tensor("b3"));
  matvec_acc(params.tensor("U3"), frame, out);
  matvec_acc(params.tensor("V3"), emb, out);
  tanh_inplace(out);
  return out;
}

std::vector<FrameValues> i2v_apply(const AgentParams& params, std::span<const double> f0,
                                   std::span<const double> emb, std::size_t t_frames) {
  require_role(params, AgentId::ImageToVideo);
  require_size(emb, kAugmentedSize, "augmented embedding");
  require_size(f0, params.pixels(), "seed frame");
  if (t_frames < 1) throw Error(ErrorCode::InvalidLength, "t_frames must be >= 1");
  // The embedding term is constant over time.
  FrameValues drive = bias_copy(params.tensor("b4"));
  matvec_acc(params.tensor("V4"), emb, drive);
  std::vector<FrameValues> frames;
  frames.reserve(t_frames);
  frames.emplace_back(f0.begin(), f0.end());
  const Tensor& u = params.tensor("U4");
  for (std::size_t t = 1; t < t_frames; ++t) {
    FrameValues next = drive;
    matvec_acc(u, frames.back(), next);
    tanh_inplace(next);
    frames.push_back(std::move(next));
  }
  return frames;
}

std::vector<FrameValues> connect_apply(const AgentParams& params, std::span<const double> fa,
                                       std::span<const double> fb, std::span<const double> emb,
                                       std::size_t m_frames) {
  require_role(params, AgentId::VideoConnect);
  require_size(emb, kAugmentedSize, "augmented embedding");
  require_size(fa, params.pixels(), "first frame");
  require_size(fb, params.pixels(), "second frame");
  if (m_frames < 1) throw Error(ErrorCode::InvalidLength, "m_frames must be >= 1");
  FrameValues base = bias_copy(params.tensor("b5"));
  matvec_acc(params.tensor("Ua"), fa, base);
  matvec_acc(params.tensor("Ub"), fb, base);
  matvec_acc(params.tensor("V5"), emb, base);
  const Tensor& c = params.tensor("c5");
  std::vector<FrameValues> frames;
  frames.reserve(m_frames);
  for (std::size_t m = 1; m <= m_frames; ++m) {
    const double phase = static_cast<double>(m) / static_cast<double>(m_frames + 1);
    FrameValues g = base;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c.values[i] * phase;
    tanh_inplace(g);
    frames.push_back(std::move(g));
  }
  return frames;
}

namespace {

void require_finite(std::span<const double> values, AgentId role) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::AgentFailure,
                  std::string(agent_name(role)) + " produced a non-finite output");
    }
  }
}

Frame to_frame(const FrameValues& values, std::size_t height, std::size_t width, AgentId role) {
  require_finite(values, role);
  return frame_from_values(values, height, width);
}

Video to_video(const std::vector<FrameValues>& frames, std::size_t height, std::size_t width,
               AgentId role) {
  std::vector<Frame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(to_frame(f, height, width, role));
  return Video(std::move(out));
}

void require_frame_pixels(const AgentParams& params, const Frame& f) {
  if (f.size() != params.pixels()) {
    throw Error(ErrorCode::DimensionMismatch, "frame has " + std::to_string(f.size()) +
                                                  " pixels, agent expects " +
                                                  std::to_string(params.pixels()));
  }
}

}  // namespace

Frame t2i_forward(const AgentParams& params, const AugmentedEmbedding& emb, std::size_t height,
                  std::size_t width) {
  const auto out = t2i_apply(params, emb.values);
  if (out.size() != height * width) {
    throw Error(ErrorCode::DimensionMismatch, "requested frame size does not match parameters");
  }
  return to_frame(out, height, width, AgentId::TextToImage);
}

Frame i2i_forward(const AgentParams& params, const Frame& f, const AugmentedEmbedding& emb) {
  require_role(params, AgentId::ImageToImage);
  require_frame_pixels(params, f);
  return to_frame(i2i_apply(params, flatten(f), emb.values), f.height(), f.width(),
                  AgentId::ImageToImage);
}

Video i2v_forward(const AgentParams& params, const Frame& f0, const AugmentedEmbedding& emb,
                  std::size_t t_frames) {
  require_role(params, AgentId::ImageToVideo);
  require_frame_pixels(params, f0);
  auto frames = i2v_apply(params, flatten(f0), emb.values, t_frames);
  // Frame 0 is passed through verbatim rather than round-tripped.
  std::vector<Frame> out{f0};
  for (std::size_t t = 1; t < frames.size(); ++t) {
    out.push_back(to_frame(frames[t], f0.height(), f0.width(), AgentId::ImageToVideo));
  }
  return Video(std::move(out));
}

Video connect_forward(const AgentParams& params, const Frame& fa, const Frame& fb,
                      const AugmentedEmbedding& emb, std::size_t m_frames) {
  require_role(params, AgentId::VideoConnect);
  require_frame_pixels(params, fa);
  if (!fa.same_shape(fb)) throw Error(ErrorCode::DimensionMismatch, "connect frames differ");
  return to_video(connect_apply(params, flatten(fa), flatten(fb), emb.values, m_frames),
                  fa.height(), fa.width(), AgentId::VideoConnect);
}

AgentTrace forward_jacobians(const AgentParams& params, AgentInputs inputs) {
  const std::size_t p = params.pixels();
  auto check_upstream = [p](const std::vector<FrameValues>& up, std::size_t n) {
    if (up.size() != n) throw Error(ErrorCode::LengthMismatch, "upstream frame count mismatch");
    for (const auto& u : up) require_size(u, p, "upstream gradient");
  };
  auto check_inputs = [&inputs](std::size_t n) {
    if (inputs.frames.size() != n) {
      throw Error(ErrorCode::InputMismatch, "agent expects " + std::to_string(n) + " input frames");
    }
  };

  AgentTrace trace;
  switch (params.role()) {
    case AgentId::TextToImage: {
      check_inputs(0);
      trace.outputs = {t2i_apply(params, inputs.embedding)};
      trace.vjp = [&params, in = std::move(inputs), out = trace.outputs,
                   check_upstream](const std::vector<FrameValues>& up) {
        check_upstream(up, 1);
        AgentVjp g{params.zeros_like(), {}, std::vector<double>(kAugmentedSize, 0.0)};
        const auto d = tanh_backward(up[0], out[0]);
        outer_acc(g.d_params.tensor("W2"), d, in.embedding);
        add_to(g.d_params.tensor("b2"), d);
        matvec_t_acc(params.tensor("W2"), d, g.d_embedding);
        return g;
      };
      break;
    }
    case AgentId::ImageToImage: {
      check_inputs(1);
      trace.outputs = {i2i_apply(params, inputs.frames[0], inputs.embedding)};
      trace.vjp = [&params, in = std::move(inputs), out = trace.outputs,
                   check_upstream, p](const std::vector<FrameValues>& up) {
        check_upstream(up, 1);
        AgentVjp g{params.zeros_like(), {FrameValues(p, 0.0)},
                   std::vector<double>(kAugmentedSize, 0.0)};
        const auto d = tanh_backward(up[0], out[0]);
        outer_acc(g.d_params.tensor("U3"), d, in.frames[0]);
        outer_acc(g.d_params.tensor("V3"), d, in.embedding);
        add_to(g.d_params.tensor("b3"), d);
        matvec_t_acc(params.tensor("U3"), d, g.d_inputs[0]);
        matvec_t_acc(params.tensor("V3"), d, g.d_embedding);
        return g;
      };
      break;
    }
    case AgentId::ImageToVideo: {
      check_inputs(1);
      trace.outputs = i2v_apply(params, inputs.frames[0], inputs.embedding, inputs.length);
      trace.vjp = [&params, in = std::move(inputs), out = trace.outputs,
                   check_upstream, p](const std::vector<FrameValues>& up) {
        check_upstream(up, out.size());
        AgentVjp g{params.zeros_like(), {}, std::vector<double>(kAugmentedSize, 0.0)};
        const Tensor& u = params.tensor("U4");
        const Tensor& v = params.tensor("V4");
        Tensor& du = g.d_params.tensor("U4");
        Tensor& dv = g.d_params.tensor("V4");
        Tensor& db = g.d_params.tensor("b4");
        // Reverse time: `carry` holds ∂L/∂f_t arriving from f_{t+1}.
        FrameValues carry(p, 0.0);
        for (std::size_t t = out.size() - 1; t >= 1; --t) {
          FrameValues total = up[t];
          for (std::size_t i = 0; i < p; ++i) total[i] += carry[i];
          const auto d = tanh_backward(total, out[t]);
          outer_acc(du, d, out[t - 1]);
          outer_acc(dv, d, in.embedding);
          add_to(db, d);
          matvec_t_acc(v, d, g.d_embedding);
          std::fill(carry.begin(), carry.end(), 0.0);
          matvec_t_acc(u, d, carry);
        }
        FrameValues d_f0 = up[0];
        for (std::size_t i = 0; i < p; ++i) d_f0[i] += carry[i];
        g.d_inputs.push_back(std::move(d_f0));
        return g;
      };
      break;
    }
    case AgentId::VideoConnect: {
      check_inputs(2);
      trace.outputs = connect_apply(params, inputs.frames[0], inputs.frames[1], inputs.embedding,
                                    inputs.length);
      trace.vjp = [&params, in = std::move(inputs), out = trace.outputs,
                   check_upstream, p](const std::vector<FrameValues>& up) {
        check_upstream(up, out.size());
        AgentVjp g{params.zeros_like(), {FrameValues(p, 0.0), FrameValues(p, 0.0)},
                   std::vector<double>(kAugmentedSize, 0.0)};
        const double denom = static_cast<double>(out.size() + 1);
        for (std::size_t m = 0; m < out.size(); ++m) {
          const double phase = static_cast<double>(m + 1) / denom;
          const auto d = tanh_backward(up[m], out[m]);
          outer_acc(g.d_params.tensor("Ua"), d, in.frames[0]);
          outer_acc(g.d_params.tensor("Ub"), d, in.frames[1]);
          outer_acc(g.d_params.tensor("V5"), d, in.embedding);
          add_to(g.d_params.tensor("c5"), d, phase);
          add_to(g.d_params.tensor("b5"), d);
          matvec_t_acc(params.tensor("Ua"), d, g.d_inputs[0]);
          matvec_t_acc(params.tensor("Ub"), d, g.d_inputs[1]);
          matvec_t_acc(params.tensor("V5"), d, g.d_embedding);
        }
        return g;
      };
      break;
    }
    case AgentId::PromptEnhance:
      throw Error(ErrorCode::NoParams, "the prompt-enhance agent has no parameters");
  }
  return trace;
}

}  // namespace sopforge
