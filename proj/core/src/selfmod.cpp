// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "sopforge/selfmod.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace sopforge {

double TrainConfig::eta_theta_for(AgentId id) const {
  auto it = eta_theta.find(id);
  return it == eta_theta.end() ? eta_theta_default : it->second;
}

double TrainConfig::eta_z_for(AgentId id) const {
  auto it = eta_z.find(id);
  return it == eta_z.end() ? eta_z_default : it->second;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (epochs < 1) bad("epochs must be >= 1");
  if (t_frames < 1) bad("t_frames must be >= 1");
  if (chain.size() < 2) bad("chain needs at least text_to_image and image_to_video");
  if (chain.front() != AgentId::TextToImage) bad("chain must start with text_to_image");
  if (chain.back() != AgentId::ImageToVideo) bad("chain must end with image_to_video");
  std::set<AgentId> seen;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (!seen.insert(chain[i]).second) bad("chain agents must be distinct");
    if (i > 0 && i + 1 < chain.size() && chain[i] != AgentId::ImageToImage) {
      bad("only image_to_image may sit between the first and last agent");
    }
  }
  for (AgentId id : chain) {
    if (!(eta_theta_for(id) > 0.0) || !(eta_z_for(id) > 0.0)) bad("learning rates must be > 0");
  }
  if (fixed_alpha && !(*fixed_alpha >= 0.0)) bad("fixed_alpha must be >= 0");
  if (alpha_clamp && !(*alpha_clamp > 0.0)) bad("alpha_clamp must be > 0");
}

const std::vector<FrameValues>& ChainCache::output() const {
  if (stages.empty()) throw Error(ErrorCode::CacheIncomplete, "chain cache is empty");
  return stages.back().trace.outputs;
}

ModulationSet init_modulation(std::span<const AgentId> chain) {
  ModulationSet out;
  for (AgentId id : chain) {
    out[id] = ModulationEmbedding{id, embed_text(agent_index(id), kModToken)};
  }
  return out;
}

TrainState initial_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState state;
  for (AgentId id : cfg.chain) state.params.emplace(id, init_params(id, cfg.seed));
  state.modulation = init_modulation(cfg.chain);
  return state;
}

namespace {

const AgentParams& params_for(const ParamSet& params, AgentId id) {
  auto it = params.find(id);
  if (it == params.end()) {
    throw Error(ErrorCode::ShapeMismatch, "missing parameters for " + std::string(agent_name(id)));
  }
  return it->second;
}

const ModulationEmbedding& modulation_for(const ModulationSet& zs, AgentId id) {
  auto it = zs.find(id);
  if (it == zs.end() || it->second.values.size() != kModulationSize) {
    throw Error(ErrorCode::ShapeMismatch, "missing modulation for " + std::string(agent_name(id)));
  }
  return it->second;
}

std::size_t side_for(std::size_t pixels, std::size_t preferred) {
  return pixels == preferred * preferred ? preferred : pixels;
}

}  // namespace

ChainCache forward_chain(const ParamSet& params, const ModulationSet& modulation,
                         const EnhancedPrompt& prompt, const TrainConfig& cfg,
                         std::span<const double> z_jitter) {
  cfg.validate();
  if (!z_jitter.empty() && z_jitter.size() != kModulationSize) {
    throw Error(ErrorCode::LengthMismatch, "modulation jitter must have 16 values");
  }
  ChainCache cache;
  const std::size_t pixels = params_for(params, cfg.chain.front()).pixels();
  cache.height = side_for(pixels, kDefaultHeight);
  cache.width = pixels / cache.height;

  for (AgentId id : cfg.chain) {
    const AgentParams& theta = params_for(params, id);
    std::vector<double> z = modulation_for(modulation, id).values;
    for (std::size_t k = 0; k < z_jitter.size(); ++k) z[k] += z_jitter[k];

    AgentInputs inputs;
    inputs.embedding = augment(embed_text(agent_index(id), prompt.text), z).values;
    if (!cache.stages.empty()) inputs.frames = {cache.stages.back().trace.outputs.front()};
    if (id == AgentId::ImageToVideo) inputs.length = cfg.t_frames;
    cache.stages.push_back({id, forward_jacobians(theta, std::move(inputs))});
  }
  return cache;
}

Video chain_video(const ChainCache& cache) {
  std::vector<Frame> frames;
  for (const auto& f : cache.output()) {
    for (double v : f) {
      if (!std::isfinite(v)) throw Error(ErrorCode::AgentFailure, "chain produced non-finite output");
    }
    frames.push_back(frame_from_values(f, cache.height, cache.width));
  }
  return Video(std::move(frames));
}

double loss_mse(const std::vector<FrameValues>& output, const Video& target) {
  if (output.size() != target.length()) {
    throw Error(ErrorCode::DimensionMismatch, "output and target differ in length");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < output.size(); ++t) {
    const auto px = target.frame(t).pixels();
    if (output[t].size() != px.size()) {
      throw Error(ErrorCode::DimensionMismatch, "output and target differ in frame size");
    }
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double d = output[t][i] - static_cast<double>(px[i]);
      sum += d * d;
    }
    n += px.size();
  }
  return sum / static_cast<double>(n);
}

double loss_mse(const Video& output, const Video& target) {
  if (!output.same_shape(target)) {
    throw Error(ErrorCode::DimensionMismatch, "output and target differ in shape");
  }
  std::vector<FrameValues> values;
  values.reserve(output.length());
  for (const auto& f : output.frames()) values.push_back(flatten(f));
  return loss_mse(values, target);
}

GradientSet backward_chain(const ChainCache& cache, const Video& target) {
  if (cache.stages.empty()) throw Error(ErrorCode::CacheIncomplete, "chain cache is empty");
  for (const auto& s : cache.stages) {
    if (!s.trace.vjp || s.trace.outputs.empty()) {
      throw Error(ErrorCode::CacheIncomplete,
                  "no reverse pass recorded for " + std::string(agent_name(s.agent)));
    }
  }
  const auto& out = cache.output();
  if (out.size() != target.length()) {
    throw Error(ErrorCode::DimensionMismatch, "output and target differ in length");
  }
  const double scale = 2.0 / static_cast<double>(target.length() * target.frame(0).size());
  std::vector<FrameValues> upstream(out.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const auto px = target.frame(t).pixels();
    if (px.size() != out[t].size()) {
      throw Error(ErrorCode::DimensionMismatch, "output and target differ in frame size");
    }
    upstream[t].resize(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
      upstream[t][i] = scale * (out[t][i] - static_cast<double>(px[i]));
    }
  }

  GradientSet grads;
  for (auto it = cache.stages.rbegin(); it != cache.stages.rend(); ++it) {
    AgentVjp vjp = it->trace.vjp(upstream);
    // Only the modulation half of ∂L/∂ẽ is trainable.
    grads.d_z[it->agent] = std::vector<double>(vjp.d_embedding.begin() + kEmbeddingSize,
                                               vjp.d_embedding.end());
    grads.d_theta.emplace(it->agent, std::move(vjp.d_params));
    if (!vjp.d_inputs.empty()) upstream = {std::move(vjp.d_inputs.front())};
  }
  return grads;
}

namespace {

void accumulate(GradientSet& into, const GradientSet& g) {
  for (const auto& [id, dp] : g.d_theta) {
    auto it = into.d_theta.find(id);
    if (it == into.d_theta.end()) {
      into.d_theta.emplace(id, dp);
      continue;
    }
    auto& dst = it->second.tensors();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      for (std::size_t i = 0; i < dst[k].values.size(); ++i) {
        dst[k].values[i] += dp.tensors()[k].values[i];
      }
    }
  }
  for (const auto& [id, dz] : g.d_z) {
    auto& dst = into.d_z[id];
    if (dst.empty()) {
      dst = dz;
    } else {
      for (std::size_t i = 0; i < dz.size(); ++i) dst[i] += dz[i];
    }
  }
}

void scale_grads(GradientSet& g, double s) {
  for (auto& [id, dp] : g.d_theta) {
    for (auto& t : dp.tensors()) {
      for (auto& v : t.values) v *= s;
    }
  }
  for (auto& [id, dz] : g.d_z) {
    for (auto& v : dz) v *= s;
  }
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

BatchGradients batch_gradients(const TrainState& state, std::span<const TrainSample> batch,
                               const TrainConfig& cfg) {
  if (batch.empty()) throw Error(ErrorCode::EmptyDataset, "empty batch");
  BatchGradients out;
  for (const auto& sample : batch) {
    const auto cache = forward_chain(state.params, state.modulation, sample.prompt, cfg);
    out.loss += loss_mse(cache.output(), sample.target);
    accumulate(out.grads, backward_chain(cache, sample.target));
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  scale_grads(out.grads, inv);
  return out;
}

double modulation_factor(const ModulationEmbedding& z, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidN, "modulation factor needs n >= 1");
  return l2_norm(z.values) / static_cast<double>(n);
}

std::map<AgentId, double> sgd_step(TrainState& state, const GradientSet& grads,
                                   const TrainConfig& cfg) {
  const std::size_t n = cfg.chain.size();
  std::map<AgentId, double> alphas;
  for (AgentId id : cfg.chain) {
    auto p_it = state.params.find(id);
    auto z_it = state.modulation.find(id);
    auto dp_it = grads.d_theta.find(id);
    auto dz_it = grads.d_z.find(id);
    if (p_it == state.params.end() || z_it == state.modulation.end() ||
        dp_it == grads.d_theta.end() || dz_it == grads.d_z.end()) {
      throw Error(ErrorCode::ShapeMismatch, "no state or gradient for " +
                                                std::string(agent_name(id)));
    }
    AgentParams& theta = p_it->second;
    std::vector<double>& z = z_it->second.values;
    const AgentParams& d_theta = dp_it->second;
    const std::vector<double>& d_z = dz_it->second;
    if (!theta.same_shape(d_theta) || z.size() != d_z.size()) {
      throw Error(ErrorCode::ShapeMismatch, "gradient shape mismatch for " +
                                                std::string(agent_name(id)));
    }

    // (1) z first.
    if (!cfg.freeze_modulation) {
      const double eta_z = cfg.eta_z_for(id);
      for (std::size_t k = 0; k < z.size(); ++k) {
        const double delta = eta_z * d_z[k];
        if (delta != 0.0) z[k] = to_storage(z[k] - delta);
      }
    }
    // (2) α from the updated z.
    double alpha = cfg.fixed_alpha ? *cfg.fixed_alpha : modulation_factor(z_it->second, n);
    if (cfg.alpha_clamp) alpha = std::min(alpha, *cfg.alpha_clamp);
    alphas[id] = alpha;
    // (3) θ with the dynamic learning rate.
    const double step = alpha * cfg.eta_theta_for(id);
    if (step != 0.0) {
      for (std::size_t k = 0; k < theta.tensors().size(); ++k) {
        auto& values = theta.tensors()[k].values;
        const auto& g = d_theta.tensors()[k].values;
        for (std::size_t i = 0; i < values.size(); ++i) {
          if (g[i] != 0.0) values[i] = to_storage(values[i] - step * g[i]);
        }
      }
    }
  }
  return alphas;
}

TrainResult train(std::span<const TrainSample> dataset, const TrainConfig& cfg,
                  TrainState initial, const BatchObserver& observer) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training dataset is empty");
  TrainResult result{std::move(initial), {}};

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainSample> batch;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      SplitMix64 gen(cfg.seed ^ (epoch * kGoldenGamma));
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[gen.next() % i]);
      }
    }
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      const auto bg = batch_gradients(result.state, batch, cfg);
      HistoryRecord rec{epoch, ++batch_index, bg.loss, sgd_step(result.state, bg.grads, cfg)};
      if (observer) observer(rec);
      result.history.push_back(std::move(rec));
    }
  }
  return result;
}

double dataset_loss(const TrainState& state, std::span<const TrainSample> dataset,
                    const TrainConfig& cfg) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "dataset is empty");
  double sum = 0.0;
  for (const auto& s : dataset) {
    sum += loss_mse(forward_chain(state.params, state.modulation, s.prompt, cfg).output(), s.target);
  }
  return sum / static_cast<double>(dataset.size());
}

TrainSample gradient_check_sample(const TrainConfig& cfg) {
  const auto prompt = synthesize_prompts(cfg.seed, 1).front();
  const OracleParams oracle{prompt_vector(prompt.text()), false};
  return TrainSample{enhance_prompt(prompt), oracle_render(oracle, cfg.t_frames)};
}

GradCheckReport gradient_check_report(const TrainConfig& cfg, double epsilon) {
  return gradient_check_report(initial_state(cfg), gradient_check_sample(cfg), cfg, epsilon);
}

GradCheckReport gradient_check_report(TrainState state, const TrainSample& sample,
                                      const TrainConfig& cfg, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must be > 0");
  cfg.validate();
  const auto analytic =
      backward_chain(forward_chain(state.params, state.modulation, sample.prompt, cfg),
                     sample.target);

  auto loss = [&] {
    return loss_mse(forward_chain(state.params, state.modulation, sample.prompt, cfg).output(),
                    sample.target);
  };
  GradCheckReport report;
  auto check = [&](double& coord, double grad, const std::string& label) {
    const double saved = coord;
    coord = saved + epsilon;
    const double up = loss();
    coord = saved - epsilon;
    const double down = loss();
    coord = saved;
    const double fd = (up - down) / (2.0 * epsilon);
    const double rel = std::abs(grad - fd) / std::max({std::abs(grad), std::abs(fd), 1e-8});
    ++report.coordinates;
    if (report.worst_coordinate.empty() || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_coordinate = label;
    }
  };

  for (AgentId id : cfg.chain) {
    auto& tensors = state.params.at(id).tensors();
    const auto& grad_tensors = analytic.d_theta.at(id).tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      for (std::size_t i = 0; i < tensors[k].values.size(); ++i) {
        check(tensors[k].values[i], grad_tensors[k].values[i],
              std::string(agent_name(id)) + "." + tensors[k].name + "[" + std::to_string(i) + "]");
      }
    }
    auto& z = state.modulation.at(id).values;
    for (std::size_t i = 0; i < z.size(); ++i) {
      check(z[i], analytic.d_z.at(id)[i],
            std::string(agent_name(id)) + ".z[" + std::to_string(i) + "]");
    }
  }
  return report;
}

double gradient_check(const TrainConfig& cfg, double epsilon) {
  return gradient_check_report(cfg, epsilon).max_relative_error;
}

}  // namespace sopforge
