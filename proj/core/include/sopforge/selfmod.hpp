// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-modulated end-to-end fine-tuning of an agent chain.
//
// Every agent i in the chain sees ẽ_i = [E_i(prompt) ; z_i]. The final output
// is scored against the target with MSE; gradients flow back through every
// agent into both θ_i and z_i. Each step first updates z_i, then scales the
// θ_i learning rate by α_i = ||z_i||₂ / n computed from the updated z_i.

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sopforge/agents.hpp"

namespace sopforge {

struct ModulationEmbedding {
  AgentId agent = AgentId::TextToImage;
  std::vector<double> values;

  friend bool operator==(const ModulationEmbedding&, const ModulationEmbedding&) = default;
};

using ParamSet = std::map<AgentId, AgentParams>;
using ModulationSet = std::map<AgentId, ModulationEmbedding>;

inline constexpr std::string_view kModToken = "[Mod]";
inline constexpr double kAlphaGuard = 10.0;

struct TrainConfig {
  std::size_t batch_size = 4;
  std::size_t epochs = 50;
  double eta_theta_default = 0.05;
  double eta_z_default = 0.01;
  std::map<AgentId, double> eta_theta;  // per-agent overrides
  std::map<AgentId, double> eta_z;
  std::size_t t_frames = kDefaultFrames;
  std::vector<AgentId> chain = {AgentId::TextToImage, AgentId::ImageToVideo};
  Seed64 seed = 0x5EED;
  bool shuffle = false;

  // Ablation switches. The defaults reproduce the full method.
  bool freeze_modulation = false;
  std::optional<double> fixed_alpha;
  /// Upper bound on α_i; disabled unless set (kAlphaGuard is the usual value).
  std::optional<double> alpha_clamp;

  double eta_theta_for(AgentId id) const;
  double eta_z_for(AgentId id) const;

  /// Throws InvalidConfig. A chain is text_to_image, any number of
  /// image_to_image, then image_to_video.
  void validate() const;
};

struct TrainSample {
  EnhancedPrompt prompt;
  Video target;
};

/// Everything the reverse pass needs. Holds closures that reference the
/// ParamSet given to forward_chain; that ParamSet must outlive the cache.
struct ChainCache {
  struct Stage {
    AgentId agent;
    AgentTrace trace;
  };
  std::vector<Stage> stages;
  std::size_t height = kDefaultHeight;
  std::size_t width = kDefaultWidth;

  const std::vector<FrameValues>& output() const;
};

struct GradientSet {
  std::map<AgentId, AgentParams> d_theta;
  std::map<AgentId, std::vector<double>> d_z;
};

struct TrainState {
  ParamSet params;
  ModulationSet modulation;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct HistoryRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double loss = 0.0;
  std::map<AgentId, double> alpha;

  friend bool operator==(const HistoryRecord&, const HistoryRecord&) = default;
};

struct TrainResult {
  TrainState state;
  std::vector<HistoryRecord> history;
};

/// z_i = E_i("[Mod]") for each agent of the chain.
ModulationSet init_modulation(std::span<const AgentId> chain);

/// Seeded parameters for the chain plus the initial modulation embeddings.
TrainState initial_state(const TrainConfig& cfg);

/// Optional jitter is added to every z_i for this pass only (candidate
/// generation); empty means none.
ChainCache forward_chain(const ParamSet& params, const ModulationSet& modulation,
                         const EnhancedPrompt& prompt, const TrainConfig& cfg,
                         std::span<const double> z_jitter = {});

/// Final output of the chain rendered as a video.
Video chain_video(const ChainCache& cache);

double loss_mse(const Video& output, const Video& target);
double loss_mse(const std::vector<FrameValues>& output, const Video& target);

/// Gradients of loss_mse(output, target) for one sample. Throws CacheIncomplete.
GradientSet backward_chain(const ChainCache& cache, const Video& target);

struct BatchGradients {
  double loss = 0.0;
  GradientSet grads;
};

/// Batch-mean loss and gradients, reduced in sample order.
BatchGradients batch_gradients(const TrainState& state, std::span<const TrainSample> batch,
                               const TrainConfig& cfg);

/// α = ||z||₂ / n. Throws InvalidN when n == 0.
double modulation_factor(const ModulationEmbedding& z, std::size_t n);

/// One optimizer step over the chain in chain order; returns the α_i used.
std::map<AgentId, double> sgd_step(TrainState& state, const GradientSet& grads,
                                   const TrainConfig& cfg);

using BatchObserver = std::function<void(const HistoryRecord&)>;

/// K epochs of mini-batch training. Throws EmptyDataset.
TrainResult train(std::span<const TrainSample> dataset, const TrainConfig& cfg,
                  TrainState initial, const BatchObserver& observer = {});

/// Mean per-sample loss over the dataset.
double dataset_loss(const TrainState& state, std::span<const TrainSample> dataset,
                    const TrainConfig& cfg);

/// Fixed seeded sample used by the gradient checker: first synthesized
/// prompt of cfg.seed with its oracle target.
TrainSample gradient_check_sample(const TrainConfig& cfg);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_coordinate;
  std::size_t coordinates = 0;
};

/// Analytic gradients against central differences over every θ entry and
/// every z coordinate of the chain.
GradCheckReport gradient_check_report(const TrainConfig& cfg, double epsilon);
/// Same check at an explicit state and sample.
GradCheckReport gradient_check_report(TrainState state, const TrainSample& sample,
                                      const TrainConfig& cfg, double epsilon);
double gradient_check(const TrainConfig& cfg, double epsilon);

}  // namespace sopforge
