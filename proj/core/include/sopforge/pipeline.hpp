// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Staged task runner with a human checkpoint after every stage.
//
// Stage tables:
//   text_to_video, simulate_digital_world:
//       enhance -> first_frame -> [edit_frame] -> generate_video -> done
//   image_to_video:  enhance -> generate_video -> done
//   extend_video:    generate_video -> done
//   video_edit:      edit_frame -> generate_video -> done
//   connect_videos:  connect -> done
// edit_frame on the text-to-video paths is only entered by route_to_edit at
// first_frame. Each stage may be retried at most three times.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sopforge/agents.hpp"
#include "sopforge/selfmod.hpp"

namespace sopforge {

enum class TaskKind {
  TextToVideo,
  ImageToVideo,
  ExtendVideo,
  VideoEdit,
  ConnectVideos,
  SimulateDigitalWorld,
};

enum class StageId { Enhance, FirstFrame, EditFrame, GenerateVideo, Connect, Done };

enum class RunStatus { AwaitingDecision, Running, Done, Failed };

enum class HumanDecision { Approve, Retry, RouteToEdit, Abort };

inline constexpr int kMaxRetries = 3;
inline constexpr std::string_view kDigitalWorldSuffix = ". In digital world style";

std::string_view task_name(TaskKind v) noexcept;
std::string_view stage_name(StageId v) noexcept;
std::string_view status_name(RunStatus v) noexcept;
std::string_view decision_name(HumanDecision v) noexcept;
// Parsers throw BadRequest on unknown names.
TaskKind task_from_name(std::string_view name);
StageId stage_from_name(std::string_view name);
RunStatus status_from_name(std::string_view name);
HumanDecision decision_from_name(std::string_view name);

/// Stages a run passes through when every checkpoint is approved.
std::vector<StageId> stage_table(TaskKind task);

struct RunInputs {
  std::optional<std::string> prompt;
  std::optional<Frame> frame;
  std::vector<Video> videos;

  friend bool operator==(const RunInputs&, const RunInputs&) = default;
};

struct PipelineConfig {
  Seed64 seed = 7;
  std::size_t t_frames = kDefaultFrames;
  /// Transition length for connect_videos; defaults to max(1, t_frames - 2).
  std::optional<std::size_t> connect_frames;
  /// Scale of the modulation jitter applied on retried stages.
  double retry_jitter_sigma = 0.1;

  std::size_t transition_frames() const noexcept;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

using Artifact = std::variant<EnhancedPrompt, Frame, Video>;

struct RunEvent {
  std::size_t seq = 0;
  std::int64_t timestamp_ms = 0;
  StageId stage = StageId::Done;
  std::string event;
  std::string detail;

  friend bool operator==(const RunEvent&, const RunEvent&) = default;
};

struct PipelineRun {
  std::string run_id;
  TaskKind task = TaskKind::TextToVideo;
  RunInputs inputs;
  PipelineConfig config;
  StageId stage = StageId::Done;
  std::map<StageId, int> retry_counts;
  std::map<StageId, Artifact> artifacts;
  RunStatus status = RunStatus::Running;
  std::vector<RunEvent> history;
  std::string failure;

  void log(std::string event, std::string detail);
  friend bool operator==(const PipelineRun&, const PipelineRun&) = default;
};

/// Parameters and modulation embeddings for every agent that has them.
struct AgentSuite {
  ParamSet params;
  ModulationSet modulation;

  static AgentSuite create(Seed64 seed);
  /// Overrides the chain agents with trained state, keeping the rest.
  void adopt(const TrainState& trained);
};

/// Throws InputMismatch or EmptyPrompt.
PipelineRun create_run(TaskKind task, RunInputs inputs, PipelineConfig config,
                       std::string run_id = {});

/// Produces the current stage's artifact and parks the run at its checkpoint.
/// A non-finite agent output fails the run and rethrows AgentFailure.
void execute_stage(PipelineRun& run, const AgentSuite& agents);

/// Throws WrongStage or NotAwaitingDecision without touching the run. A
/// fourth retry fails the run and then throws RetryExhausted.
void apply_decision(PipelineRun& run, StageId stage, HumanDecision decision);

/// Executes and approves every stage until the run is done or failed.
void auto_run(PipelineRun& run, const AgentSuite& agents);

/// Result of a finished run. Throws NotFound unless the run is done.
const Video& final_video(const PipelineRun& run);

/// Decisions in the order they were applied.
std::vector<std::pair<StageId, HumanDecision>> logged_decisions(const PipelineRun& run);

/// Re-executes a fresh copy of `logged` applying the same decisions.
PipelineRun replay_run(const PipelineRun& logged, const AgentSuite& agents);

/// Text used to embed prompts for the agents of this run.
std::string embedding_text(const PipelineRun& run);

}  // namespace sopforge
