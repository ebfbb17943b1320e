// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "sopforge/pipeline.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <utility>

namespace sopforge {

namespace {

template <typename Enum, std::size_t N>
Enum parse_name(std::string_view name, const std::array<std::pair<Enum, std::string_view>, N>& table,
                const char* what) {
  for (const auto& [value, text] : table) {
    if (text == name) return value;
  }
  throw Error(ErrorCode::BadRequest, "unknown " + std::string(what) + ": " + std::string(name));
}

template <typename Enum, std::size_t N>
std::string_view name_of(Enum v, const std::array<std::pair<Enum, std::string_view>, N>& table) {
  for (const auto& [value, text] : table) {
    if (value == v) return text;
  }
  return "unknown";
}

constexpr std::array<std::pair<TaskKind, std::string_view>, 6> kTaskNames = {{
    {TaskKind::TextToVideo, "text_to_video"},
    {TaskKind::ImageToVideo, "image_to_video"},
    {TaskKind::ExtendVideo, "extend_video"},
    {TaskKind::VideoEdit, "video_edit"},
    {TaskKind::ConnectVideos, "connect_videos"},
    {TaskKind::SimulateDigitalWorld, "simulate_digital_world"},
}};

constexpr std::array<std::pair<StageId, std::string_view>, 6> kStageNames = {{
    {StageId::Enhance, "enhance"},
    {StageId::FirstFrame, "first_frame"},
    {StageId::EditFrame, "edit_frame"},
    {StageId::GenerateVideo, "generate_video"},
    {StageId::Connect, "connect"},
    {StageId::Done, "done"},
}};

constexpr std::array<std::pair<RunStatus, std::string_view>, 4> kStatusNames = {{
    {RunStatus::AwaitingDecision, "awaiting_decision"},
    {RunStatus::Running, "running"},
    {RunStatus::Done, "done"},
    {RunStatus::Failed, "failed"},
}};

constexpr std::array<std::pair<HumanDecision, std::string_view>, 4> kDecisionNames = {{
    {HumanDecision::Approve, "approve"},
    {HumanDecision::Retry, "retry"},
    {HumanDecision::RouteToEdit, "route_to_edit"},
    {HumanDecision::Abort, "abort"},
}};

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

std::string_view task_name(TaskKind v) noexcept { return name_of(v, kTaskNames); }
std::string_view stage_name(StageId v) noexcept { return name_of(v, kStageNames); }
std::string_view status_name(RunStatus v) noexcept { return name_of(v, kStatusNames); }
std::string_view decision_name(HumanDecision v) noexcept { return name_of(v, kDecisionNames); }
TaskKind task_from_name(std::string_view n) { return parse_name(n, kTaskNames, "task"); }
StageId stage_from_name(std::string_view n) { return parse_name(n, kStageNames, "stage"); }
RunStatus status_from_name(std::string_view n) { return parse_name(n, kStatusNames, "status"); }
HumanDecision decision_from_name(std::string_view n) {
  return parse_name(n, kDecisionNames, "decision");
}

std::vector<StageId> stage_table(TaskKind task) {
  switch (task) {
    case TaskKind::TextToVideo:
    case TaskKind::SimulateDigitalWorld:
      return {StageId::Enhance, StageId::FirstFrame, StageId::GenerateVideo};
    case TaskKind::ImageToVideo:
      return {StageId::Enhance, StageId::GenerateVideo};
    case TaskKind::ExtendVideo:
      return {StageId::GenerateVideo};
    case TaskKind::VideoEdit:
      return {StageId::EditFrame, StageId::GenerateVideo};
    case TaskKind::ConnectVideos:
      return {StageId::Connect};
  }
  return {};
}

std::size_t PipelineConfig::transition_frames() const noexcept {
  if (connect_frames) return std::max<std::size_t>(1, *connect_frames);
  return t_frames > 3 ? t_frames - 2 : 1;
}

void PipelineRun::log(std::string event, std::string detail) {
  history.push_back(RunEvent{history.size(), now_ms(), stage, std::move(event), std::move(detail)});
}

AgentSuite AgentSuite::create(Seed64 seed) {
  AgentSuite suite;
  const std::array<AgentId, 4> roles = {AgentId::TextToImage, AgentId::ImageToImage,
                                        AgentId::ImageToVideo, AgentId::VideoConnect};
  for (AgentId id : roles) suite.params.emplace(id, init_params(id, seed));
  suite.modulation = init_modulation(roles);
  return suite;
}

void AgentSuite::adopt(const TrainState& trained) {
  for (const auto& [id, p] : trained.params) params.insert_or_assign(id, p);
  for (const auto& [id, z] : trained.modulation) modulation.insert_or_assign(id, z);
}

namespace {

void mismatch(TaskKind task, const std::string& why) {
  throw Error(ErrorCode::InputMismatch, std::string(task_name(task)) + ": " + why);
}

void check_frame_size(TaskKind task, const Frame& f) {
  if (f.height() != kDefaultHeight || f.width() != kDefaultWidth) {
    mismatch(task, "frames must be 8x8");
  }
}

void validate_inputs(TaskKind task, const RunInputs& in) {
  const bool needs_prompt = task == TaskKind::TextToVideo || task == TaskKind::ImageToVideo ||
                            task == TaskKind::VideoEdit || task == TaskKind::SimulateDigitalWorld;
  std::size_t videos = 0;
  bool needs_frame = false;
  switch (task) {
    case TaskKind::TextToVideo:
    case TaskKind::SimulateDigitalWorld:
      break;
    case TaskKind::ImageToVideo:
      needs_frame = true;
      break;
    case TaskKind::ExtendVideo:
    case TaskKind::VideoEdit:
      videos = 1;
      break;
    case TaskKind::ConnectVideos:
      videos = 2;
      break;
  }
  if (needs_prompt && !in.prompt) mismatch(task, "a prompt is required");
  if (in.prompt) (void)TextPrompt(*in.prompt);
  if (needs_frame != in.frame.has_value()) {
    mismatch(task, needs_frame ? "an input frame is required" : "an input frame is not accepted");
  }
  if (in.videos.size() != videos) {
    mismatch(task, "expected " + std::to_string(videos) + " input video(s), got " +
                       std::to_string(in.videos.size()));
  }
  if (in.frame) check_frame_size(task, *in.frame);
  for (const auto& v : in.videos) check_frame_size(task, v.frame(0));
}

std::uint64_t next_run_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1);
}

std::string make_run_id(const PipelineConfig& config) {
  char buf[24];
  const std::uint64_t mixed = config.seed ^ (next_run_counter() * kGoldenGamma) ^
                              static_cast<std::uint64_t>(now_ms());
  SplitMix64 gen(mixed);
  std::snprintf(buf, sizeof buf, "run-%016llx", static_cast<unsigned long long>(gen.next()));
  return buf;
}

std::optional<StageId> successor(TaskKind task, StageId stage) {
  if (stage == StageId::EditFrame) return StageId::GenerateVideo;
  const auto table = stage_table(task);
  auto it = std::find(table.begin(), table.end(), stage);
  if (it == table.end() || std::next(it) == table.end()) return std::nullopt;
  return *std::next(it);
}

const EnhancedPrompt* enhanced(const PipelineRun& run) {
  auto it = run.artifacts.find(StageId::Enhance);
  return it == run.artifacts.end() ? nullptr : std::get_if<EnhancedPrompt>(&it->second);
}

const Frame* frame_artifact(const PipelineRun& run, StageId stage) {
  auto it = run.artifacts.find(stage);
  return it == run.artifacts.end() ? nullptr : std::get_if<Frame>(&it->second);
}

AugmentedEmbedding embedding_for(const PipelineRun& run, const AgentSuite& agents, AgentId id) {
  auto z_it = agents.modulation.find(id);
  if (z_it == agents.modulation.end()) {
    throw Error(ErrorCode::ShapeMismatch, "no modulation for " + std::string(agent_name(id)));
  }
  std::vector<double> z = z_it->second.values;
  const int retries = run.retry_counts.count(run.stage) ? run.retry_counts.at(run.stage) : 0;
  if (retries > 0 && run.config.retry_jitter_sigma != 0.0) {
    const Seed64 seed = run.config.seed ^ hash_text(stage_name(run.stage)) ^
                        (static_cast<std::uint64_t>(retries) * kGoldenGamma);
    const auto jitter = rng_stream(seed, kModulationSize);
    for (std::size_t k = 0; k < z.size(); ++k) z[k] += jitter[k] * run.config.retry_jitter_sigma;
  }
  return augment(embed_text(agent_index(id), embedding_text(run)), z);
}

const AgentParams& agent(const AgentSuite& agents, AgentId id) {
  auto it = agents.params.find(id);
  if (it == agents.params.end()) {
    throw Error(ErrorCode::ShapeMismatch, "no parameters for " + std::string(agent_name(id)));
  }
  return it->second;
}

Artifact produce(const PipelineRun& run, const AgentSuite& agents) {
  switch (run.stage) {
    case StageId::Enhance: {
      EnhancedPrompt p = enhance_prompt(TextPrompt(*run.inputs.prompt));
      if (run.task == TaskKind::SimulateDigitalWorld) p.text += kDigitalWorldSuffix;
      return p;
    }
    case StageId::FirstFrame:
      return t2i_forward(agent(agents, AgentId::TextToImage),
                         embedding_for(run, agents, AgentId::TextToImage));
    case StageId::EditFrame: {
      const Frame* source = frame_artifact(run, StageId::FirstFrame);
      const Frame& src = source ? *source : first_frame(run.inputs.videos.at(0));
      return i2i_forward(agent(agents, AgentId::ImageToImage), src,
                         embedding_for(run, agents, AgentId::ImageToImage));
    }
    case StageId::GenerateVideo: {
      const Frame* seed = frame_artifact(run, StageId::EditFrame);
      if (!seed) seed = frame_artifact(run, StageId::FirstFrame);
      if (!seed && run.inputs.frame) seed = &*run.inputs.frame;
      if (!seed) seed = &last_frame(run.inputs.videos.at(0));
      return i2v_forward(agent(agents, AgentId::ImageToVideo), *seed,
                         embedding_for(run, agents, AgentId::ImageToVideo), run.config.t_frames);
    }
    case StageId::Connect: {
      const Video& a = run.inputs.videos.at(0);
      const Video& b = run.inputs.videos.at(1);
      const Video transition =
          connect_forward(agent(agents, AgentId::VideoConnect), last_frame(a), first_frame(b),
                          embedding_for(run, agents, AgentId::VideoConnect),
                          run.config.transition_frames());
      return concat_videos(concat_videos(a, transition), b);
    }
    case StageId::Done:
      break;
  }
  throw Error(ErrorCode::WrongStage, "nothing to execute at stage done");
}

}  // namespace

std::string embedding_text(const PipelineRun& run) {
  if (const auto* p = enhanced(run)) return p->text;
  if (run.inputs.prompt) return *run.inputs.prompt;
  switch (run.task) {
    case TaskKind::ExtendVideo: return "extend the video";
    case TaskKind::ConnectVideos: return "connect the videos";
    default: return std::string(task_name(run.task));
  }
}

PipelineRun create_run(TaskKind task, RunInputs inputs, PipelineConfig config,
                       std::string run_id) {
  validate_inputs(task, inputs);
  if (config.t_frames < 1) throw Error(ErrorCode::InvalidConfig, "t_frames must be >= 1");
  PipelineRun run;
  run.run_id = run_id.empty() ? make_run_id(config) : std::move(run_id);
  run.task = task;
  run.inputs = std::move(inputs);
  run.config = config;
  run.stage = stage_table(task).front();
  run.status = RunStatus::Running;
  run.log("created", std::string(task_name(task)));
  return run;
}

void execute_stage(PipelineRun& run, const AgentSuite& agents) {
  if (run.status != RunStatus::Running) {
    throw Error(ErrorCode::NotAwaitingDecision,
                "run is " + std::string(status_name(run.status)) + ", not running");
  }
  try {
    run.artifacts.insert_or_assign(run.stage, produce(run, agents));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AgentFailure && e.code() != ErrorCode::InvalidPixel) throw;
    run.status = RunStatus::Failed;
    run.failure = e.what();
    run.log("failed", e.what());
    throw Error(ErrorCode::AgentFailure, e.what());
  }
  run.status = RunStatus::AwaitingDecision;
  run.log("executed", "");
}

void apply_decision(PipelineRun& run, StageId stage, HumanDecision decision) {
  if (run.status != RunStatus::AwaitingDecision) {
    throw Error(ErrorCode::NotAwaitingDecision,
                "run is " + std::string(status_name(run.status)) + ", not awaiting a decision");
  }
  if (stage != run.stage) {
    throw Error(ErrorCode::WrongStage, "run is at " + std::string(stage_name(run.stage)) +
                                           ", not " + std::string(stage_name(stage)));
  }
  if (decision == HumanDecision::RouteToEdit && stage != StageId::FirstFrame) {
    throw Error(ErrorCode::WrongStage, "route_to_edit is only allowed at first_frame");
  }

  run.log("decision", std::string(decision_name(decision)));
  switch (decision) {
    case HumanDecision::Approve:
      if (auto next = successor(run.task, stage)) {
        run.stage = *next;
        run.status = RunStatus::Running;
      } else {
        run.stage = StageId::Done;
        run.status = RunStatus::Done;
        run.log("done", "");
      }
      break;
    case HumanDecision::Retry: {
      int& count = run.retry_counts[stage];
      if (count >= kMaxRetries) {
        run.status = RunStatus::Failed;
        run.failure = "retry limit reached at " + std::string(stage_name(stage));
        run.log("failed", run.failure);
        throw Error(ErrorCode::RetryExhausted, run.failure);
      }
      ++count;
      run.status = RunStatus::Running;
      break;
    }
    case HumanDecision::RouteToEdit:
      run.stage = StageId::EditFrame;
      run.status = RunStatus::Running;
      break;
    case HumanDecision::Abort:
      run.status = RunStatus::Failed;
      run.failure = "aborted";
      run.log("failed", "aborted");
      break;
  }
}

void auto_run(PipelineRun& run, const AgentSuite& agents) {
  while (run.status == RunStatus::Running) {
    execute_stage(run, agents);
    apply_decision(run, run.stage, HumanDecision::Approve);
  }
}

const Video& final_video(const PipelineRun& run) {
  if (run.status != RunStatus::Done) throw Error(ErrorCode::NotFound, "run is not done");
  const auto table = stage_table(run.task);
  auto it = run.artifacts.find(table.back());
  if (it == run.artifacts.end() || !std::holds_alternative<Video>(it->second)) {
    throw Error(ErrorCode::NotFound, "run has no final video");
  }
  return std::get<Video>(it->second);
}

std::vector<std::pair<StageId, HumanDecision>> logged_decisions(const PipelineRun& run) {
  std::vector<std::pair<StageId, HumanDecision>> out;
  for (const auto& e : run.history) {
    if (e.event == "decision") out.emplace_back(e.stage, decision_from_name(e.detail));
  }
  return out;
}

PipelineRun replay_run(const PipelineRun& logged, const AgentSuite& agents) {
  PipelineRun run = create_run(logged.task, logged.inputs, logged.config, logged.run_id);
  for (const auto& [stage, decision] : logged_decisions(logged)) {
    if (run.status == RunStatus::Running) execute_stage(run, agents);
    try {
      apply_decision(run, stage, decision);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RetryExhausted) throw;
    }
  }
  if (run.status == RunStatus::Running && logged.status == RunStatus::AwaitingDecision) {
    execute_stage(run, agents);
  }
  return run;
}

}  // namespace sopforge
