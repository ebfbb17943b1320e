// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// sopforge: headless front end for runs, training, gradient checks, metrics
// and the HTTP service.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sopforge/datafree.hpp"
#include "sopforge/metrics.hpp"
#include "sopforge/pipeline.hpp"
#include "sopforge/selfmod.hpp"
#include "sopforge/server.hpp"
#include "sopforge/store.hpp"

namespace {

using nlohmann::json;
using namespace sopforge;
namespace fs = std::filesystem;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr double kGradTolerance = 1e-4;

json number(double v) { return std::isfinite(v) ? canonical_number(v) : json(nullptr); }

/// Metric block for a video; fields that need missing context are null.
json metrics_json(const Video& v, const std::optional<std::string>& prompt,
                  const std::optional<Frame>& input_frame, const std::optional<Video>& ref,
                  const std::optional<Video>& prev, const std::optional<Video>& next) {
  json j;
  j["video_ti"] = prompt ? number(video_ti(*prompt, input_frame, v)) : json(nullptr);
  j["tcon"] = ref ? number(tcon(*ref, v)) : json(nullptr);
  j["tmean"] = prev && next ? number(tmean(*prev, v, *next)) : json(nullptr);
  j["dynamic_degree"] = number(dynamic_degree(v));
  j["motion_smoothness"] = number(motion_smoothness(v));
  return j;
}

// ---------------------------------------------------------------------------
// run

struct RunArgs {
  std::string task;
  std::string prompt;
  std::vector<std::string> inputs;
  std::string out;
  std::string checkpoint;
  std::uint64_t seed = 7;
  std::size_t frames = kDefaultFrames;
  bool automatic = false;
};

HumanDecision ask_decision(const PipelineRun& run) {
  for (;;) {
    std::cerr << "[" << stage_name(run.stage) << "] retries used "
              << (run.retry_counts.count(run.stage) ? run.retry_counts.at(run.stage) : 0) << "/" << kMaxRetries
              << ". (a)pprove, (r)etry, (e)dit" << (run.stage == StageId::FirstFrame ? "" : " [first_frame only]")
              << ", (q)uit: " << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) return HumanDecision::Abort;
    if (line == "a" || line == "approve") return HumanDecision::Approve;
    if (line == "r" || line == "retry") return HumanDecision::Retry;
    if (line == "e" || line == "edit") return HumanDecision::RouteToEdit;
    if (line == "q" || line == "quit" || line == "abort") return HumanDecision::Abort;
  }
}

void describe_artifact(const PipelineRun& run) {
  auto it = run.artifacts.find(run.stage);
  if (it == run.artifacts.end()) return;
  if (const auto* p = std::get_if<EnhancedPrompt>(&it->second)) {
    std::cerr << "  enhanced prompt: " << p->text << "\n";
  } else if (const auto* v = std::get_if<Video>(&it->second)) {
    std::cerr << "  video: " << v->length() << " frames, dynamic_degree " << dynamic_degree(*v)
              << ", motion_smoothness " << motion_smoothness(*v) << "\n";
  } else {
    std::cerr << "  frame: 8x8\n";
  }
}

int cmd_run(const RunArgs& a) {
  TaskKind task;
  RunInputs inputs;
  try {
    task = task_from_name(a.task);
    if (!a.prompt.empty()) inputs.prompt = a.prompt;
    for (const auto& path : a.inputs) {
      Video v = load_tvid(path);
      if (task == TaskKind::ImageToVideo) {
        inputs.frame = v.frame(0);
      } else {
        inputs.videos.push_back(std::move(v));
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  PipelineConfig cfg;
  cfg.seed = a.seed;
  cfg.t_frames = a.frames;
  AgentSuite agents = AgentSuite::create(a.seed);
  PipelineRun run;
  try {
    if (!a.checkpoint.empty()) agents.adopt(read_checkpoint(a.checkpoint).state);
    run = create_run(task, inputs, cfg, "run-cli");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool usage = e.code() == ErrorCode::InputMismatch || e.code() == ErrorCode::EmptyPrompt;
    return usage ? kExitUsage : kExitFailure;
  }

  try {
    if (a.automatic) {
      auto_run(run, agents);
    } else {
      while (run.status == RunStatus::Running) {
        execute_stage(run, agents);
        describe_artifact(run);
        for (;;) {
          try {
            apply_decision(run, run.stage, ask_decision(run));
            break;
          } catch (const Error& e) {
            if (e.code() != ErrorCode::WrongStage) throw;
            std::cerr << "  " << e.what() << "\n";
          }
        }
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  if (run.status != RunStatus::Done) {
    std::cerr << "run " << status_name(run.status) << ": " << run.failure << "\n";
    return kExitFailure;
  }

  const Video& result = final_video(run);
  if (!a.out.empty()) save_tvid(result, a.out);

  std::optional<std::string> prompt_text;
  if (auto it = run.artifacts.find(StageId::Enhance); it != run.artifacts.end()) {
    prompt_text = std::get<EnhancedPrompt>(it->second).text;
  } else if (inputs.prompt) {
    prompt_text = inputs.prompt;
  }
  std::optional<Video> ref, prev, next;
  if (task == TaskKind::ExtendVideo || task == TaskKind::VideoEdit) ref = inputs.videos.at(0);
  if (task == TaskKind::ConnectVideos) {
    prev = inputs.videos.at(0);
    next = inputs.videos.at(1);
  }
  json out;
  out["task"] = std::string(task_name(task));
  out["frames"] = result.length();
  out["metrics"] = metrics_json(result, prompt_text, inputs.frame, ref, prev, next);
  std::cout << out.dump(2) << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::size_t iterations = 3;
  std::size_t prompts = 16;
  std::size_t epochs = 50;
  std::string hitl = "auto-oracle";
  std::uint64_t seed = 0x5EED;
  std::string out;
  std::string resume;
};

void terminal_review(std::vector<ReviewItem*>& pending) {
  for (ReviewItem* item : pending) {
    const CandidateSet& set = item->candidate_set;
    std::cerr << "review " << item->item_id << ": \"" << set.prompt.text << "\"\n";
    for (std::size_t c = 0; c < set.candidates.size(); ++c) {
      std::cerr << "  [" << c << "] dynamic_degree " << dynamic_degree(set.candidates[c]) << ", smoothness "
                << motion_smoothness(set.candidates[c]) << "\n";
    }
    for (const auto& [label, r] : set.rankings) {
      std::cerr << "  " << label << " ranks:";
      for (auto i : r.order()) std::cerr << ' ' << i;
      std::cerr << "\n";
    }
    for (;;) {
      std::cerr << "select 0-" << set.candidates.size() - 1 << " or (d)iscard: " << std::flush;
      std::string line;
      if (!std::getline(std::cin, line)) throw Error(ErrorCode::Cancelled, "review input closed");
      try {
        if (line == "d" || line == "discard") {
          resolve_review(*item, ReviewDecision::discard());
        } else {
          resolve_review(*item, ReviewDecision::accept(std::stoul(line)));
        }
        break;
      } catch (const std::exception& e) {
        std::cerr << "  " << e.what() << "\n";
      }
    }
  }
}

int cmd_train(const TrainArgs& a) {
  DataFreeConfig cfg;
  cfg.iterations = a.iterations;
  cfg.prompts_per_iter = a.prompts;
  cfg.train_cfg.seed = a.seed;
  cfg.train_cfg.epochs = a.epochs;
  try {
    std::string mode = a.hitl;
    for (char& c : mode) c = c == '-' ? '_' : c;
    cfg.hitl_mode = hitl_mode_from_name(mode);
    cfg.validate();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    std::optional<TrainState> initial;
    if (!a.resume.empty()) initial = read_checkpoint(a.resume).state;
    const fs::path out_dir = a.out;
    if (!a.out.empty()) {
      fs::create_directories(out_dir);
      fs::remove(out_dir / "history.jsonl");
    }
    BatchObserver on_batch;
    if (!a.out.empty()) on_batch = [&](const HistoryRecord& r) { append_history(r, out_dir / "history.jsonl"); };

    DataFreeResult res = datafree_train(cfg, std::move(initial), terminal_review, {}, on_batch);
    if (!a.out.empty()) {
      write_checkpoint(res.state, cfg.train_cfg.chain, {cfg.iterations, cfg.train_cfg.epochs, a.seed}, out_dir);
    }
    json report;
    report["seed"] = a.seed;
    report["hitl"] = std::string(hitl_mode_name(cfg.hitl_mode));
    report["total_records"] = res.dataset.size();
    report["iterations"] = json::array();
    for (const auto& r : res.reports) report["iterations"].push_back(report_to_json(r));
    std::cout << report.dump(2) << std::endl;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck

int cmd_gradcheck(double eps) {
  const std::vector<std::vector<AgentId>> chains = {
      {AgentId::TextToImage, AgentId::ImageToVideo},
      {AgentId::TextToImage, AgentId::ImageToImage, AgentId::ImageToVideo}};
  json out;
  out["epsilon"] = eps;
  out["tolerance"] = kGradTolerance;
  out["chains"] = json::array();
  bool pass = true;
  for (const auto& chain : chains) {
    TrainConfig cfg;
    cfg.chain = chain;
    const GradCheckReport rep = gradient_check_report(cfg, eps);
    json names = json::array();
    for (AgentId id : chain) names.push_back(std::string(agent_name(id)));
    out["chains"].push_back({{"chain", names},
                             {"max_relative_error", rep.max_relative_error},
                             {"worst_coordinate", rep.worst_coordinate},
                             {"coordinates", rep.coordinates}});
    pass = pass && rep.max_relative_error < kGradTolerance;
  }
  out["pass"] = pass;
  std::cout << out.dump(2) << std::endl;
  return pass ? 0 : kExitFailure;
}

// ---------------------------------------------------------------------------
// metrics

struct MetricsArgs {
  std::string video, prompt, ref, prev, next, frame;
};

int cmd_metrics(const MetricsArgs& a) {
  try {
    auto opt_video = [](const std::string& path) {
      return path.empty() ? std::optional<Video>{} : std::optional<Video>{load_tvid(path)};
    };
    const Video v = load_tvid(a.video);
    std::optional<Frame> frame;
    if (!a.frame.empty()) frame = load_tvid(a.frame).frame(0);
    const auto prompt = a.prompt.empty() ? std::optional<std::string>{} : std::optional<std::string>{a.prompt};
    std::cout << metrics_json(v, prompt, frame, opt_video(a.ref), opt_video(a.prev), opt_video(a.next)).dump(2)
              << std::endl;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// serve

int cmd_serve(std::string host, int port, std::string data_dir) {
  if (const char* env = std::getenv("SOPFORGE_DATA_DIR"); env && *env) data_dir = env;
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ServerOptions opts;
  opts.host = host;
  opts.port = port;
  opts.data_dir = data_dir;
  Server server(opts);
  int bound = 0;
  try {
    bound = server.bind();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  std::cout << "listening on http://" << host << ":" << bound << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  // listen() also returns if the server stops for another reason; wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sopforge: staged toy video generation with self-modulated training"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one task through its stages");
  run_cmd->add_option("--task", run.task, "text_to_video, image_to_video, extend_video, video_edit, "
                                          "connect_videos or simulate_digital_world")
      ->required();
  run_cmd->add_option("--prompt", run.prompt, "Text prompt");
  run_cmd->add_option("--input", run.inputs, "Input TVID file (repeat for connect_videos)");
  run_cmd->add_option("--out", run.out, "Write the final video here");
  run_cmd->add_option("--seed", run.seed, "Agent parameter seed")->capture_default_str();
  run_cmd->add_option("--frames", run.frames, "Frames per generated video")
      ->capture_default_str()
      ->check(CLI::Range(1, 64));
  run_cmd->add_option("--checkpoint", run.checkpoint, "Use trained weights from a checkpoint directory");
  run_cmd->add_flag("--auto", run.automatic, "Approve every checkpoint without asking");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Data-free self-modulated training");
  train_cmd->add_option("--iterations", train.iterations, "Outer iterations N")
      ->capture_default_str()
      ->check(CLI::Range(1, 1000));
  train_cmd->add_option("--prompts", train.prompts, "Prompts per iteration S")
      ->capture_default_str()
      ->check(CLI::Range(1, 256));
  train_cmd->add_option("--epochs", train.epochs, "Epochs per iteration")
      ->capture_default_str()
      ->check(CLI::Range(1, 100000));
  train_cmd->add_option("--hitl", train.hitl, "auto-oracle, auto-discard or interactive")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto-oracle", "auto-discard", "interactive"}));
  train_cmd->add_option("--seed", train.seed, "Training seed")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Checkpoint directory (manifest.json, weights.bin, history.jsonl)");
  train_cmd->add_option("--resume", train.resume, "Start from this checkpoint directory");

  double eps = 1e-4;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
  grad_cmd->add_option("--eps", eps, "Finite-difference step")->capture_default_str()->check(CLI::PositiveNumber);

  MetricsArgs metrics;
  auto* metrics_cmd = app.add_subcommand("metrics", "Metrics of a TVID video as JSON");
  metrics_cmd->add_option("--video", metrics.video, "Video to score")->required();
  metrics_cmd->add_option("--prompt", metrics.prompt, "Prompt for video_ti");
  metrics_cmd->add_option("--frame", metrics.frame, "Input frame TVID for video_ti");
  metrics_cmd->add_option("--ref", metrics.ref, "Reference input video for tcon");
  metrics_cmd->add_option("--prev", metrics.prev, "Preceding video for tmean");
  metrics_cmd->add_option("--next", metrics.next, "Following video for tmean");

  std::string host = "127.0.0.1";
  int port = 7700;
  std::string data_dir;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "Port, 0 picks a free one")->capture_default_str()->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--data-dir", data_dir, "Persist runs and training here (SOPFORGE_DATA_DIR overrides)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*run_cmd) return cmd_run(run);
  if (*train_cmd) return cmd_train(train);
  if (*grad_cmd) return cmd_gradcheck(eps);
  if (*metrics_cmd) return cmd_metrics(metrics);
  if (*serve_cmd) return cmd_serve(host, port, data_dir);
  return kExitUsage;
}
