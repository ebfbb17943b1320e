// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "sopforge/server.hpp"

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sopforge/datafree.hpp"
#include "sopforge/pipeline.hpp"
#include "sopforge/store.hpp"

namespace sopforge {

namespace fs = std::filesystem;
using nlohmann::json;

int http_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyPrompt:
      return 422;
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::WrongStage:
    case ErrorCode::NotAwaitingDecision:
    case ErrorCode::RetryExhausted:
    case ErrorCode::AlreadyResolved:
    case ErrorCode::TrainingActive:
    case ErrorCode::PendingHumanReviews:
      return 409;
    case ErrorCode::JudgeUnavailable:
      return 502;
    case ErrorCode::Cancelled:
      return 503;
    case ErrorCode::AgentFailure:
    case ErrorCode::CacheIncomplete:
    case ErrorCode::ManifestMismatch:
    case ErrorCode::CorruptRecord:
    case ErrorCode::Io:
      return 500;
    default:
      return 400;
  }
}

namespace {

constexpr std::size_t kMaxFrames = 64;
constexpr std::size_t kMaxIterations = 100;
constexpr std::size_t kMaxEpochs = 10000;

HttpResponse json_response(int status, const json& body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, std::string_view code, std::string_view message) {
  return json_response(status, {{"http_status", status}, {"code", code}, {"message", message}});
}

HttpResponse error_response(const Error& e) {
  return error_response(http_status_for(e.code()), error_code_name(e.code()), e.what());
}

[[noreturn]] void bad(ErrorCode code, const std::string& why) { throw Error(code, why); }

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') ++j;
    if (j > i) parts.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return parts;
}

std::map<std::string, std::string> parse_query(std::string_view q) {
  std::map<std::string, std::string> out;
  while (!q.empty()) {
    const auto amp = q.find('&');
    const std::string_view kv = q.substr(0, amp);
    const auto eq = kv.find('=');
    out[std::string(kv.substr(0, eq))] = eq == std::string_view::npos ? "" : std::string(kv.substr(eq + 1));
    if (amp == std::string_view::npos) break;
    q.remove_prefix(amp + 1);
  }
  return out;
}

json parse_object(std::string_view body, ErrorCode code, bool allow_empty) {
  if (allow_empty && body.find_first_not_of(" \t\r\n") == std::string_view::npos) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) bad(code, "request body must be a JSON object");
  return j;
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, ErrorCode code) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) bad(code, "unknown field: " + key);
  }
}

std::uint64_t get_unsigned(const json& obj, const char* key, std::uint64_t fallback, std::uint64_t lo,
                           std::uint64_t hi, ErrorCode code) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  if (!obj[key].is_number_unsigned()) bad(code, std::string(key) + " must be a non-negative integer");
  const auto v = obj[key].get<std::uint64_t>();
  if (v < lo || v > hi) {
    bad(code, std::string(key) + " must be in " + std::to_string(lo) + ".." + std::to_string(hi));
  }
  return v;
}

double get_double(const json& obj, const char* key, double fallback, ErrorCode code) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  if (!obj[key].is_number()) bad(code, std::string(key) + " must be a number");
  const double v = obj[key].get<double>();
  if (!std::isfinite(v)) bad(code, std::string(key) + " must be finite");
  return v;
}

bool get_bool(const json& obj, const char* key, bool fallback, ErrorCode code) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  if (!obj[key].is_boolean()) bad(code, std::string(key) + " must be a boolean");
  return obj[key].get<bool>();
}

std::string get_string(const json& obj, const char* key, ErrorCode code) {
  if (!obj.contains(key) || !obj[key].is_string()) bad(code, std::string(key) + " must be a string");
  return obj[key].get<std::string>();
}

Video decode_b64_video(const json& v) {
  if (!v.is_string()) bad(ErrorCode::BadRequest, "videos are base64 TVID strings");
  return decode_tvid(base64_decode(v.get<std::string>()));
}

AgentId agent_from_json(const json& v, ErrorCode code) {
  if (v.is_number_unsigned()) {
    const auto i = v.get<std::uint64_t>();
    if (i < 1 || i > 5) bad(code, "agent id out of range");
    return static_cast<AgentId>(i);
  }
  if (v.is_string()) {
    for (int k = 1; k <= 5; ++k) {
      if (agent_name(static_cast<AgentId>(k)) == v.get<std::string>()) return static_cast<AgentId>(k);
    }
  }
  bad(code, "unknown agent");
}

DataFreeConfig parse_training_config(const json& body) {
  constexpr auto C = ErrorCode::InvalidConfig;
  json cfg = body;
  if (body.contains("config")) {
    check_keys(body, {"config"}, C);
    cfg = body["config"];
    if (!cfg.is_object()) bad(C, "config must be an object");
  }
  check_keys(cfg, {"iterations", "prompts_per_iter", "hitl_mode", "candidate_noise_sigma", "judges",
                   "seed", "epochs", "batch_size", "eta_theta", "eta_z", "t_frames", "chain",
                   "shuffle", "freeze_modulation", "fixed_alpha", "alpha_clamp"},
             C);
  DataFreeConfig out;
  out.iterations = get_unsigned(cfg, "iterations", out.iterations, 1, kMaxIterations, C);
  out.prompts_per_iter =
      get_unsigned(cfg, "prompts_per_iter", out.prompts_per_iter, 1, prompt_grammar_size(), C);
  if (cfg.contains("hitl_mode")) out.hitl_mode = hitl_mode_from_name(get_string(cfg, "hitl_mode", C));
  out.candidate_noise_sigma = get_double(cfg, "candidate_noise_sigma", out.candidate_noise_sigma, C);
  if (cfg.contains("judges")) {
    if (!cfg["judges"].is_array()) bad(C, "judges must be an array");
    out.judges.clear();
    for (const auto& j : cfg["judges"]) {
      if (!j.is_object()) bad(C, "judge entries must be objects");
      check_keys(j, {"kind", "endpoint", "seed", "timeout_ms"}, C);
      JudgeSpec spec;
      spec.kind = judge_kind_from_name(get_string(j, "kind", C));
      if (j.contains("endpoint")) spec.endpoint = get_string(j, "endpoint", C);
      spec.seed = get_unsigned(j, "seed", 0, 0, std::numeric_limits<std::uint64_t>::max(), C);
      spec.timeout = std::chrono::milliseconds(get_unsigned(j, "timeout_ms", 10000, 1, 600000, C));
      out.judges.push_back(std::move(spec));
    }
  }
  TrainConfig& t = out.train_cfg;
  t.seed = get_unsigned(cfg, "seed", t.seed, 0, std::numeric_limits<std::uint64_t>::max(), C);
  t.epochs = get_unsigned(cfg, "epochs", t.epochs, 1, kMaxEpochs, C);
  t.batch_size = get_unsigned(cfg, "batch_size", t.batch_size, 1, 1024, C);
  t.eta_theta_default = get_double(cfg, "eta_theta", t.eta_theta_default, C);
  t.eta_z_default = get_double(cfg, "eta_z", t.eta_z_default, C);
  t.t_frames = get_unsigned(cfg, "t_frames", t.t_frames, 1, kMaxFrames, C);
  t.shuffle = get_bool(cfg, "shuffle", t.shuffle, C);
  t.freeze_modulation = get_bool(cfg, "freeze_modulation", t.freeze_modulation, C);
  if (cfg.contains("fixed_alpha") && !cfg["fixed_alpha"].is_null()) {
    t.fixed_alpha = get_double(cfg, "fixed_alpha", 0.0, C);
  }
  if (cfg.contains("alpha_clamp") && !cfg["alpha_clamp"].is_null()) {
    t.alpha_clamp = get_double(cfg, "alpha_clamp", 0.0, C);
  }
  if (cfg.contains("chain")) {
    if (!cfg["chain"].is_array() || cfg["chain"].size() > 8) bad(C, "chain must be a short array");
    t.chain.clear();
    for (const auto& a : cfg["chain"]) t.chain.push_back(agent_from_json(a, C));
  }
  out.validate();
  return out;
}

json alphas_json(const std::map<AgentId, double>& alphas) {
  json out = json::object();
  for (const auto& [id, a] : alphas) out[std::string(agent_name(id))] = canonical_number(a);
  return out;
}

}  // namespace

struct Server::Impl {
  explicit Impl(ServerOptions o) : options(std::move(o)), agents(AgentSuite::create(options.agent_seed)) {}

  struct ReviewEntry {
    ReviewItem item;
    std::string training_id;
  };

  struct Job {
    std::string id;
    std::string state = "running";
    std::size_t iterations = 0;
    std::size_t completed = 0;
    std::size_t epoch = 0;
    std::size_t batch = 0;
    std::optional<double> last_loss;
    std::map<AgentId, double> alphas;
    json reports = json::array();
    std::string error;
  };

  ServerOptions options;
  std::mutex mu;
  std::condition_variable cv;
  AgentSuite agents;
  std::map<std::string, PipelineRun> runs;
  std::map<std::string, std::string> artifacts;
  std::map<std::string, ReviewEntry> reviews;
  std::map<std::string, Job> jobs;
  std::optional<std::string> active_job;
  std::thread worker;
  std::uint64_t job_counter = 0;
  bool stopping = false;
  httplib::Server http;

  // ---- helpers (mu held) ----

  void register_run_artifacts(const PipelineRun& run) {
    for (const auto& [stage, artifact] : run.artifacts) {
      const std::string id = run.run_id + "-" + std::string(stage_name(stage));
      if (const auto* f = std::get_if<Frame>(&artifact)) {
        artifacts[id] = encode_tvid(Video({*f}));
      } else if (const auto* v = std::get_if<Video>(&artifact)) {
        artifacts[id] = encode_tvid(*v);
      }
    }
  }

  void persist(const PipelineRun& run) {
    register_run_artifacts(run);
    if (!options.data_dir.empty()) persist_run(run, options.data_dir / "runs" / run.run_id);
  }

  void load_persisted_runs() {
    const fs::path dir = options.data_dir / "runs";
    std::error_code ec;
    if (options.data_dir.empty() || !fs::is_directory(dir, ec)) return;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
      try {
        PipelineRun run = load_run(entry.path());
        register_run_artifacts(run);
        runs.emplace(run.run_id, std::move(run));
      } catch (const Error& e) {
        std::fprintf(stderr, "warning: skipping %s: %s\n", entry.path().c_str(), e.what());
      }
    }
    if (ec) std::fprintf(stderr, "warning: cannot list %s: %s\n", dir.c_str(), ec.message().c_str());
  }

  static std::string artifact_url(const std::string& id) { return "/v1/artifacts/" + id; }

  json run_view(const PipelineRun& run) const {
    json j;
    j["run_id"] = run.run_id;
    j["task"] = std::string(task_name(run.task));
    j["stage"] = std::string(stage_name(run.stage));
    j["status"] = std::string(status_name(run.status));
    j["failure"] = run.failure;
    json retries = json::object();
    for (StageId s : stage_table(run.task)) retries[std::string(stage_name(s))] = 0;
    for (const auto& [s, n] : run.retry_counts) retries[std::string(stage_name(s))] = n;
    j["retry_counts"] = retries;
    json arts = json::object();
    for (const auto& [stage, artifact] : run.artifacts) {
      json a;
      const std::string id = run.run_id + "-" + std::string(stage_name(stage));
      if (const auto* p = std::get_if<EnhancedPrompt>(&artifact)) {
        a["kind"] = "enhanced_prompt";
        a["text"] = p->text;
      } else {
        a["kind"] = std::holds_alternative<Frame>(artifact) ? "frame" : "video";
        a["artifact_id"] = id;
        a["url"] = artifact_url(id);
      }
      arts[std::string(stage_name(stage))] = a;
    }
    j["artifacts"] = arts;
    if (run.status == RunStatus::Done) {
      j["final_artifact_url"] =
          artifact_url(run.run_id + "-" + std::string(stage_name(stage_table(run.task).back())));
    }
    json hist = json::array();
    for (const auto& e : run.history) {
      hist.push_back({{"seq", e.seq},
                      {"stage", std::string(stage_name(e.stage))},
                      {"event", e.event},
                      {"detail", e.detail}});
    }
    j["history"] = hist;
    return j;
  }

  PipelineRun& find_run(const std::string& id) {
    auto it = runs.find(id);
    if (it == runs.end()) bad(ErrorCode::NotFound, "unknown run " + id);
    return it->second;
  }

  /// Executes the current stage; agent failures leave the run failed.
  void advance(PipelineRun& run) {
    if (run.status != RunStatus::Running) return;
    try {
      execute_stage(run, agents);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AgentFailure) throw;
    }
  }

  // ---- endpoints ----

  HttpResponse create_run_ep(std::string_view body) {
    const json j = parse_object(body, ErrorCode::BadRequest, false);
    check_keys(j, {"task", "prompt", "inputs", "seed", "t_frames", "connect_frames"}, ErrorCode::BadRequest);
    const TaskKind task = task_from_name(get_string(j, "task", ErrorCode::BadRequest));
    RunInputs inputs;
    if (j.contains("prompt") && !j["prompt"].is_null()) inputs.prompt = get_string(j, "prompt", ErrorCode::BadRequest);
    if (j.contains("inputs") && !j["inputs"].is_null()) {
      const json& in = j["inputs"];
      if (!in.is_object()) bad(ErrorCode::BadRequest, "inputs must be an object");
      check_keys(in, {"frame", "videos"}, ErrorCode::BadRequest);
      if (in.contains("frame") && !in["frame"].is_null()) {
        Video v = decode_b64_video(in["frame"]);
        if (v.length() != 1) bad(ErrorCode::InputMismatch, "frame input must be a one-frame TVID");
        inputs.frame = v.frame(0);
      }
      if (in.contains("videos") && !in["videos"].is_null()) {
        if (!in["videos"].is_array()) bad(ErrorCode::BadRequest, "videos must be an array");
        for (const auto& v : in["videos"]) inputs.videos.push_back(decode_b64_video(v));
      }
    }
    PipelineConfig cfg;
    cfg.seed = get_unsigned(j, "seed", cfg.seed, 0, std::numeric_limits<std::uint64_t>::max(), ErrorCode::BadRequest);
    cfg.t_frames = get_unsigned(j, "t_frames", cfg.t_frames, 1, kMaxFrames, ErrorCode::BadRequest);
    if (j.contains("connect_frames") && !j["connect_frames"].is_null()) {
      cfg.connect_frames = get_unsigned(j, "connect_frames", 1, 1, kMaxFrames, ErrorCode::BadRequest);
    }
    PipelineRun run = create_run(task, std::move(inputs), cfg);
    advance(run);
    persist(run);
    const std::string id = run.run_id;
    auto [it, inserted] = runs.emplace(id, std::move(run));
    json view = run_view(it->second);
    return json_response(201, view);
  }

  HttpResponse decision_ep(const std::string& id, std::string_view body) {
    PipelineRun& run = find_run(id);
    const json j = parse_object(body, ErrorCode::BadRequest, false);
    check_keys(j, {"stage", "decision"}, ErrorCode::BadRequest);
    const StageId stage = stage_from_name(get_string(j, "stage", ErrorCode::BadRequest));
    const HumanDecision decision = decision_from_name(get_string(j, "decision", ErrorCode::BadRequest));
    try {
      apply_decision(run, stage, decision);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::RetryExhausted) persist(run);
      throw;
    }
    advance(run);
    persist(run);
    return json_response(200, run_view(run));
  }

  HttpResponse review_list_ep() {
    json items = json::array();
    for (const auto& [id, entry] : reviews) {
      if (entry.item.status != ReviewStatus::PendingHuman) continue;
      const CandidateSet& set = entry.item.candidate_set;
      json urls = json::array();
      for (std::size_t c = 0; c < set.candidates.size(); ++c) urls.push_back(artifact_url(id + "-c" + std::to_string(c)));
      json rankings = json::object();
      for (const auto& [label, r] : set.rankings) rankings[label] = r.order();
      const auto& crit = criteria_catalog().at(static_cast<std::size_t>(set.criterion_id - 1));
      items.push_back({{"item_id", id},
                       {"training_id", entry.training_id},
                       {"iteration", entry.item.iteration},
                       {"prompt", set.prompt.text},
                       {"criterion", {{"id", crit.id}, {"text", crit.text}}},
                       {"candidate_urls", urls},
                       {"rankings", rankings},
                       {"unavailable_judges", set.unavailable_judges}});
    }
    return json_response(200, {{"items", items}});
  }

  HttpResponse review_decision_ep(const std::string& id, std::string_view body) {
    auto it = reviews.find(id);
    if (it == reviews.end()) return error_response(404, "unknown_item", "unknown review item " + id);
    const json j = parse_object(body, ErrorCode::BadRequest, false);
    check_keys(j, {"select", "discard"}, ErrorCode::BadRequest);
    const bool has_select = j.contains("select") && !j["select"].is_null();
    const bool discard = get_bool(j, "discard", false, ErrorCode::BadRequest);
    if (has_select == discard) bad(ErrorCode::BadRequest, "give exactly one of select or discard:true");
    ReviewDecision decision = ReviewDecision::discard();
    if (has_select) {
      if (!j["select"].is_number_integer()) bad(ErrorCode::BadRequest, "select must be an integer");
      const auto raw = j["select"].get<std::int64_t>();
      if (raw < 0) bad(ErrorCode::BadIndex, "candidate index must be >= 0");
      decision = ReviewDecision::accept(static_cast<std::size_t>(raw));
    }
    resolve_review(it->second.item, decision);
    cv.notify_all();
    json res = {{"item_id", id}, {"status", "resolved"}};
    res["selected"] = decision.index ? json(*decision.index) : json(nullptr);
    return json_response(200, res);
  }

  std::size_t pending_for(const std::string& job_id) const {
    std::size_t n = 0;
    for (const auto& [id, e] : reviews) n += e.training_id == job_id && e.item.status == ReviewStatus::PendingHuman;
    return n;
  }

  json job_view(const Job& job) const {
    return {{"training_id", job.id},
            {"state", job.state},
            {"iteration", std::min(job.completed + (job.state == "done" ? 0 : 1), job.iterations)},
            {"iterations", job.iterations},
            {"epoch", job.epoch},
            {"batch", job.batch},
            {"last_loss", job.last_loss ? canonical_number(*job.last_loss) : json(nullptr)},
            {"alphas", alphas_json(job.alphas)},
            {"pending_reviews", pending_for(job.id)},
            {"reports", job.reports},
            {"error", job.error}};
  }

  HttpResponse training_start_ep(std::string_view body) {
    const json j = parse_object(body, ErrorCode::InvalidConfig, true);
    DataFreeConfig cfg = parse_training_config(j);
    if (active_job) bad(ErrorCode::TrainingActive, "training job " + *active_job + " is still active");
    if (worker.joinable()) worker.join();

    char buf[32];
    std::snprintf(buf, sizeof buf, "train-%04llu", static_cast<unsigned long long>(++job_counter));
    const std::string id = buf;
    Job& job = jobs[id];
    job.id = id;
    job.iterations = cfg.iterations;
    active_job = id;
    worker = std::thread([this, id, cfg] { run_job(id, cfg); });
    return json_response(202, {{"training_id", id}, {"state", "running"}});
  }

  void run_job(const std::string& id, const DataFreeConfig& cfg) {
    const fs::path out_dir = options.data_dir.empty() ? fs::path{} : options.data_dir / "training" / id;
    auto reviewer = [&](std::vector<ReviewItem*>& pending) {
      std::unique_lock lk(mu);
      std::vector<std::string> keys;
      for (ReviewItem* item : pending) {
        const std::string key = id + "-" + item->item_id;
        keys.push_back(key);
        reviews[key] = ReviewEntry{*item, id};
        for (std::size_t c = 0; c < item->candidate_set.candidates.size(); ++c) {
          artifacts[key + "-c" + std::to_string(c)] = encode_tvid(item->candidate_set.candidates[c]);
        }
      }
      jobs[id].state = "awaiting_review";
      cv.wait(lk, [&] {
        if (stopping) return true;
        for (const auto& k : keys) {
          if (reviews[k].item.status == ReviewStatus::PendingHuman) return false;
        }
        return true;
      });
      if (stopping) throw Error(ErrorCode::Cancelled, "server shutting down");
      for (std::size_t i = 0; i < pending.size(); ++i) {
        pending[i]->status = reviews[keys[i]].item.status;
        pending[i]->resolution = reviews[keys[i]].item.resolution;
      }
      jobs[id].state = "running";
    };
    auto on_iteration = [&](const IterationReport& r) {
      std::lock_guard lk(mu);
      jobs[id].completed = r.iteration;
      jobs[id].reports.push_back(report_to_json(r));
    };
    auto on_batch = [&](const HistoryRecord& r) {
      std::lock_guard lk(mu);
      if (stopping) throw Error(ErrorCode::Cancelled, "server shutting down");
      Job& job = jobs[id];
      job.epoch = r.epoch;
      job.batch = r.batch;
      job.last_loss = r.loss;
      job.alphas = r.alpha;
      if (!out_dir.empty()) append_history(r, out_dir / "history.jsonl");
    };

    try {
      DataFreeResult result = datafree_train(cfg, std::nullopt, reviewer, on_iteration, on_batch);
      if (!out_dir.empty()) {
        write_checkpoint(result.state, cfg.train_cfg.chain,
                         {cfg.iterations, cfg.train_cfg.epochs, cfg.train_cfg.seed}, out_dir / "checkpoint");
      }
      std::lock_guard lk(mu);
      agents.adopt(result.state);
      jobs[id].state = "done";
    } catch (const std::exception& e) {
      std::lock_guard lk(mu);
      const auto* err = dynamic_cast<const Error*>(&e);
      jobs[id].state = err && err->code() == ErrorCode::Cancelled ? "cancelled" : "failed";
      jobs[id].error = e.what();
    }
    std::lock_guard lk(mu);
    active_job.reset();
    cv.notify_all();
  }

  HttpResponse artifact_ep(const std::string& id, const std::map<std::string, std::string>& query) {
    auto it = artifacts.find(id);
    if (it == artifacts.end()) bad(ErrorCode::NotFound, "unknown artifact " + id);
    auto enc = query.find("enc");
    if (enc != query.end()) {
      if (enc->second != "b64") bad(ErrorCode::BadRequest, "enc must be b64");
      return json_response(200, {{"format", "tvid_b64"}, {"data", base64_encode(it->second)}});
    }
    return {200, "application/octet-stream", it->second};
  }

  HttpResponse route(std::string_view method, std::string_view target, std::string_view body) {
    const auto qpos = target.find('?');
    const auto parts = split_path(target.substr(0, qpos));
    const auto query = qpos == std::string_view::npos ? std::map<std::string, std::string>{}
                                                      : parse_query(target.substr(qpos + 1));
    const bool get = method == "GET";
    const bool post = method == "POST";
    if (parts.size() < 2 || parts[0] != "v1") bad(ErrorCode::NotFound, "no such endpoint");
    const std::string& res = parts[1];
    std::unique_lock lk(mu);
    if (res == "runs") {
      if (parts.size() == 2 && post) return create_run_ep(body);
      if (parts.size() == 2 && get) {
        json ids = json::array();
        for (const auto& [id, r] : runs) ids.push_back(id);
        return json_response(200, {{"runs", ids}});
      }
      if (parts.size() == 3 && get) return json_response(200, run_view(find_run(parts[2])));
      if (parts.size() == 4 && parts[3] == "decision" && post) return decision_ep(parts[2], body);
    } else if (res == "review") {
      if (parts.size() == 2 && get) return review_list_ep();
      if (parts.size() == 3 && post) return review_decision_ep(parts[2], body);
    } else if (res == "training") {
      if (parts.size() == 2 && post) return training_start_ep(body);
      if (parts.size() == 3 && get) {
        auto it = jobs.find(parts[2]);
        if (it == jobs.end()) bad(ErrorCode::NotFound, "unknown training job " + parts[2]);
        return json_response(200, job_view(it->second));
      }
    } else if (res == "artifacts") {
      if (parts.size() == 3 && get) return artifact_ep(parts[2], query);
    }
    bad(ErrorCode::NotFound, "no such endpoint");
  }
};

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  std::lock_guard lk(impl_->mu);
  impl_->load_persisted_runs();
}

Server::~Server() { stop(); }

HttpResponse Server::handle(std::string_view method, std::string_view target, std::string_view body) {
  try {
    return impl_->route(method, target, body);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

int Server::bind() {
  auto& http = impl_->http;
  http.set_payload_max_length(std::size_t{64} << 20);
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    std::string target = req.path;
    char sep = '?';
    for (const auto& [k, v] : req.params) {
      target += sep + k + "=" + v;
      sep = '&';
    }
    HttpResponse r = handle(req.method, target, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  http.Get(".*", forward);
  http.Post(".*", forward);
  http.Put(".*", forward);
  http.Delete(".*", forward);
  http.Patch(".*", forward);

  const auto& o = impl_->options;
  int port = o.port;
  if (port == 0) {
    port = http.bind_to_any_port(o.host);
  } else if (!http.bind_to_port(o.host, port)) {
    port = -1;
  }
  if (port <= 0) throw Error(ErrorCode::Io, "cannot bind " + o.host + ":" + std::to_string(o.port));
  return port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  {
    std::lock_guard lk(impl_->mu);
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  impl_->http.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

void Server::wait_for_training() {
  std::unique_lock lk(impl_->mu);
  impl_->cv.wait(lk, [this] { return !impl_->active_job.has_value(); });
}

}  // namespace sopforge
