// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "sopforge/store.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace sopforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

constexpr std::uint64_t kMaxTvidElements = std::uint64_t{1} << 28;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

std::uint32_t checked_u32(std::size_t v) {
  if (v > 0xFFFFFFFFu) throw Error(ErrorCode::DimensionMismatch, "dimension exceeds u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string encode_tvid(const Video& v) {
  std::string out;
  out.reserve(kTvidHeaderSize + v.length() * v.height() * v.width() * 4);
  out.append(kTvidMagic.data(), kTvidMagic.size());
  put_u16(out, kTvidVersion);
  put_u32(out, checked_u32(v.length()));
  put_u32(out, checked_u32(v.height()));
  put_u32(out, checked_u32(v.width()));
  for (const auto& f : v.frames()) {
    for (float p : f.pixels()) put_f32(out, p);
  }
  return out;
}

Video decode_tvid(std::string_view bytes) {
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kTvidMagic.size() ||
      std::memcmp(bytes.data(), kTvidMagic.data(), kTvidMagic.size()) != 0) {
    throw Error(ErrorCode::BadMagic, "not a TVID stream");
  }
  if (bytes.size() < kTvidHeaderSize) throw Error(ErrorCode::TruncatedPayload, "TVID header truncated");
  const std::uint16_t version = static_cast<std::uint16_t>(data[6] | (data[7] << 8));
  if (version != kTvidVersion) {
    throw Error(ErrorCode::BadVersion, "unsupported TVID version " + std::to_string(version));
  }
  const std::uint64_t t = get_u32(data + 8);
  const std::uint64_t h = get_u32(data + 12);
  const std::uint64_t w = get_u32(data + 16);
  const std::uint64_t elements = t * h * w;
  if (elements == 0) throw Error(ErrorCode::CorruptRecord, "TVID with an empty dimension");
  if (t > kMaxTvidElements || h > kMaxTvidElements || w > kMaxTvidElements ||
      elements > kMaxTvidElements ||
      bytes.size() - kTvidHeaderSize != elements * 4) {
    throw Error(ErrorCode::TruncatedPayload,
                "TVID payload has " + std::to_string(bytes.size() - kTvidHeaderSize) +
                    " bytes, header promises " + std::to_string(elements * 4));
  }
  std::vector<Frame> frames;
  frames.reserve(t);
  const unsigned char* p = data + kTvidHeaderSize;
  for (std::uint64_t f = 0; f < t; ++f) {
    std::vector<float> pixels(h * w);
    for (auto& px : pixels) {
      px = get_f32(p);
      p += 4;
    }
    frames.emplace_back(h, w, std::move(pixels));
  }
  return Video(std::move(frames));
}

std::size_t write_tvid(const Video& v, std::ostream& sink) {
  const std::string bytes = encode_tvid(v);
  sink.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!sink) throw Error(ErrorCode::Io, "failed writing TVID");
  return bytes.size();
}

Video read_tvid(std::istream& source) {
  std::ostringstream buf;
  buf << source.rdbuf();
  return decode_tvid(buf.str());
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::Io, "failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename into " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void save_tvid(const Video& v, const fs::path& path) { write_file_atomic(path, encode_tvid(v)); }

Video load_tvid(const fs::path& path) { return decode_tvid(read_file(path)); }

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::BadRequest, "base64 length not a multiple of 4");
  if (text.empty()) return {};
  for (char c : text) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/' || c == '=';
    if (!ok) throw Error(ErrorCode::BadRequest, "invalid base64 character");
  }
  std::string out(3 * text.size() / 4, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::BadRequest, "invalid base64");
  std::size_t padding = 0;
  if (text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

json canonical_number(double v) {
  if (v == 0.0) return 0.0;
  if (!std::isfinite(v)) return nullptr;
  return v;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr int kCheckpointFormat = 1;

void append_floats(std::string& out, std::span<const double> values) {
  for (double v : values) put_f32(out, static_cast<float>(v));
}

std::vector<double> read_floats(const std::string& weights, std::size_t offset, std::size_t len) {
  std::vector<double> out(len / 4);
  const auto* p = reinterpret_cast<const unsigned char*>(weights.data()) + offset;
  for (auto& v : out) {
    v = static_cast<double>(get_f32(p));
    p += 4;
  }
  return out;
}

[[noreturn]] void manifest_error(const std::string& why) {
  throw Error(ErrorCode::ManifestMismatch, why);
}

std::size_t require_size_field(const json& entry, const char* key) {
  if (!entry.is_object() || !entry.contains(key) || !entry[key].is_number_unsigned()) {
    manifest_error(std::string("manifest entry lacks ") + key);
  }
  return entry[key].get<std::size_t>();
}

}  // namespace

void validate_manifest(const json& manifest, std::size_t weights_size) {
  if (!manifest.is_object()) manifest_error("manifest is not an object");
  if (manifest.value("format_version", 0) != kCheckpointFormat) {
    manifest_error("unsupported checkpoint format");
  }
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const char* section : {"tensors", "modulation"}) {
    if (!manifest.contains(section) || !manifest[section].is_array()) {
      manifest_error(std::string("manifest lacks ") + section);
    }
    for (const auto& entry : manifest[section]) {
      const std::size_t off = require_size_field(entry, "byte_offset");
      const std::size_t len = require_size_field(entry, "byte_len");
      if (len % 4 != 0 || off > weights_size || len > weights_size - off) {
        manifest_error("entry outside weights file");
      }
      spans.emplace_back(off, len);
    }
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i - 1].first + spans[i - 1].second > spans[i].first) {
      manifest_error("overlapping byte ranges in manifest");
    }
  }
}

void write_checkpoint(const TrainState& state, std::span<const AgentId> chain,
                      const CheckpointMeta& meta, const fs::path& dir) {
  std::string weights;
  json manifest;
  manifest["format_version"] = kCheckpointFormat;
  manifest["chain"] = json::array();
  manifest["tensors"] = json::array();
  manifest["modulation"] = json::array();
  for (AgentId id : chain) {
    manifest["chain"].push_back(agent_index(id));
    auto p_it = state.params.find(id);
    if (p_it == state.params.end()) {
      throw Error(ErrorCode::ShapeMismatch, "no parameters for " + std::string(agent_name(id)));
    }
    for (const auto& t : p_it->second.tensors()) {
      json entry;
      entry["name"] = t.name;
      entry["agent_id"] = agent_index(id);
      entry["shape"] = {t.rows, t.cols};
      entry["byte_offset"] = weights.size();
      append_floats(weights, t.values);
      entry["byte_len"] = t.values.size() * 4;
      manifest["tensors"].push_back(entry);
    }
  }
  for (AgentId id : chain) {
    auto z_it = state.modulation.find(id);
    if (z_it == state.modulation.end()) {
      throw Error(ErrorCode::ShapeMismatch, "no modulation for " + std::string(agent_name(id)));
    }
    json entry;
    entry["agent_id"] = agent_index(id);
    entry["byte_offset"] = weights.size();
    append_floats(weights, z_it->second.values);
    entry["byte_len"] = z_it->second.values.size() * 4;
    manifest["modulation"].push_back(entry);
  }
  manifest["train_meta"] = {{"iteration", meta.iteration}, {"epoch", meta.epoch}, {"seed", meta.seed}};

  ensure_dir(dir);
  write_file_atomic(dir / "weights.bin", weights);
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint read_checkpoint(const fs::path& dir) {
  const std::string weights = read_file(dir / "weights.bin");
  const json manifest = json::parse(read_file(dir / "manifest.json"), nullptr, false);
  if (manifest.is_discarded()) manifest_error("manifest.json is not valid JSON");
  validate_manifest(manifest, weights.size());

  Checkpoint ckpt;
  if (!manifest.contains("chain") || !manifest["chain"].is_array()) manifest_error("no chain");
  for (const auto& id : manifest["chain"]) {
    if (!id.is_number_integer()) manifest_error("chain ids must be integers");
    ckpt.chain.push_back(agent_from_int(id.get<int>()));
  }
  for (AgentId id : ckpt.chain) {
    std::vector<Tensor> tensors;
    for (const auto& entry : manifest["tensors"]) {
      if (entry.value("agent_id", 0) != agent_index(id)) continue;
      const auto& shape = entry.at("shape");
      if (!shape.is_array() || shape.size() != 2) manifest_error("tensor shape must be [rows, cols]");
      Tensor t{entry.value("name", std::string{}), shape[0].get<std::size_t>(),
               shape[1].get<std::size_t>(), {}};
      if (t.rows * t.cols * 4 != entry["byte_len"].get<std::size_t>()) {
        throw Error(ErrorCode::ShapeMismatch, "tensor " + t.name + " byte_len disagrees with shape");
      }
      t.values = read_floats(weights, entry["byte_offset"], entry["byte_len"]);
      tensors.push_back(std::move(t));
    }
    if (tensors.empty()) manifest_error("no tensors for " + std::string(agent_name(id)));
    AgentParams loaded(id, std::move(tensors));
    const AgentParams expected = zero_params(id, loaded.pixels());
    for (const auto& t : expected.tensors()) {
      bool found = false;
      for (const auto& l : loaded.tensors()) found = found || l.name == t.name;
      if (!found) manifest_error("missing tensor " + t.name + " for " + std::string(agent_name(id)));
    }
    if (!loaded.same_shape(expected)) {
      throw Error(ErrorCode::ShapeMismatch,
                  "tensor shapes for " + std::string(agent_name(id)) + " do not match the role");
    }
    ckpt.state.params.emplace(id, std::move(loaded));
  }
  for (const auto& entry : manifest["modulation"]) {
    const AgentId id = agent_from_int(entry.value("agent_id", 0));
    auto values = read_floats(weights, entry["byte_offset"], entry["byte_len"]);
    if (values.size() != kModulationSize) {
      throw Error(ErrorCode::ShapeMismatch, "modulation must have 16 values");
    }
    ckpt.state.modulation[id] = ModulationEmbedding{id, std::move(values)};
  }
  for (AgentId id : ckpt.chain) {
    if (!ckpt.state.modulation.count(id)) {
      manifest_error("missing modulation for " + std::string(agent_name(id)));
    }
  }
  const json meta = manifest.value("train_meta", json::object());
  ckpt.meta.iteration = meta.value("iteration", std::size_t{0});
  ckpt.meta.epoch = meta.value("epoch", std::size_t{0});
  ckpt.meta.seed = meta.value("seed", Seed64{0});
  return ckpt;
}

// ---------------------------------------------------------------------------
// Training history

std::string history_line(const HistoryRecord& record) {
  json j;
  j["epoch"] = record.epoch;
  j["batch"] = record.batch;
  j["loss"] = canonical_number(record.loss);
  j["alpha"] = json::object();
  for (const auto& [id, a] : record.alpha) j["alpha"][std::string(agent_name(id))] = canonical_number(a);
  return j.dump();
}

HistoryRecord parse_history_line(std::string_view line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::CorruptRecord, "bad history line");
  HistoryRecord r;
  try {
    r.epoch = j.at("epoch").get<std::size_t>();
    r.batch = j.at("batch").get<std::size_t>();
    r.loss = j.at("loss").is_null() ? std::nan("") : j.at("loss").get<double>();
    for (const auto& [name, a] : j.at("alpha").items()) {
      AgentId id = AgentId::PromptEnhance;
      bool known = false;
      for (int k = 1; k <= 5; ++k) {
        if (agent_name(static_cast<AgentId>(k)) == name) {
          id = static_cast<AgentId>(k);
          known = true;
        }
      }
      if (!known) throw Error(ErrorCode::CorruptRecord, "unknown agent in history: " + name);
      r.alpha[id] = a.get<double>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptRecord, std::string("bad history line: ") + e.what());
  }
  return r;
}

void append_history(const HistoryRecord& record, std::ostream& log) {
  log << history_line(record) << '\n';
  if (!log) throw Error(ErrorCode::Io, "failed appending history");
}

void append_history(const HistoryRecord& record, const fs::path& log) {
  if (log.has_parent_path()) ensure_dir(log.parent_path());
  std::ofstream out(log, std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + log.string());
  append_history(record, out);
}

std::vector<HistoryRecord> read_history(std::istream& log) {
  std::vector<HistoryRecord> out;
  std::string line;
  while (std::getline(log, line)) {
    if (!line.empty()) out.push_back(parse_history_line(line));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline runs

namespace {

std::string artifact_file(StageId stage) { return "artifacts/" + std::string(stage_name(stage)) + ".tvid"; }

json config_to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["t_frames"] = c.t_frames;
  j["connect_frames"] = c.connect_frames ? json(*c.connect_frames) : json(nullptr);
  j["retry_jitter_sigma"] = canonical_number(c.retry_jitter_sigma);
  return j;
}

[[noreturn]] void corrupt(const std::string& why) { throw Error(ErrorCode::CorruptRecord, why); }

}  // namespace

json run_to_json(const PipelineRun& run) {
  json j;
  j["run_id"] = run.run_id;
  j["task"] = std::string(task_name(run.task));
  j["stage"] = std::string(stage_name(run.stage));
  j["status"] = std::string(status_name(run.status));
  j["failure"] = run.failure;
  j["config"] = config_to_json(run.config);

  json inputs;
  inputs["prompt"] = run.inputs.prompt ? json(*run.inputs.prompt) : json(nullptr);
  inputs["frame"] = run.inputs.frame ? json("inputs/frame.tvid") : json(nullptr);
  inputs["videos"] = json::array();
  for (std::size_t i = 0; i < run.inputs.videos.size(); ++i) {
    inputs["videos"].push_back("inputs/video_" + std::to_string(i) + ".tvid");
  }
  j["inputs"] = inputs;

  j["retry_counts"] = json::object();
  for (const auto& [stage, n] : run.retry_counts) j["retry_counts"][std::string(stage_name(stage))] = n;

  j["artifacts"] = json::object();
  for (const auto& [stage, artifact] : run.artifacts) {
    json a;
    if (const auto* p = std::get_if<EnhancedPrompt>(&artifact)) {
      a["kind"] = "enhanced_prompt";
      a["text"] = p->text;
      a["vector"] = json::array();
      for (double v : p->vector) a["vector"].push_back(canonical_number(v));
    } else {
      a["kind"] = std::holds_alternative<Frame>(artifact) ? "frame" : "video";
      a["file"] = artifact_file(stage);
    }
    j["artifacts"][std::string(stage_name(stage))] = a;
  }

  j["history"] = json::array();
  for (const auto& e : run.history) {
    j["history"].push_back({{"seq", e.seq},
                            {"timestamp", e.timestamp_ms},
                            {"stage", std::string(stage_name(e.stage))},
                            {"event", e.event},
                            {"detail", e.detail}});
  }
  return j;
}

void persist_run(const PipelineRun& run, const fs::path& dir) {
  ensure_dir(dir);
  if (run.inputs.frame) save_tvid(Video({*run.inputs.frame}), dir / "inputs/frame.tvid");
  for (std::size_t i = 0; i < run.inputs.videos.size(); ++i) {
    save_tvid(run.inputs.videos[i], dir / ("inputs/video_" + std::to_string(i) + ".tvid"));
  }
  for (const auto& [stage, artifact] : run.artifacts) {
    if (const auto* f = std::get_if<Frame>(&artifact)) {
      save_tvid(Video({*f}), dir / artifact_file(stage));
    } else if (const auto* v = std::get_if<Video>(&artifact)) {
      save_tvid(*v, dir / artifact_file(stage));
    }
  }
  write_file_atomic(dir / "run.json", run_to_json(run).dump(2) + "\n");
}

PipelineRun load_run(const fs::path& dir) {
  std::string text;
  try {
    text = read_file(dir / "run.json");
  } catch (const Error&) {
    corrupt("run.json missing in " + dir.string());
  }
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) corrupt("run.json is not a JSON object");

  auto load_video = [&dir](const std::string& rel, const std::string& what) {
    try {
      return load_tvid(dir / rel);
    } catch (const Error& e) {
      corrupt(what + ": " + e.what());
    }
  };

  PipelineRun run;
  try {
    run.run_id = j.at("run_id").get<std::string>();
    run.task = task_from_name(j.at("task").get<std::string>());
    run.stage = stage_from_name(j.at("stage").get<std::string>());
    run.status = status_from_name(j.at("status").get<std::string>());
    run.failure = j.value("failure", std::string{});

    const json& c = j.at("config");
    run.config.seed = c.at("seed").get<Seed64>();
    run.config.t_frames = c.at("t_frames").get<std::size_t>();
    if (!c.at("connect_frames").is_null()) run.config.connect_frames = c["connect_frames"].get<std::size_t>();
    run.config.retry_jitter_sigma = c.at("retry_jitter_sigma").get<double>();

    const json& in = j.at("inputs");
    if (!in.at("prompt").is_null()) run.inputs.prompt = in["prompt"].get<std::string>();
    if (!in.at("frame").is_null()) {
      run.inputs.frame = load_video(in["frame"].get<std::string>(), "input frame").frame(0);
    }
    for (const auto& rel : in.at("videos")) {
      run.inputs.videos.push_back(load_video(rel.get<std::string>(), "input video"));
    }

    for (const auto& [name, n] : j.at("retry_counts").items()) {
      run.retry_counts[stage_from_name(name)] = n.get<int>();
    }
    for (const auto& [name, a] : j.at("artifacts").items()) {
      const StageId stage = stage_from_name(name);
      const std::string kind = a.at("kind").get<std::string>();
      if (kind == "enhanced_prompt") {
        EnhancedPrompt p;
        p.text = a.at("text").get<std::string>();
        const auto& vec = a.at("vector");
        if (!vec.is_array() || vec.size() != kPromptVecSize) corrupt("bad prompt vector at " + name);
        for (std::size_t i = 0; i < kPromptVecSize; ++i) p.vector[i] = vec[i].get<double>();
        run.artifacts.emplace(stage, p);
      } else if (kind == "frame") {
        run.artifacts.emplace(stage, load_video(a.at("file").get<std::string>(), "artifact for stage " + name).frame(0));
      } else if (kind == "video") {
        run.artifacts.emplace(stage, load_video(a.at("file").get<std::string>(), "artifact for stage " + name));
      } else {
        corrupt("unknown artifact kind at stage " + name);
      }
    }
    for (const auto& e : j.at("history")) {
      run.history.push_back(RunEvent{e.at("seq").get<std::size_t>(),
                                     e.at("timestamp").get<std::int64_t>(),
                                     stage_from_name(e.at("stage").get<std::string>()),
                                     e.at("event").get<std::string>(),
                                     e.at("detail").get<std::string>()});
    }
  } catch (const json::exception& e) {
    corrupt(std::string("malformed run.json: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptRecord) throw;
    corrupt(std::string("malformed run.json: ") + e.what());
  }
  return run;
}

}  // namespace sopforge
