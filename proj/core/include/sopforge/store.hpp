// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats.
//
// TVID v1: "TVID1\0" | u16 version=1 | u32 t | u32 h | u32 w (all LE) followed
// by t·h·w float32 LE pixels, frame-major then row-major.
//
// Checkpoint directory: manifest.json + weights.bin, where weights.bin is the
// float32 LE concatenation of every tensor and modulation vector in manifest
// order.

#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sopforge/core.hpp"
#include "sopforge/pipeline.hpp"
#include "sopforge/selfmod.hpp"

namespace sopforge {

inline constexpr std::array<char, 6> kTvidMagic = {'T', 'V', 'I', 'D', '1', '\0'};
inline constexpr std::uint16_t kTvidVersion = 1;
inline constexpr std::size_t kTvidHeaderSize = 6 + 2 + 12;

std::size_t write_tvid(const Video& v, std::ostream& sink);
/// Throws BadMagic, BadVersion or TruncatedPayload.
Video read_tvid(std::istream& source);

std::string encode_tvid(const Video& v);
Video decode_tvid(std::string_view bytes);

/// Writes via a temporary file and rename.
void save_tvid(const Video& v, const std::filesystem::path& path);
Video load_tvid(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);
/// Throws BadRequest on malformed input.
std::string base64_decode(std::string_view text);

/// Atomic text write (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// JSON number for `v` with -0.0 folded into 0.0.
nlohmann::json canonical_number(double v);

struct CheckpointMeta {
  std::size_t iteration = 0;
  std::size_t epoch = 0;
  Seed64 seed = 0;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
  std::vector<AgentId> chain;
  TrainState state;
  CheckpointMeta meta;
};

void write_checkpoint(const TrainState& state, std::span<const AgentId> chain,
                      const CheckpointMeta& meta, const std::filesystem::path& dir);
/// Throws ManifestMismatch, ShapeMismatch or Io.
Checkpoint read_checkpoint(const std::filesystem::path& dir);
/// Checks offsets are disjoint and inside a weights file of `weights_size`
/// bytes. Throws ManifestMismatch.
void validate_manifest(const nlohmann::json& manifest, std::size_t weights_size);

/// One history record as a single JSON line (no trailing newline):
/// {"alpha":{"image_to_video":..,"text_to_image":..},"batch":1,"epoch":1,"loss":..}
std::string history_line(const HistoryRecord& record);
HistoryRecord parse_history_line(std::string_view line);
void append_history(const HistoryRecord& record, std::ostream& log);
void append_history(const HistoryRecord& record, const std::filesystem::path& log);
std::vector<HistoryRecord> read_history(std::istream& log);

nlohmann::json run_to_json(const PipelineRun& run);

/// run.json plus artifacts/<stage>.tvid and inputs/*.tvid under `dir`.
void persist_run(const PipelineRun& run, const std::filesystem::path& dir);
/// Throws CorruptRecord naming the missing or malformed piece.
PipelineRun load_run(const std::filesystem::path& dir);

}  // namespace sopforge
