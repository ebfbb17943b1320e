// Copyright 2026 The sopforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON-over-HTTP service for pipeline runs, review queue, training jobs and
// artifacts. See docs/api.md for the endpoint reference.

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "sopforge/error.hpp"
#include "sopforge/toyworld.hpp"

namespace sopforge {

/// HTTP status for an error code. Client errors map to 4xx; only internal
/// failures (I/O, agent blow-ups) map to 5xx.
int http_status_for(ErrorCode code) noexcept;

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 7700;
  /// Runs and training outputs are persisted here when non-empty.
  std::filesystem::path data_dir;
  /// Seed of the agent parameters used by pipeline runs.
  Seed64 agent_seed = 7;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Routes one request without touching the network. `target` may carry a
  /// query string.
  HttpResponse handle(std::string_view method, std::string_view target, std::string_view body);

  /// Binds the listening socket; returns the bound port (useful with port 0).
  /// Throws Io when the address is unavailable.
  int bind();
  /// Serves until stop(); bind() must have succeeded.
  void listen();
  void stop();

  /// Blocks until the active training job (if any) finishes.
  void wait_for_training();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sopforge
