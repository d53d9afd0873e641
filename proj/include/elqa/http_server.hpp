#pragma once

// HTTP + WebSocket front end for a SessionManager.
//
//   GET  /                                   static client (index.html)
//   GET  /healthz                            200 "ok"
//   POST /api/session?dashboard=NAME         {"session_id": .., "document": {..}}
//   GET  /api/session/document?session=ID    {"document": {..}}  (refetch after a revision gap)
//   WS   /ws?session=ID                      events up, patches/errors/close down

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "elqa/session_manager.hpp"

namespace elqa {

struct ServerOptions {
  std::string address = "0.0.0.0";
  unsigned short port = 8080;  // 0 picks an ephemeral port
  /// Directory holding the client bundle; empty serves a built-in page.
  std::filesystem::path static_dir;
  std::chrono::seconds session_ttl = kDefaultSessionTtl;
  std::chrono::seconds sweep_interval{30};
  unsigned threads = 2;
};

/// The SessionManager must outlive the server.
class HttpServer {
 public:
  HttpServer(SessionManager& sessions, ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and starts the worker threads; returns immediately.
  /// Throws IoError if the address cannot be bound.
  void start();
  /// Bound port (useful with port 0). Valid after start().
  unsigned short port() const;
  void stop();
  /// Blocks until the workers exit.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits `a=1&b=x%20y` into decoded pairs; later keys win.
std::map<std::string, std::string> parse_query(std::string_view query);

}  // namespace elqa
