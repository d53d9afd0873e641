#pragma once

// Sessions: one dashboard + document per session token. Transport-agnostic;
// the HTTP/WebSocket server in http_server.hpp drives it.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "elqa/dashboard.hpp"

namespace elqa {

inline constexpr std::chrono::seconds kDefaultSessionTtl{1800};

class SessionManager {
 public:
  using Clock = std::chrono::steady_clock;
  using DashboardFactory = std::function<std::unique_ptr<Dashboard>()>;
  /// Receives one outbound message; used to push close notifications.
  using ChannelSink = std::function<void(const std::string& message)>;

  struct Created {
    std::string session_id;
    Value document;
  };

  /// Reply to one inbound message; `close_channel` is set only for
  /// UnknownSession.
  struct Reply {
    std::string message;
    bool close_channel = false;
  };

  SessionManager() = default;
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  /// Throws BadParam if the name is taken.
  void register_dashboard(const std::string& name, DashboardFactory factory);
  std::vector<std::string> dashboards() const;

  /// Throws UnknownDashboard.
  Created create_session(const std::string& dashboard_name, Clock::time_point now = Clock::now());

  /// Parses one client message, runs it through the session's dashboard and
  /// returns the serialized patch (or error message). Events of one session
  /// are handled one at a time. Throws UnknownSession.
  std::string handle_event(const std::string& session_id, const std::string& message,
                           Clock::time_point now = Clock::now());

  /// `handle_event` with UnknownSession folded into an error reply.
  Reply handle_message(const std::string& session_id, const std::string& message,
                       Clock::time_point now = Clock::now());

  /// Current document of a session. Throws UnknownSession.
  Value document(const std::string& session_id) const;
  bool contains(const std::string& session_id) const;
  std::size_t size() const;

  /// Removes sessions idle for longer than `ttl`, notifying their channels
  /// with a close message. A zero ttl never expires anything.
  std::size_t expire_sessions(Clock::time_point now, std::chrono::seconds ttl);

  /// Registers a channel to be notified when the session ends. Returns a
  /// token for `detach_channel`. Throws UnknownSession.
  std::uint64_t attach_channel(const std::string& session_id, ChannelSink sink);
  void detach_channel(const std::string& session_id, std::uint64_t token);

 private:
  struct Session {
    std::string dashboard_name;
    std::unique_ptr<Dashboard> dashboard;
    Clock::time_point created_at;
    Clock::time_point last_active_at;
    std::map<std::uint64_t, ChannelSink> channels;
    std::mutex mutex;  // serializes events of this session
  };

  std::shared_ptr<Session> find(const std::string& session_id) const;
  static std::string new_token();

  mutable std::mutex mutex_;
  std::map<std::string, DashboardFactory> factories_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_channel_ = 1;
};

}  // namespace elqa
