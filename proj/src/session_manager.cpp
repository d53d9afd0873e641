#include "elqa/session_manager.hpp"

#include <random>

#include "elqa/error.hpp"

namespace elqa {

void SessionManager::register_dashboard(const std::string& name, DashboardFactory factory) {
  std::lock_guard lock(mutex_);
  if (!factories_.emplace(name, std::move(factory)).second) throw BadParam("dashboard already registered: " + name);
}

std::vector<std::string> SessionManager::dashboards() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, factory] : factories_) out.push_back(name);
  return out;
}

std::string SessionManager::new_token() {
  static constexpr char kHex[] = "0123456789abcdef";
  thread_local std::random_device device;
  std::string token;
  for (int word = 0; word < 4; ++word) {
    std::uint32_t bits = device();
    for (int nibble = 0; nibble < 8; ++nibble, bits >>= 4) token.push_back(kHex[bits & 0xF]);
  }
  return token;
}

SessionManager::Created SessionManager::create_session(const std::string& dashboard_name, Clock::time_point now) {
  DashboardFactory factory;
  {
    std::lock_guard lock(mutex_);
    auto it = factories_.find(dashboard_name);
    if (it == factories_.end()) throw UnknownDashboard(dashboard_name);
    factory = it->second;
  }
  auto session = std::make_shared<Session>();
  session->dashboard_name = dashboard_name;
  session->dashboard = factory();
  session->created_at = now;
  session->last_active_at = now;
  Value snapshot = serialize_document(session->dashboard->document());

  std::lock_guard lock(mutex_);
  std::string id;
  do {
    id = new_token();
  } while (sessions_.contains(id));
  sessions_.emplace(id, std::move(session));
  return {id, std::move(snapshot)};
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw UnknownSession(session_id);
  return it->second;
}

std::string SessionManager::handle_event(const std::string& session_id, const std::string& message,
                                         Clock::time_point now) {
  const std::shared_ptr<Session> session = find(session_id);
  std::lock_guard serial(session->mutex);
  {
    std::lock_guard lock(mutex_);
    session->last_active_at = now;
  }

  const Value parsed = Value::parse(message, nullptr, false);
  if (parsed.is_discarded()) return error_message("MalformedMessage", "message is not valid JSON").dump();
  try {
    const UiEvent event = event_from_json(parsed);
    return patch_to_json(session->dashboard->input_change(event)).dump();
  } catch (const Error& e) {
    return error_message(e.code(), e.detail()).dump();
  } catch (const std::exception& e) {
    return error_message("InternalError", e.what()).dump();
  }
}

SessionManager::Reply SessionManager::handle_message(const std::string& session_id, const std::string& message,
                                                     Clock::time_point now) {
  try {
    return {handle_event(session_id, message, now), false};
  } catch (const UnknownSession& e) {
    return {error_message(e.code(), e.detail()).dump(), true};
  }
}

Value SessionManager::document(const std::string& session_id) const {
  const std::shared_ptr<Session> session = find(session_id);
  std::lock_guard serial(session->mutex);
  return serialize_document(session->dashboard->document());
}

bool SessionManager::contains(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  return sessions_.contains(session_id);
}

std::size_t SessionManager::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::size_t SessionManager::expire_sessions(Clock::time_point now, std::chrono::seconds ttl) {
  if (ttl.count() == 0) return 0;
  std::vector<std::shared_ptr<Session>> expired;
  {
    std::lock_guard lock(mutex_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (now - it->second->last_active_at > ttl) {
        expired.push_back(std::move(it->second));
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }
  const std::string message = close_message("session expired").dump();
  for (const auto& session : expired) {
    std::map<std::uint64_t, ChannelSink> channels;
    {
      std::lock_guard lock(mutex_);
      channels.swap(session->channels);
    }
    for (const auto& [token, sink] : channels) sink(message);
  }
  return expired.size();
}

std::uint64_t SessionManager::attach_channel(const std::string& session_id, ChannelSink sink) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw UnknownSession(session_id);
  const std::uint64_t token = next_channel_++;
  it->second->channels.emplace(token, std::move(sink));
  return token;
}

void SessionManager::detach_channel(const std::string& session_id, std::uint64_t token) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (it != sessions_.end()) it->second->channels.erase(token);
}

}  // namespace elqa
