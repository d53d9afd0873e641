#include "elqa/http_server.hpp"

#include <deque>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>
#include <vector>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "elqa/error.hpp"

namespace elqa {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

constexpr const char* kBuiltinPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>ELQA cleansing</title></head>
<body>
<h1>ELQA cleansing server</h1>
<p>The browser client bundle is not installed. Start the server with
<code>--static-dir</code> pointing at the built client, or talk to the API directly:</p>
<ul>
<li><code>POST /api/session?dashboard=cleansing</code></li>
<li><code>GET /api/session/document?session=ID</code></li>
<li><code>WS /ws?session=ID</code></li>
</ul>
</body></html>
)";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string percent_decode(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '%' && i + 2 < text.size()) {
      const int hi = hex_value(text[i + 1]);
      const int lo = hex_value(text[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
        continue;
      }
    }
    out.push_back(text[i] == '+' ? ' ' : text[i]);
  }
  return out;
}

std::string_view mime_type(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

struct Target {
  std::string path;
  std::map<std::string, std::string> query;
};

Target split_target(beast::string_view raw) {
  const std::string_view target(raw.data(), raw.size());
  const auto q = target.find('?');
  if (q == std::string_view::npos) return {std::string(target), {}};
  return {std::string(target.substr(0, q)), parse_query(target.substr(q + 1))};
}

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

Response make_response(const Request& req, http::status status, std::string_view content_type, std::string body) {
  Response res{status, req.version()};
  res.set(http::field::server, "elqa");
  res.set(http::field::content_type, beast::string_view(content_type.data(), content_type.size()));
  res.set(http::field::cache_control, "no-store");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

Response json_response(const Request& req, http::status status, const Value& body) {
  return make_response(req, status, "application/json", body.dump());
}

Response json_error(const Request& req, http::status status, std::string_view code, std::string_view detail) {
  return json_response(req, status, {{"code", code}, {"detail", detail}});
}

// --- WebSocket channel ------------------------------------------------------

class WsChannel : public std::enable_shared_from_this<WsChannel> {
 public:
  WsChannel(tcp::socket&& socket, SessionManager& sessions) : ws_(std::move(socket)), sessions_(sessions) {}

  ~WsChannel() {
    if (channel_) sessions_.detach_channel(session_id_, channel_);
  }

  void run(Request req) {
    const Target target = split_target(req.target());
    if (auto it = target.query.find("session"); it != target.query.end()) session_id_ = it->second;
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsChannel::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    ws_.text(true);
    try {
      std::weak_ptr<WsChannel> weak = weak_from_this();
      auto executor = ws_.get_executor();
      channel_ = sessions_.attach_channel(session_id_, [weak, executor](const std::string& message) {
        net::post(executor, [weak, message] {
          if (auto self = weak.lock()) self->send(message, true);
        });
      });
    } catch (const UnknownSession& e) {
      send(error_message(e.code(), e.detail()).dump(), true);
      return;
    }
    do_read();
  }

  void do_read() { ws_.async_read(buffer_, beast::bind_front_handler(&WsChannel::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) return;  // closed by peer or by us
    std::string message = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    SessionManager::Reply reply = sessions_.handle_message(session_id_, message);
    send(std::move(reply.message), reply.close_channel);
    if (!reply.close_channel) do_read();
  }

  void send(std::string message, bool close_after) {
    if (close_pending_) return;
    close_pending_ = close_after;
    queue_.push_back(std::move(message));
    if (queue_.size() == 1) do_write();
  }

  void do_write() {
    ws_.async_write(net::buffer(queue_.front()),
                    beast::bind_front_handler(&WsChannel::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) return;
    queue_.pop_front();
    if (!queue_.empty()) {
      do_write();
    } else if (close_pending_) {
      ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  SessionManager& sessions_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  std::string session_id_;
  std::uint64_t channel_ = 0;
  bool close_pending_ = false;
};

// --- plain HTTP -------------------------------------------------------------

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, SessionManager& sessions, const std::filesystem::path& static_dir)
      : stream_(std::move(socket)), sessions_(sessions), static_dir_(static_dir) {}

  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpConnection::do_read, shared_from_this()));
  }

 private:
  void do_read() {
    request_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, request_,
                     beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;

    if (websocket::is_upgrade(request_) && split_target(request_.target()).path == "/ws") {
      stream_.expires_never();
      std::make_shared<WsChannel>(stream_.release_socket(), sessions_)->run(std::move(request_));
      return;
    }
    response_ = std::make_shared<Response>(route(request_));
    http::async_write(stream_, *response_,
                      beast::bind_front_handler(&HttpConnection::on_write, shared_from_this(), response_->need_eof()));
  }

  void on_write(bool close, beast::error_code ec, std::size_t) {
    if (ec) return;
    if (close) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    response_.reset();
    do_read();
  }

  Response route(const Request& req) {
    const Target target = split_target(req.target());
    try {
      if (target.path == "/healthz" && req.method() == http::verb::get) {
        return make_response(req, http::status::ok, "text/plain", "ok");
      }
      if (target.path == "/api/session" && req.method() == http::verb::post) {
        auto it = target.query.find("dashboard");
        if (it == target.query.end()) {
          return json_error(req, http::status::bad_request, "BadRequest", "dashboard parameter missing");
        }
        auto created = sessions_.create_session(it->second);
        return json_response(req, http::status::ok,
                             {{"session_id", created.session_id}, {"document", std::move(created.document)}});
      }
      if (target.path == "/api/session/document" && req.method() == http::verb::get) {
        auto it = target.query.find("session");
        if (it == target.query.end()) {
          return json_error(req, http::status::bad_request, "BadRequest", "session parameter missing");
        }
        return json_response(req, http::status::ok, {{"document", sessions_.document(it->second)}});
      }
      if (req.method() == http::verb::get || req.method() == http::verb::head) return serve_static(req, target.path);
      return json_error(req, http::status::method_not_allowed, "MethodNotAllowed", std::string(req.method_string()));
    } catch (const UnknownDashboard& e) {
      return json_error(req, http::status::not_found, e.code(), e.detail());
    } catch (const UnknownSession& e) {
      return json_error(req, http::status::not_found, e.code(), e.detail());
    } catch (const Error& e) {
      return json_error(req, http::status::internal_server_error, e.code(), e.detail());
    } catch (const std::exception& e) {
      return json_error(req, http::status::internal_server_error, "InternalError", e.what());
    }
  }

  Response serve_static(const Request& req, const std::string& path) {
    if (static_dir_.empty()) {
      if (path == "/" || path == "/index.html") {
        return make_response(req, http::status::ok, "text/html; charset=utf-8", kBuiltinPage);
      }
      return make_response(req, http::status::not_found, "text/plain", "not found");
    }
    std::filesystem::path relative = path == "/" ? "index.html" : path.substr(1);
    for (const auto& part : relative) {
      if (part == "..") return make_response(req, http::status::bad_request, "text/plain", "bad path");
    }
    const auto file = static_dir_ / relative;
    std::ifstream in(file, std::ios::binary);
    if (!in) return make_response(req, http::status::not_found, "text/plain", "not found");
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return make_response(req, http::status::ok, mime_type(file), std::move(body));
  }

  beast::tcp_stream stream_;
  SessionManager& sessions_;
  const std::filesystem::path& static_dir_;
  beast::flat_buffer buffer_;
  Request request_;
  std::shared_ptr<Response> response_;
};

}  // namespace

std::map<std::string, std::string> parse_query(std::string_view query) {
  std::map<std::string, std::string> out;
  while (!query.empty()) {
    const auto amp = query.find('&');
    const std::string_view pair = query.substr(0, amp);
    query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
    if (pair.empty()) continue;
    const auto eq = pair.find('=');
    if (eq == std::string_view::npos) {
      out[percent_decode(pair)] = "";
    } else {
      out[percent_decode(pair.substr(0, eq))] = percent_decode(pair.substr(eq + 1));
    }
  }
  return out;
}

// --- server -----------------------------------------------------------------

struct HttpServer::Impl {
  Impl(SessionManager& s, ServerOptions o) : sessions(s), options(std::move(o)), acceptor(ioc), sweeper(ioc) {}

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec == net::error::operation_aborted) return;
      if (!ec) std::make_shared<HttpConnection>(std::move(socket), sessions, options.static_dir)->run();
      accept();
    });
  }

  void schedule_sweep() {
    sweeper.expires_after(options.sweep_interval);
    sweeper.async_wait([this](beast::error_code ec) {
      if (ec) return;
      sessions.expire_sessions(SessionManager::Clock::now(), options.session_ttl);
      schedule_sweep();
    });
  }

  SessionManager& sessions;
  ServerOptions options;
  net::io_context ioc;
  tcp::acceptor acceptor;
  net::steady_timer sweeper;
  std::vector<std::thread> workers;
};

HttpServer::HttpServer(SessionManager& sessions, ServerOptions options)
    : impl_(std::make_unique<Impl>(sessions, std::move(options))) {}

HttpServer::~HttpServer() {
  stop();
  wait();
}

void HttpServer::start() {
  beast::error_code ec;
  const auto address = net::ip::make_address(impl_->options.address, ec);
  if (ec) throw IoError("bad address " + impl_->options.address);
  const tcp::endpoint endpoint{address, impl_->options.port};
  auto& acceptor = impl_->acceptor;
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw IoError("cannot listen on " + impl_->options.address + ":" + std::to_string(impl_->options.port) +
                        ": " + ec.message());
  impl_->accept();
  if (impl_->options.sweep_interval.count() > 0) impl_->schedule_sweep();
  const unsigned n = std::max(1u, impl_->options.threads);
  for (unsigned i = 0; i < n; ++i) impl_->workers.emplace_back([this] { impl_->ioc.run(); });
}

unsigned short HttpServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void HttpServer::stop() { impl_->ioc.stop(); }

void HttpServer::wait() {
  for (auto& t : impl_->workers) {
    if (t.joinable()) t.join();
  }
  impl_->workers.clear();
}

}  // namespace elqa
