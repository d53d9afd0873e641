#pragma once

// Synchronous HTTP + WebSocket client that plays the browser's part: it
// bootstraps a session, keeps a local copy of the document and applies every
// patch it receives.

#include <chrono>
#include <optional>
#include <string>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "elqa/document.hpp"

namespace headless {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct HttpReply {
  unsigned status = 0;
  std::string content_type;
  std::string body;
};

inline HttpReply request(unsigned short port, http::verb verb, const std::string& target) {
  net::io_context ioc;
  tcp::resolver resolver(ioc);
  beast::tcp_stream stream(ioc);
  stream.expires_after(std::chrono::seconds(30));
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  req.prepare_payload();
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {res.result_int(), std::string(res[http::field::content_type]), res.body()};
}

class Client {
 public:
  /// POSTs /api/session and opens /ws for the new session.
  Client(unsigned short port, const std::string& dashboard) : port_(port), ws_(ioc_) {
    const HttpReply reply = request(port, http::verb::post, "/api/session?dashboard=" + dashboard);
    if (reply.status != 200) throw std::runtime_error("session bootstrap failed: " + reply.body);
    const elqa::Value body = elqa::Value::parse(reply.body);
    session_id_ = body.at("session_id").get<std::string>();
    bootstrap_ = elqa::deserialize_document(body.at("document"));
    local_ = bootstrap_;
    connect(session_id_);
  }

  /// Opens /ws for an arbitrary (possibly unknown) session id.
  Client(unsigned short port, const std::string& session_id, bool) : port_(port), ws_(ioc_) {
    session_id_ = session_id;
    connect(session_id);
  }

  void send(const elqa::UiEvent& event) { send_raw(elqa::event_to_json(event).dump()); }
  void send_raw(const std::string& text) { ws_.write(net::buffer(text)); }

  /// Next server message; nullopt once the server has closed the channel.
  std::optional<elqa::Value> receive() {
    beast::flat_buffer buffer;
    beast::error_code ec;
    ws_.read(buffer, ec);
    if (ec) return std::nullopt;
    return elqa::Value::parse(beast::buffers_to_string(buffer.data()));
  }

  /// Receives one message and, when it is a patch, applies it locally.
  elqa::Value receive_and_apply() {
    auto message = receive();
    if (!message) throw std::runtime_error("channel closed");
    if (message->at("kind") == "patch") local_ = elqa::apply_patch(local_, elqa::patch_from_json(*message));
    return *message;
  }

  const std::string& session_id() const { return session_id_; }
  const elqa::Document& bootstrap() const { return bootstrap_; }
  const elqa::Document& local() const { return local_; }

 private:
  void connect(const std::string& session_id) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port_)));
    ws_.handshake("127.0.0.1:" + std::to_string(port_), "/ws?session=" + session_id);
    ws_.text(true);
  }

  unsigned short port_;
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
  std::string session_id_;
  elqa::Document bootstrap_;
  elqa::Document local_;
};

}  // namespace headless
