#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "picosim/shell.hpp"

namespace pico {

using nlohmann::json;

namespace {

bool write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

std::string error_reply(const json& id, const std::exception& e) {
  CommandResult r;
  r.ok = false;
  r.error_type = error_type_name(e);
  r.error = e.what();
  return r.to_json(id).dump();
}

}  // namespace

struct Server::Impl {
  struct Connection {
    int fd = -1;
    int id = 0;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::pair<bool, std::string>> out;  // (is event, line)
    std::size_t queued_events = 0;
    std::uint64_t dropped = 0;
    bool subscribed = false;
    bool closed = false;
    std::thread reader;
    std::thread writer;

    void push(std::string line, bool event) {
      std::lock_guard lock(mu);
      if (closed) return;
      if (event) {
        if (queued_events >= kEventQueueLimit) {
          for (auto it = out.begin(); it != out.end(); ++it) {
            if (it->first) {
              out.erase(it);
              --queued_events;
              ++dropped;
              break;
            }
          }
        }
        ++queued_events;
      }
      out.emplace_back(event, std::move(line));
      cv.notify_one();
    }
  };

  struct Request {
    std::shared_ptr<Connection> conn;
    std::string line;
    bool disconnect = false;
  };

  Session& session;
  std::string endpoint;
  int listen_fd = -1;
  std::string unix_path;
  std::atomic<bool> running{false};
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Request> queue;
  std::vector<std::shared_ptr<Connection>> conns;
  int next_id = 1;
  int controller = 0;
  std::thread acceptor;

  Impl(Session& s, std::string ep) : session(s), endpoint(std::move(ep)) {}

  std::string handle(const std::shared_ptr<Connection>& conn, std::string_view line) {
    json req;
    try {
      req = json::parse(line);
    } catch (const json::exception& e) {
      return error_reply(nullptr, ProtocolError(std::string("malformed JSON: ") + e.what()));
    }
    json id = req.is_object() && req.contains("id") ? req["id"] : json(nullptr);
    try {
      Command cmd = parse_command_json(req);
      if (cmd.verb == "subscribe") {
        if (!conn) throw ProtocolError("subscribe needs a connection");
        bool trace = !cmd.args.empty() && cmd.args[0] == "trace";
        {
          std::lock_guard lock(conn->mu);
          conn->subscribed = true;
        }
        if (trace) session.set_trace_forwarding(true);
        CommandResult r;
        r.data = {{"subscribed", true}, {"trace", trace}};
        return r.to_json(id).dump();
      }
      if (conn && (is_state_changing(cmd) || cmd.verb == "quit")) {
        if (controller == 0) controller = conn->id;
        if (controller != conn->id) throw ProtocolError("another client holds the controller lock");
      }
      CommandResult r = session.execute(cmd);
      if (session.quit_requested()) running = false;
      return r.to_json(id).dump();
    } catch (const std::exception& e) {
      return error_reply(id, e);
    }
  }

  void broadcast(const json& event) {
    std::string line = event.dump();
    std::lock_guard lock(mu);
    for (auto& c : conns) {
      bool want;
      {
        std::lock_guard clock(c->mu);
        want = c->subscribed && !c->closed;
      }
      if (want) c->push(line, true);
    }
  }

  void read_loop(std::shared_ptr<Connection> conn) {
    std::string buf;
    char chunk[4096];
    for (;;) {
      ssize_t n = ::recv(conn->fd, chunk, sizeof chunk, 0);
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = buf.find('\n')) != std::string::npos) {
        std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::lock_guard lock(mu);
        queue.push_back({conn, std::move(line)});
        cv.notify_one();
      }
    }
    std::lock_guard lock(mu);
    queue.push_back({conn, {}, true});
    cv.notify_one();
  }

  void write_loop(std::shared_ptr<Connection> conn) {
    for (;;) {
      std::string line;
      std::uint64_t dropped = 0;
      {
        std::unique_lock lock(conn->mu);
        conn->cv.wait(lock, [&] { return conn->closed || !conn->out.empty(); });
        if (conn->out.empty()) return;
        auto [event, text] = std::move(conn->out.front());
        conn->out.pop_front();
        if (event) --conn->queued_events;
        line = std::move(text);
        dropped = std::exchange(conn->dropped, 0);
      }
      if (dropped) {
        json warn = {{"event", "warning"}, {"data", {{"dropped_events", dropped}}}};
        if (!write_all(conn->fd, warn.dump() + "\n")) return;
      }
      if (!write_all(conn->fd, line + "\n")) return;
    }
  }

  void close_connection(const std::shared_ptr<Connection>& conn) {
    {
      std::lock_guard lock(conn->mu);
      conn->closed = true;
      conn->cv.notify_all();
    }
    ::shutdown(conn->fd, SHUT_RDWR);
    if (conn->reader.joinable() && conn->reader.get_id() != std::this_thread::get_id()) conn->reader.join();
    if (conn->writer.joinable()) conn->writer.join();
    ::close(conn->fd);
    if (controller == conn->id) controller = 0;
  }

  void accept_loop() {
    while (running) {
      pollfd p{listen_fd, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0) continue;
      int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) continue;
      auto conn = std::make_shared<Connection>();
      conn->fd = fd;
      std::lock_guard lock(mu);
      conn->id = next_id++;
      conns.push_back(conn);
      conn->reader = std::thread([this, conn] { read_loop(conn); });
      conn->writer = std::thread([this, conn] { write_loop(conn); });
    }
  }
};

Server::Server(Session& session, std::string endpoint)
    : impl_(std::make_unique<Impl>(session, std::move(endpoint))) {}

Server::~Server() {
  stop();
  if (impl_->listen_fd >= 0) ::close(impl_->listen_fd);
  if (!impl_->unix_path.empty()) ::unlink(impl_->unix_path.c_str());
}

std::string Server::listen() {
  Impl& s = *impl_;
  std::string ep = s.endpoint;
  if (ep.rfind("tcp:", 0) == 0) {
    std::string rest = ep.substr(4);
    auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw BadSpec("tcp endpoint must be tcp:host:port");
    std::string host = rest.substr(0, colon);
    std::string port = rest.substr(colon + 1);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || !res) throw BadSpec("cannot resolve " + host);
    s.listen_fd = ::socket(res->ai_family, res->ai_socktype, 0);
    int one = 1;
    ::setsockopt(s.listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    int rc = ::bind(s.listen_fd, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc != 0) throw Error("cannot bind " + ep + ": " + std::strerror(errno));
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(s.listen_fd, reinterpret_cast<sockaddr*>(&bound), &len);
    ep = "tcp:" + host + ":" + std::to_string(ntohs(bound.sin_port));
  } else {
    std::string path = ep.rfind("unix:", 0) == 0 ? ep.substr(5) : ep;
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof addr.sun_path) throw BadSpec("socket path too long: " + path);
    std::strncpy(addr.sun_path, path.c_str(), sizeof addr.sun_path - 1);
    ::unlink(path.c_str());
    s.listen_fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (::bind(s.listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
      throw Error("cannot bind " + path + ": " + std::strerror(errno));
    }
    s.unix_path = path;
    ep = "unix:" + path;
  }
  if (::listen(s.listen_fd, 16) != 0) throw Error(std::string("listen failed: ") + std::strerror(errno));
  s.running = true;
  return ep;
}

void Server::serve() {
  Impl& s = *impl_;
  if (s.listen_fd < 0) listen();
  s.session.set_event_callback([&s](const json& event) { s.broadcast(event); });
  s.acceptor = std::thread([&s] { s.accept_loop(); });
  while (s.running) {
    Impl::Request req;
    {
      std::unique_lock lock(s.mu);
      s.cv.wait_for(lock, std::chrono::milliseconds(100), [&] { return !s.queue.empty(); });
      if (s.queue.empty()) continue;
      req = std::move(s.queue.front());
      s.queue.pop_front();
    }
    if (req.disconnect) {
      std::shared_ptr<Impl::Connection> conn = req.conn;
      {
        std::lock_guard lock(s.mu);
        std::erase(s.conns, conn);
      }
      s.close_connection(conn);
      continue;
    }
    std::string reply = s.handle(req.conn, req.line);
    req.conn->push(std::move(reply), false);
  }
  if (s.acceptor.joinable()) s.acceptor.join();
  std::vector<std::shared_ptr<Impl::Connection>> conns;
  {
    std::lock_guard lock(s.mu);
    conns.swap(s.conns);
  }
  for (auto& c : conns) {
    // Let queued replies drain before closing.
    for (int spin = 0; spin < 50; ++spin) {
      {
        std::lock_guard lock(c->mu);
        if (c->out.empty()) break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    s.close_connection(c);
  }
  s.session.set_event_callback(nullptr);
}

void Server::stop() { impl_->running = false; }

std::string Server::handle_line(std::string_view line) { return impl_->handle(nullptr, line); }

}  // namespace pico
