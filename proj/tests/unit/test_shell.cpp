#include <doctest.h>

#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <sstream>
#include <thread>

#include "picosim/shell.hpp"
#include "support.hpp"

using namespace pico;
using nlohmann::json;

namespace {

std::string saved_fixture(const std::string& name) {
  std::string path = picotest::temp_path(name + "c");
  save_artifact(*picotest::fixture_artifact(name), path);
  return path;
}

CommandResult must(Session& s, std::string_view line) {
  CommandResult r = s.execute_line(line);
  INFO(line, ": ", r.error);
  REQUIRE(r.ok);
  return r;
}

// Minimal line-oriented client for the serve protocol.
class Client {
 public:
  explicit Client(const std::string& path) {
    fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    std::strncpy(addr.sun_path, path.c_str(), sizeof(addr.sun_path) - 1);
    for (int tries = 0; tries < 200; ++tries) {
      if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    FAIL("cannot connect to " << path);
  }
  ~Client() { ::close(fd_); }

  void send(const json& j) {
    std::string line = j.dump() + "\n";
    REQUIRE(::write(fd_, line.data(), line.size()) == static_cast<ssize_t>(line.size()));
  }

  // Next line, or a null json after the timeout.
  json next(int timeout_ms = 5000) {
    for (;;) {
      auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return json::parse(line);
      }
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, timeout_ms) <= 0) return nullptr;
      char chunk[4096];
      ssize_t n = ::read(fd_, chunk, sizeof(chunk));
      if (n <= 0) return nullptr;
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  // Skips events until the reply carrying `id`; events seen are collected.
  json reply(int id, std::vector<json>* events = nullptr) {
    for (;;) {
      json j = next();
      if (j.is_null()) return j;
      if (j.contains("event")) {
        if (events) events->push_back(j);
        continue;
      }
      if (j.value("id", json()) == id) return j;
    }
  }

 private:
  int fd_ = -1;
  std::string buf_;
};

}  // namespace

TEST_CASE("text and json command forms") {
  Command c = parse_command_text("  PROBE add \"assert s lt 4\"  ");
  CHECK(c.verb == "probe");
  CHECK(c.args == std::vector<std::string>{"add", "assert s lt 4"});
  CHECK(parse_command_text(command_text(c)).args == c.args);

  Command a = parse_command_json(json::parse(R"({"id": 3, "verb": "util", "args": ["sig1", "0", "64"]})"));
  Command b = parse_command_json(json::parse(R"({"id": 3, "verb": "util", "args": {"signal": "sig1", "from": 0, "to": 64}})"));
  Command t = parse_command_json(json::parse(R"({"id": 3, "verb": "util", "signal": "sig1", "from": 0, "to": 64})"));
  CHECK(a.args == b.args);
  CHECK(a.args == t.args);
  CHECK(a.id == 3);
  Command bind = parse_command_json(json::parse(R"({"verb": "bind", "dir": "in", "path": "x.txt", "signal": "input"})"));
  CHECK(bind.args == std::vector<std::string>{"in=x.txt:input"});
  CHECK_THROWS_AS(parse_command_json(json::parse(R"({"args": []})")), ProtocolError);
  CHECK(is_state_changing(parse_command_text("break add top/c 2")));
  CHECK_FALSE(is_state_changing(parse_command_text("break list")));
  CHECK_FALSE(is_state_changing(parse_command_text("status")));
}

TEST_CASE("step and status") {
  Session s(saved_fixture("producer_consumer.pg"));
  json r = must(s, "step 5").data;
  CHECK(r["cycles_run"] == 5);
  CHECK(r["cycle"] == 5);
  json st = must(s, "status").data;
  CHECK(st["cycle"] == 5);
  CHECK(st["instances"].size() == 2);
  CHECK(must(s, "run 1000").data["reason"] == "all_halted");
  CommandResult again = s.execute_line("step");
  CHECK_FALSE(again.ok);
  CHECK(again.error_type == "EngineHalted");
  CHECK(again.to_json(7)["error"]["type"] == "EngineHalted");
  CHECK(again.to_json(7)["id"] == 7);
  must(s, "load");
  CHECK(s.state().cycle == 0);
}

TEST_CASE("errors are values") {
  Session empty;
  CHECK(empty.execute_line("status").error_type == "NotLoaded");
  CHECK(empty.execute_line("frobnicate").error_type == "UnknownVerb");
  Session s(saved_fixture("producer_consumer.pg"));
  CHECK(s.execute_line("util nope").error_type == "UnknownSignal");
  CHECK(s.execute_line("inspect top/zz").error_type == "UnknownInstance");
  CHECK(s.execute_line("hierarchy top/zz").error_type == "UnknownScope");
  CHECK(s.execute_line("subscribe").error_type == "ProtocolError");
  CHECK(s.journal().size() == 1);
}

TEST_CASE("breakpoints stop and resume") {
  Session s(saved_fixture("producer_consumer.pg"));
  must(s, "break add c 2");
  json r = must(s, "run 100").data;
  CHECK(r["reason"] == "breakpoint");
  CHECK(r["breakpoint"]["instance"] == "top/c");
  std::uint64_t first = r["cycle"];
  json r2 = must(s, "run 100").data;
  CHECK(r2["reason"] == "breakpoint");
  CHECK(r2["cycle"].get<std::uint64_t>() > first);
  CHECK(must(s, "inspect c").data["pc"] == 2);
  must(s, "break remove c 2");
  CHECK(must(s, "run 100").data["reason"] == "all_halted");
}

TEST_CASE("probe added mid-session leaves the prior trace unchanged") {
  std::string path = saved_fixture("chain3.pg");
  Session plain(path);
  Session probed(path);
  std::string t0 = picotest::temp_path("mid_plain.trace");
  std::string t1 = picotest::temp_path("mid_probed.trace");
  must(plain, "trace on " + t0);
  must(probed, "trace on " + t1);
  must(plain, "run 40");
  must(probed, "run 40");
  json added = must(probed, "probe add trace s2").data;
  CHECK(added["probe"] == "probe0");
  must(plain, "run 60");
  must(probed, "run 60");
  must(plain, "trace off");
  must(probed, "trace off");
  auto drop_probe = [](const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
      if (line.find("probe0") == std::string::npos) out.push_back(line);
    }
    return out;
  };
  CHECK(drop_probe(picotest::read_file(t0)) == drop_probe(picotest::read_file(t1)));
  json report = must(probed, "probe report").data;
  CHECK(report[0]["observations"].get<int>() > 0);
  json with = snapshot(probed.state())["elements"];
  REQUIRE(with.size() == 4);
  with.erase(3);
  CHECK(snapshot(plain.state())["elements"] == with);
}

TEST_CASE("inspect shows registers and the next instruction") {
  Session s(saved_fixture("producer_consumer.pg"));
  must(s, "step 3");
  json j = must(s, "inspect top/p").data;
  CHECK(j["path"] == "top/p");
  CHECK(j["kind"] == "program");
  CHECK(j.contains("next"));
  CHECK(j["registers"].size() == kNumRegisters);
}

TEST_CASE("scripts: utilization and repeat blocks") {
  Session s;
  std::string pgc = saved_fixture("saturated.pg");
  auto tr = run_script(s, "load " + pgc + "\nrun 1000\nutil sig1 64 1000\n");
  REQUIRE(tr.size() == 3);
  CHECK(tr[2].result.data["utilization"] == 1.0);

  Session a(pgc);
  run_script(a, "repeat 3 { step 10 }\n");
  CHECK(a.state().cycle == 30);
  Session b(pgc);
  run_script(b, "# three steps\nrepeat 3 {\n  step 10\n}\n");
  CHECK(b.state().cycle == 30);
  Session c(pgc);
  run_script(c, "repeat 2 { step 1; step 2 }\n");
  CHECK(c.state().cycle == 6);
}

TEST_CASE("scripts are parsed before anything runs") {
  Session s(saved_fixture("saturated.pg"));
  try {
    run_script(s, "step 1\nstep 2\n# fine\nfrobnicate\nstep 3\n");
    FAIL("expected ScriptError");
  } catch (const ScriptError& e) {
    CHECK(e.line() == 4);
    CHECK(e.transcript().empty());
  }
  CHECK(s.state().cycle == 0);
  CHECK_THROWS_AS(run_script(s, "repeat 2 {\nstep\n"), ScriptError);
}

TEST_CASE("script errors stop unless tried") {
  Session s(saved_fixture("saturated.pg"));
  auto tr = run_script(s, "try util nope\nstep 4\n");
  REQUIRE(tr.size() == 2);
  CHECK_FALSE(tr[0].result.ok);
  CHECK(s.state().cycle == 4);
  try {
    run_script(s, "step 1\nutil nope\nstep 1\n");
    FAIL("expected ScriptError");
  } catch (const ScriptError& e) {
    CHECK(e.line() == 2);
    CHECK(e.transcript().size() == 2);
  }
  CHECK(s.state().cycle == 5);
}

TEST_CASE("journal replay reproduces the state") {
  std::string pgc = saved_fixture("file_pipeline.pg");
  std::string in = picotest::temp_path("journal_in.txt");
  { std::ofstream(in) << "3\n1\n4\n1\n5\n"; }
  Session s(pgc);
  must(s, "step 7");
  must(s, "bind in=" + in + ":input");
  must(s, "break add id 1");
  must(s, "run 50");
  must(s, "probe add trace output");
  must(s, "status");
  must(s, "run 200");
  std::string journal = picotest::temp_path("session.journal");
  must(s, "journal " + journal);

  Session replay;
  run_script(replay, picotest::read_file(journal));
  CHECK(snapshot(replay.state()) == snapshot(s.state()));
}

TEST_CASE("protocol replies match the session") {
  std::string pgc = saved_fixture("ring3.pg");
  Session direct(pgc);
  Session served(pgc);
  Server server(served, picotest::temp_path("unused.sock"));
  json scc_reply = json::parse(server.handle_line(R"({"id": 1, "verb": "scc"})"));
  CHECK(scc_reply["ok"] == true);
  CHECK(scc_reply["data"] == must(direct, "scc").data);
  json step = json::parse(server.handle_line(R"({"id": "x", "verb": "step", "args": [5]})"));
  CHECK(step["id"] == "x");
  CHECK(step["data"]["cycle"] == 5);
  json bad = json::parse(server.handle_line("{not json"));
  CHECK(bad["ok"] == false);
  CHECK(bad["id"].is_null());
  CHECK(bad["error"]["type"] == "ProtocolError");
  json unknown = json::parse(server.handle_line(R"({"id": 2, "verb": "dance"})"));
  CHECK(unknown["error"]["type"] == "UnknownVerb");
}

TEST_CASE("socket server: controller lock and events") {
  std::string pgc = saved_fixture("producer_consumer.pg");
  std::string sock = picotest::temp_path("shell_test.sock");
  ::unlink(sock.c_str());
  Session session(pgc);
  Server server(session, "unix:" + sock);
  server.listen();
  std::thread loop([&] { server.serve(); });
  {
    Client a(sock);
    Client b(sock);
    a.send({{"id", 1}, {"verb", "subscribe"}});
    CHECK(a.reply(1)["ok"] == true);
    a.send({{"id", 2}, {"verb", "step"}, {"args", {3}}});
    std::vector<json> events;
    json r = a.reply(2, &events);
    CHECK(r["data"]["cycle"] == 3);
    // The status event may trail the reply.
    while (events.empty()) {
      json e = a.next();
      if (e.is_null()) break;
      events.push_back(e);
    }
    REQUIRE_FALSE(events.empty());
    CHECK(events[0]["event"] == "status");
    CHECK(events[0]["data"]["cycle"] == 3);

    b.send({{"id", 3}, {"verb", "step"}});
    json denied = b.reply(3);
    CHECK(denied["ok"] == false);
    CHECK(denied["error"]["type"] == "ProtocolError");
    b.send({{"id", 4}, {"verb", "status"}});
    CHECK(b.reply(4)["data"]["cycle"] == 3);

    a.send({{"id", 5}, {"verb", "run"}, {"args", {1000}}});
    CHECK(a.reply(5)["data"]["reason"] == "all_halted");
    a.send({{"id", 6}, {"verb", "step"}});
    CHECK(a.reply(6)["error"]["type"] == "EngineHalted");
  }
  {
    // The first client's lock went with its connection.
    Client c(sock);
    c.send({{"id", 7}, {"verb", "load"}});
    CHECK(c.reply(7)["ok"] == true);
    c.send({{"id", 8}, {"verb", "quit"}});
    c.reply(8);
  }
  loop.join();
  CHECK(session.state().cycle == 0);
}
