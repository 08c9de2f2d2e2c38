#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <thread>

#include <json.hpp>

#include "rtcal/error.hpp"
#include "rtcal/raytrace.hpp"

extern char** environ;

namespace rtcal {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

json position_json(const LocalPosition& p) { return json::array({p.x_m, p.y_m, p.z_m}); }

}  // namespace

std::string format_external_request(const LocalPosition& tx, const LocalPosition& rx,
                                    double frequency_hz) {
  json req;
  req["tx"] = position_json(tx);
  req["rx"] = position_json(rx);
  req["frequency_hz"] = frequency_hz;
  return req.dump();
}

PathList parse_external_response(std::string_view line, const LocalPosition& tx,
                                 const LocalPosition& rx, double frequency_hz) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error&) {
    throw ExternalModelError("malformed response: not valid JSON");
  }
  if (!doc.is_object() || !doc.contains("paths") || !doc["paths"].is_array()) {
    throw ExternalModelError("malformed response: expected {\"paths\": [...]}");
  }
  PathList list{{}, tx, rx, frequency_hz};
  for (const auto& jp : doc["paths"]) {
    if (!jp.is_object() || !jp.contains("delay_ns") || !jp.contains("power_dbm") ||
        !jp["delay_ns"].is_number() || !jp["power_dbm"].is_number()) {
      throw ExternalModelError("malformed response: each path needs numeric delay_ns and power_dbm");
    }
    list.paths.push_back({jp["delay_ns"].get<double>(), jp["power_dbm"].get<double>(), {}});
  }
  try {
    normalize_path_list(list);
  } catch (const InvalidArgument& e) {
    throw ExternalModelError(std::string("malformed response: ") + e.what());
  }
  return list;
}

struct ExternalModel::Process {
  pid_t pid = -1;
  int fd = -1;  // our end of the socket pair; child sees it as stdin and stdout
  std::string buffer;

  ~Process() { shutdown(); }

  void shutdown() {
    if (fd >= 0) {
      ::close(fd);
      fd = -1;
    }
    if (pid > 0) {
      // Closing the socket delivers EOF; give the child a moment before killing it.
      int status = 0;
      const auto deadline = Clock::now() + std::chrono::milliseconds(500);
      while (::waitpid(pid, &status, WNOHANG) == 0) {
        if (Clock::now() > deadline) {
          ::kill(-pid, SIGKILL);  // the whole group, so children of the shell go too
          ::waitpid(pid, &status, 0);
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
      }
      pid = -1;
    }
  }
};

ExternalModel::ExternalModel(std::string command, double frequency_hz,
                             std::chrono::milliseconds timeout)
    : command_(std::move(command)), frequency_hz_(frequency_hz), timeout_(timeout) {
  if (command_.empty()) throw InvalidArgument("external simulator command is empty");
  if (!(frequency_hz_ > 0.0)) throw InvalidArgument("frequency must be > 0 Hz");
}

ExternalModel::~ExternalModel() = default;

PathList ExternalModel::trace(const LocalPosition& tx, const LocalPosition& rx) const {
  std::lock_guard lock(mutex_);
  if (!process_) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
      throw ExternalModelError(std::string("socketpair failed: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);
    const char* argv[] = {"sh", "-c", command_.c_str(), nullptr};
    pid_t pid = -1;
    const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, &attr, const_cast<char**>(argv), environ);
    posix_spawnattr_destroy(&attr);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    if (rc != 0) {
      ::close(fds[0]);
      throw ExternalModelError("cannot launch external simulator: " + std::string(std::strerror(rc)));
    }
    process_ = std::make_unique<Process>();
    process_->pid = pid;
    process_->fd = fds[0];
  }

  Process& proc = *process_;
  auto fail = [&](const std::string& msg) -> ExternalModelError {
    process_.reset();
    return ExternalModelError("external simulator '" + command_ + "': " + msg);
  };

  const std::string request = format_external_request(tx, rx, frequency_hz_) + "\n";
  std::size_t sent = 0;
  while (sent < request.size()) {
    const ssize_t n = ::send(proc.fd, request.data() + sent, request.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw fail("process exited (write failed)");
    }
    sent += static_cast<std::size_t>(n);
  }

  const auto deadline = Clock::now() + timeout_;
  std::size_t newline;
  while ((newline = proc.buffer.find('\n')) == std::string::npos) {
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (remaining <= 0) throw fail("timed out waiting for a response");
    pollfd pfd{proc.fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(remaining));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(proc.fd, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw fail("process exited before responding");
    proc.buffer.append(chunk, static_cast<std::size_t>(n));
  }
  const std::string line = proc.buffer.substr(0, newline);
  proc.buffer.erase(0, newline + 1);
  try {
    return parse_external_response(line, tx, rx, frequency_hz_);
  } catch (const ExternalModelError& e) {
    throw ExternalModelError("external simulator '" + command_ + "': " + e.what());
  }
}

}  // namespace rtcal
