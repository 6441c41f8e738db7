#pragma once

// Subprocess predictor speaking newline-delimited JSON over stdin/stdout:
//
//   request:  {"rows": [[x11, x12, ...], ...]}
//   response: {"preds": [y1, ...]}
//
// one request and one response per line, order preserving. POSIX only.

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "permqmc/error.hpp"
#include "permqmc/games.hpp"

namespace permqmc {

class ExternalPredictor final : public Predictor {
 public:
  explicit ExternalPredictor(std::string command,
                             std::chrono::milliseconds timeout = std::chrono::seconds(60))
      : command_(std::move(command)), timeout_(timeout) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
      throw Error(Errc::predictor_error, std::string("socketpair: ") + std::strerror(errno));
    }
    pid_ = ::fork();
    if (pid_ < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw Error(Errc::predictor_error, std::string("fork: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
      // Own process group, so shutdown also reaches anything the shell spawns.
      ::setpgid(0, 0);
      ::close(fds[0]);
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      ::close(fds[1]);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid_, pid_);
    pgid_ = pid_;
    ::close(fds[1]);
    fd_ = fds[0];
  }

  ~ExternalPredictor() override { shutdown(); }
  ExternalPredictor(const ExternalPredictor&) = delete;
  ExternalPredictor& operator=(const ExternalPredictor&) = delete;

  const std::string& command() const noexcept { return command_; }
  std::int64_t round_trips() const noexcept { return round_trips_; }

  std::vector<double> predict(std::span<const Row> rows) override {
    if (fd_ < 0) fail("predictor process is not running");
    nlohmann::json req;
    req["rows"] = nlohmann::json::array();
    for (const auto& r : rows) req["rows"].push_back(r);
    write_all(req.dump() + "\n");
    const std::string line = read_line();
    ++response_line_;
    ++round_trips_;

    nlohmann::json resp;
    try {
      resp = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("malformed response on line " + std::to_string(response_line_) + ": " + e.what());
    }
    if (!resp.is_object() || !resp.contains("preds") || !resp["preds"].is_array()) {
      fail("response line " + std::to_string(response_line_) + " lacks a \"preds\" array");
    }
    const auto& preds = resp["preds"];
    if (preds.size() != rows.size()) {
      fail("response line " + std::to_string(response_line_) + " has " +
           std::to_string(preds.size()) + " predictions for " + std::to_string(rows.size()) +
           " rows");
    }
    std::vector<double> out;
    out.reserve(preds.size());
    for (const auto& p : preds) {
      if (!p.is_number()) {
        fail("non-numeric prediction on response line " + std::to_string(response_line_));
      }
      out.push_back(p.get<double>());
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) {
    throw Error(Errc::predictor_error, "'" + command_ + "': " + msg);
  }

  void write_all(const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(std::string("write failed (") + std::strerror(errno) + ")" + exit_status_note());
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        fail("timed out after " + std::to_string(timeout_.count()) + " ms waiting for line " +
             std::to_string(response_line_ + 1));
      }
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        fail(std::string("poll: ") + std::strerror(errno));
      }
      if (ready == 0) continue;
      char chunk[65536];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(std::string("read: ") + std::strerror(errno));
      }
      if (n == 0) fail("predictor closed its output" + exit_status_note());
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string exit_status_note() {
    if (pid_ <= 0) return "";
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_) {
        pid_ = -1;
        if (WIFEXITED(status)) return "; process exited with status " + std::to_string(WEXITSTATUS(status));
        if (WIFSIGNALED(status)) return "; process killed by signal " + std::to_string(WTERMSIG(status));
        return "";
      }
      ::usleep(10000);
    }
    return "";
  }

  void shutdown() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
    if (pid_ > 0) {
      int status = 0;
      bool reaped = false;
      for (int i = 0; i < 100 && !reaped; ++i) {
        reaped = ::waitpid(pid_, &status, WNOHANG) == pid_;
        if (!reaped) ::usleep(10000);
      }
      if (!reaped) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
      }
      pid_ = -1;
    }
    if (pgid_ > 0) {
      ::kill(-pgid_, SIGKILL);
      pgid_ = -1;
    }
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  pid_t pgid_ = -1;
  int fd_ = -1;
  std::string buffer_;
  std::int64_t response_line_ = 0;
  std::int64_t round_trips_ = 0;
};

inline std::shared_ptr<ExternalPredictor> external_predictor(
    std::string command, std::chrono::milliseconds timeout = std::chrono::seconds(60)) {
  return std::make_shared<ExternalPredictor>(std::move(command), timeout);
}

}  // namespace permqmc
