// SPDX-License-Identifier: Apache-2.0
//
// Child-process plumbing for the supervisor: spawn with optional stdout
// pipe, line reads with deadline (for READY handshakes), liveness checks,
// and signal/terminate/wait helpers. Children die with their parent
// (PR_SET_PDEATHSIG) so a killed supervisor never orphans a simulation.

#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

namespace cosim::proc {

class Child {
 public:
  Child() = default;
  Child(Child&& o) noexcept { *this = std::move(o); }
  Child& operator=(Child&& o) noexcept {
    if (this != &o) {
      close_pipe();
      pid_ = std::exchange(o.pid_, -1);
      out_fd_ = std::exchange(o.out_fd_, -1);
      buf_ = std::move(o.buf_);
    }
    return *this;
  }
  ~Child() {
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      int st;
      ::waitpid(pid_, &st, 0);
    }
    close_pipe();
  }

  static std::optional<Child> spawn(const std::vector<std::string>& argv,
                                    bool pipe_stdout) {
    int fds[2] = {-1, -1};
    if (pipe_stdout && ::pipe(fds) != 0) return std::nullopt;
    pid_t pid = ::fork();
    if (pid < 0) {
      if (pipe_stdout) {
        ::close(fds[0]);
        ::close(fds[1]);
      }
      return std::nullopt;
    }
    if (pid == 0) {
      ::prctl(PR_SET_PDEATHSIG, SIGKILL);
      if (pipe_stdout) {
        ::dup2(fds[1], STDOUT_FILENO);
        ::close(fds[0]);
        ::close(fds[1]);
      }
      std::vector<char*> args;
      for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
      args.push_back(nullptr);
      ::execv(args[0], args.data());
      std::fprintf(stderr, "execv %s: %s\n", args[0], std::strerror(errno));
      ::_exit(127);
    }
    Child c;
    c.pid_ = pid;
    if (pipe_stdout) {
      ::close(fds[1]);
      c.out_fd_ = fds[0];
    }
    return c;
  }

  pid_t pid() const { return pid_; }

  bool alive() const {
    if (pid_ <= 0) return false;
    if (::kill(pid_, 0) != 0) return false;
    int st;
    pid_t r = ::waitpid(pid_, &st, WNOHANG);
    return r == 0;
  }

  void terminate() {
    if (pid_ > 0) ::kill(pid_, SIGTERM);
  }
  void kill_hard() {
    if (pid_ > 0) ::kill(pid_, SIGKILL);
  }

  // Blocks until exit; returns exit code, or 128+signal for signal death.
  int wait() {
    if (pid_ <= 0) return -1;
    int st = 0;
    ::waitpid(pid_, &st, 0);
    pid_ = -1;
    if (WIFEXITED(st)) return WEXITSTATUS(st);
    if (WIFSIGNALED(st)) return 128 + WTERMSIG(st);
    return -1;
  }

  // Waits up to timeout_ms; true and fills *code if the child exited.
  bool wait_for(int timeout_ms, int* code) {
    if (pid_ <= 0) return false;
    for (int waited = 0; waited <= timeout_ms; waited += 10) {
      int st = 0;
      pid_t r = ::waitpid(pid_, &st, WNOHANG);
      if (r == pid_) {
        pid_ = -1;
        *code = WIFEXITED(st) ? WEXITSTATUS(st)
                              : (WIFSIGNALED(st) ? 128 + WTERMSIG(st) : -1);
        return true;
      }
      ::usleep(10000);
    }
    return false;
  }

  // Reads one '\n'-terminated line from the child's stdout pipe.
  std::optional<std::string> read_line(int timeout_ms) {
    if (out_fd_ < 0) return std::nullopt;
    auto flush_line = [this]() -> std::optional<std::string> {
      auto nl = buf_.find('\n');
      if (nl == std::string::npos) return std::nullopt;
      std::string line = buf_.substr(0, nl);
      buf_.erase(0, nl + 1);
      return line;
    };
    if (auto l = flush_line()) return l;
    int waited = 0;
    while (waited <= timeout_ms) {
      pollfd p{out_fd_, POLLIN, 0};
      int r = ::poll(&p, 1, 50);
      waited += 50;
      if (r <= 0) continue;
      char tmp[512];
      ssize_t n = ::read(out_fd_, tmp, sizeof(tmp));
      if (n <= 0) return std::nullopt;  // child closed stdout
      buf_.append(tmp, static_cast<size_t>(n));
      if (auto l = flush_line()) return l;
    }
    return std::nullopt;
  }

 private:
  void close_pipe() {
    if (out_fd_ >= 0) {
      ::close(out_fd_);
      out_fd_ = -1;
    }
  }

  pid_t pid_ = -1;
  int out_fd_ = -1;
  std::string buf_;
};

}  // namespace cosim::proc
