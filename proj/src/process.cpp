#include "mmv/process.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <mutex>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "mmv/error.hpp"

extern char** environ;

namespace mmv {

namespace {

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { std::signal(SIGPIPE, SIG_IGN); });
}

void close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

int remaining_ms(std::chrono::steady_clock::time_point until) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(until - std::chrono::steady_clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(left.count());
}

}  // namespace

ChildProcess::ChildProcess(ChildProcess&& other) noexcept { *this = std::move(other); }

ChildProcess& ChildProcess::operator=(ChildProcess&& other) noexcept {
  if (this != &other) {
    if (running()) {
      kill();
      wait();
    }
    close_fds();
    pid_ = std::exchange(other.pid_, -1);
    in_fd_ = std::exchange(other.in_fd_, -1);
    out_fd_ = std::exchange(other.out_fd_, -1);
    err_fd_ = std::exchange(other.err_fd_, -1);
    out_buffer_ = std::move(other.out_buffer_);
  }
  return *this;
}

ChildProcess::~ChildProcess() {
  close_fds();
  if (running()) {
    kill();
    wait();
  }
}

void ChildProcess::close_fds() {
  close_fd(in_fd_);
  close_fd(out_fd_);
  close_fd(err_fd_);
}

ChildProcess ChildProcess::spawn(const std::vector<std::string>& argv, bool capture_stderr) {
  if (argv.empty()) throw Error(Errc::TransportError, "empty command line");
  ignore_sigpipe_once();

  int in_pipe[2], out_pipe[2], err_pipe[2] = {-1, -1};
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0 || (capture_stderr && ::pipe(err_pipe) != 0)) {
    throw Error(Errc::TransportError, std::string("pipe: ") + std::strerror(errno));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  if (capture_stderr) posix_spawn_file_actions_adddup2(&actions, err_pipe[1], STDERR_FILENO);
  for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) {
    if (fd >= 0) posix_spawn_file_actions_addclose(&actions, fd);
  }

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  pid_t pid = -1;
  const int rc = posix_spawnp(&pid, cargv[0], &actions, nullptr, cargv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (capture_stderr) ::close(err_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    if (capture_stderr) ::close(err_pipe[0]);
    throw Error(Errc::TransportError, "cannot start '" + argv[0] + "': " + std::strerror(rc));
  }

  ChildProcess child;
  child.pid_ = pid;
  child.in_fd_ = in_pipe[1];
  child.out_fd_ = out_pipe[0];
  child.err_fd_ = capture_stderr ? err_pipe[0] : -1;
  return child;
}

void ChildProcess::write_all(std::string_view data) {
  if (in_fd_ < 0) throw Error(Errc::TransportError, "child stdin is closed");
  while (!data.empty()) {
    const ssize_t n = ::write(in_fd_, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::TransportError, std::string("write to child: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void ChildProcess::close_stdin() { close_fd(in_fd_); }

std::optional<std::string> ChildProcess::read_line(std::chrono::milliseconds deadline) {
  const auto until = std::chrono::steady_clock::now() + deadline;
  for (;;) {
    if (auto nl = out_buffer_.find('\n'); nl != std::string::npos) {
      std::string line = out_buffer_.substr(0, nl);
      out_buffer_.erase(0, nl + 1);
      return line;
    }
    if (out_fd_ < 0) return std::nullopt;
    pollfd pfd{out_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, remaining_ms(until));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::TransportError, std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) throw Error(Errc::TransportError, "read deadline exceeded");
    char buf[8192];
    const ssize_t n = ::read(out_fd_, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::TransportError, std::string("read from child: ") + std::strerror(errno));
    }
    if (n == 0) {
      close_fd(out_fd_);
      if (out_buffer_.empty()) return std::nullopt;
      return std::exchange(out_buffer_, {});
    }
    out_buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

ChildProcess::Output ChildProcess::communicate(std::chrono::milliseconds deadline) {
  close_stdin();
  Output result;
  result.out = std::exchange(out_buffer_, {});
  const auto until = std::chrono::steady_clock::now() + deadline;
  while (out_fd_ >= 0 || err_fd_ >= 0) {
    pollfd pfds[2];
    nfds_t count = 0;
    if (out_fd_ >= 0) pfds[count++] = {out_fd_, POLLIN, 0};
    if (err_fd_ >= 0) pfds[count++] = {err_fd_, POLLIN, 0};
    const int ready = ::poll(pfds, count, remaining_ms(until));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::TransportError, std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) {
      kill();
      wait();
      throw Error(Errc::TransportError, "child did not finish before the deadline");
    }
    for (nfds_t i = 0; i < count; ++i) {
      if (!(pfds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      int& fd = pfds[i].fd == out_fd_ ? out_fd_ : err_fd_;
      std::string& sink = pfds[i].fd == out_fd_ ? result.out : result.err;
      char buf[65536];
      const ssize_t n = ::read(fd, buf, sizeof buf);
      if (n > 0) {
        sink.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || errno != EINTR) {
        close_fd(fd);
      }
    }
  }
  result.exit_code = wait();
  return result;
}

void ChildProcess::kill() {
  if (pid_ > 0) ::kill(pid_, SIGKILL);
}

int ChildProcess::wait() {
  if (pid_ <= 0) return -1;
  int status = 0;
  while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
  }
  pid_ = -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

}  // namespace mmv
