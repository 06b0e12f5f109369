#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <sys/types.h>
#include <vector>

namespace mmv {

// A child process with pipes on stdin/stdout/stderr. Reads take a deadline so
// a wedged or dead child surfaces as an error instead of a hang.
class ChildProcess {
 public:
  ChildProcess() = default;
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;
  ChildProcess(ChildProcess&& other) noexcept;
  ChildProcess& operator=(ChildProcess&& other) noexcept;
  ~ChildProcess();

  // Throws Error{TransportError} when the executable cannot be started.
  // With capture_stderr=false the child inherits our stderr.
  static ChildProcess spawn(const std::vector<std::string>& argv, bool capture_stderr = true);

  bool running() const { return pid_ > 0; }
  pid_t pid() const { return pid_; }

  void write_all(std::string_view data);
  void close_stdin();

  // One '\n'-terminated line without the terminator. nullopt on EOF.
  // Throws Error{TransportError} when the deadline passes first.
  std::optional<std::string> read_line(std::chrono::milliseconds deadline);

  // Reads stdout to EOF, draining stderr alongside; returns the exit status.
  struct Output {
    std::string out;
    std::string err;
    int exit_code = -1;
  };
  Output communicate(std::chrono::milliseconds deadline);

  void kill();
  int wait();

 private:
  void close_fds();

  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  int err_fd_ = -1;
  std::string out_buffer_;
};

}  // namespace mmv
