#include "cligym/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "cligym/errors.hpp"

namespace cligym {

namespace {

void close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, double timeout_s,
                          std::string_view stdin_data) {
  if (argv.empty()) throw Error("run_process: empty argv");

  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (pipe(in_pipe) || pipe(out_pipe) || pipe(err_pipe)) {
    throw Error(std::string("pipe failed: ") + std::strerror(errno));
  }

  pid_t pid = fork();
  if (pid < 0) throw Error(std::string("fork failed: ") + std::strerror(errno));

  if (pid == 0) {
    // Child: own process group so a timeout kill reaps grandchildren too.
    setpgid(0, 0);
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) {
      ::close(fd);
    }
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const std::string& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    fprintf(stderr, "exec %s failed: %s\n", args[0], std::strerror(errno));
    _exit(127);
  }

  close_fd(in_pipe[0]);
  close_fd(out_pipe[1]);
  close_fd(err_pipe[1]);

  // Feed stdin up front; inputs here are small control payloads.
  std::size_t written = 0;
  while (written < stdin_data.size()) {
    ssize_t n = ::write(in_pipe[1], stdin_data.data() + written, stdin_data.size() - written);
    if (n <= 0) break;
    written += static_cast<std::size_t>(n);
  }
  close_fd(in_pipe[1]);

  ProcessResult result;
  const double start = now_s();
  const double deadline = start + timeout_s;
  int out_fd = out_pipe[0];
  int err_fd = err_pipe[0];
  char buf[4096];

  while (out_fd >= 0 || err_fd >= 0) {
    struct pollfd fds[2];
    nfds_t nfds = 0;
    if (out_fd >= 0) fds[nfds++] = {out_fd, POLLIN, 0};
    if (err_fd >= 0) fds[nfds++] = {err_fd, POLLIN, 0};

    double remaining_ms = (deadline - now_s()) * 1000.0;
    if (remaining_ms <= 0) {
      result.timed_out = true;
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      break;
    }
    int rc = poll(fds, nfds, static_cast<int>(remaining_ms) + 1);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;  // re-check deadline
    for (nfds_t i = 0; i < nfds; ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      int& fd = (fds[i].fd == out_fd) ? out_fd : err_fd;
      std::string& sink = (fds[i].fd == out_fd) ? result.out : result.err;
      ssize_t n = ::read(fd, buf, sizeof(buf));
      if (n > 0) {
        sink.append(buf, static_cast<std::size_t>(n));
      } else {
        close_fd(fd);
      }
    }
  }
  close_fd(out_fd);
  close_fd(err_fd);

  int status = 0;
  waitpid(pid, &status, 0);
  result.duration_s = now_s() - start;
  if (result.timed_out) {
    result.exit_code = 128 + SIGKILL;
  } else if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  }
  return result;
}

bool container_runtime_available(const std::string& runtime) {
  try {
    ProcessResult probe = run_process({runtime, "info"}, 10.0);
    return probe.exit_code == 0;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace cligym
