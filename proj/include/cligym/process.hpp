#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace cligym {

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string out;
  std::string err;
  double duration_s = 0.0;
};

/// Runs argv[0] with the given arguments, feeding stdin_data and capturing
/// stdout/stderr. On timeout the process group is killed and timed_out is
/// set; exit_code is then 128 + SIGKILL. exec failures surface as exit
/// code 127 with a message on stderr.
ProcessResult run_process(const std::vector<std::string>& argv, double timeout_s,
                          std::string_view stdin_data = {});

/// True when the named container runtime answers `<runtime> info`.
bool container_runtime_available(const std::string& runtime);

}  // namespace cligym
