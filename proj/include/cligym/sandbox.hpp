#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "cligym/state.hpp"
#include "cligym/testrun.hpp"

namespace cligym {

enum class BackendKind { container, simulated };

struct MountSpec {
  enum class Mode { read_only, read_write };
  std::filesystem::path host;
  std::string guest;
  Mode mode = Mode::read_write;
};

struct ExecResult {
  static constexpr int kKilledExitCode = 137;  // 128 + SIGKILL

  int exit_code = 0;
  std::string stdout_text;
  std::string stderr_text;
  double duration_s = 0.0;
  bool timed_out = false;
};

// ---- simulated world ----

struct SimFile {
  std::string content;
  bool readable = true;
  auto operator<=>(const SimFile&) const = default;
};

struct SimPackage {
  std::vector<std::string> deps;
  bool corrupted = false;
  auto operator<=>(const SimPackage&) const = default;
};

/// Conjunction of atoms a test needs to pass. `unstable` marks a predicate
/// whose result flips with the build serial; it exists to model
/// nondeterministic environments in fixtures.
struct TestPredicate {
  std::vector<std::string> needs_files;
  std::vector<std::pair<std::string, std::string>> needs_file_contains;
  std::vector<std::string> needs_packages;
  std::vector<std::string> needs_env;
  bool needs_path = false;
  bool unstable = false;
};

/// Deterministic in-process stand-in for a containerized environment:
/// a file tree, a package set with dependency edges, environment
/// variables, and per-test predicates over them.
struct SimScenario {
  std::string image;  // gold image ref this scenario represents, name:tag
  std::string repo;
  std::map<std::string, SimFile> files;
  std::map<std::string, SimPackage> packages;
  std::set<std::string> env;
  bool path_ok = true;
  std::map<std::string, TestPredicate> tests;  // key: canonical test id

  bool package_healthy(const std::string& name) const;
  bool eval(const TestPredicate& predicate, std::uint64_t build_serial) const;

  std::vector<TestId> inventory() const;
  std::string image_name() const;  // image without the tag

  static SimScenario from_json(const nlohmann::json& doc);
  static SimScenario load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// ---- sandbox sessions ----

/// One live environment session. A handle is owned by exactly one worker;
/// it is usable between construction and teardown.
class Sandbox {
 public:
  virtual ~Sandbox() = default;

  BackendKind backend() const { return backend_; }
  const std::string& state_fingerprint() const { return fingerprint_; }
  const std::string& session_id() const { return session_id_; }
  const std::vector<MountSpec>& mounts() const { return mounts_; }
  const std::filesystem::path& artifact_dir() const { return artifact_dir_; }
  bool alive() const { return alive_; }

  virtual ExecResult exec_command(const std::string& command, double timeout_s) = 0;
  virtual void write_file(const std::string& guest_path, const std::string& content) = 0;
  virtual std::optional<std::string> read_file(const std::string& guest_path) = 0;

  /// Renders the run script for `selected`, executes it in the session,
  /// and parses the persisted /test.log copy into a report.
  virtual TestRunReport run_test_script(const std::vector<TestId>& selected) = 0;

  /// Releases session resources. Idempotent; host artifact directories
  /// are retained.
  virtual void teardown() = 0;

 protected:
  Sandbox(BackendKind backend, std::string fingerprint, std::string session_id,
          std::vector<MountSpec> mounts, std::filesystem::path artifact_dir)
      : backend_(backend),
        fingerprint_(std::move(fingerprint)),
        session_id_(std::move(session_id)),
        mounts_(std::move(mounts)),
        artifact_dir_(std::move(artifact_dir)) {}

  void require_alive() const;
  void mark_dead() { alive_ = false; }

 private:
  BackendKind backend_;
  std::string fingerprint_;
  std::string session_id_;
  std::vector<MountSpec> mounts_;
  std::filesystem::path artifact_dir_;
  bool alive_ = true;
};

class SandboxBackend {
 public:
  virtual ~SandboxBackend() = default;
  virtual BackendKind kind() const = 0;

  /// Materializes `state` into a live session. Code patches of each delta
  /// apply before its build directives, so directives see patched code.
  virtual std::unique_ptr<Sandbox> build_state(const EnvironmentState& state) = 0;
};

/// In-process backend interpreting delta lines over registered scenarios.
/// Delta directives use a closed verb set (corrupt_lib, rm, chmod_deny,
/// env_unset, patch_file, break_path and their inverses); unknown verbs
/// raise UnknownSimOp.
class SimBackend : public SandboxBackend {
 public:
  explicit SimBackend(std::filesystem::path artifact_root = {});

  BackendKind kind() const override { return BackendKind::simulated; }
  void register_scenario(SimScenario scenario);
  std::unique_ptr<Sandbox> build_state(const EnvironmentState& state) override;

  const SimScenario* scenario_for(const std::string& image_name) const;
  int builds_invoked() const { return builds_.load(); }

 private:
  std::filesystem::path artifact_root_;
  mutable std::mutex mu_;
  std::map<std::string, SimScenario> scenarios_;  // key: image name
  std::atomic<int> builds_{0};
};

/// Backend driving a real container runtime through its CLI. Images are
/// tagged by state fingerprint, so rebuilding an existing state is a
/// cache hit. A semaphore caps concurrent image builds.
class ContainerBackend : public SandboxBackend {
 public:
  struct Options {
    std::string runtime = "docker";
    std::string tag_prefix = "cligym-";
    std::filesystem::path artifact_root;
    int max_concurrent_builds = 2;
    double build_timeout_s = 1800.0;
    double exec_overhead_s = 30.0;  // added to per-command timeouts for CLI startup
  };

  explicit ContainerBackend(Options options);

  BackendKind kind() const override { return BackendKind::container; }
  std::unique_ptr<Sandbox> build_state(const EnvironmentState& state) override;

  int builds_invoked() const { return builds_.load(); }
  const Options& options() const { return options_; }

 private:
  friend class ContainerSandbox;
  void acquire_build_slot();
  void release_build_slot();

  Options options_;
  std::mutex mu_;
  std::condition_variable cv_;
  int build_slots_;
  std::atomic<int> builds_{0};
};

/// Emits the per-task compose file mapping /logs and /trajectories to the
/// host, with the service pinned to the given image and container name.
std::string render_compose_file(const std::string& image, const std::string& container_name);

}  // namespace cligym
