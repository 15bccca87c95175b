#include <atomic>

#include "cligym/errors.hpp"
#include "cligym/process.hpp"
#include "cligym/sandbox.hpp"
#include "cligym/util.hpp"

namespace cligym {

namespace {

std::atomic<std::uint64_t> g_container_session_serial{0};

class ContainerSandbox : public Sandbox {
 public:
  ContainerSandbox(ContainerBackend* backend, std::string container_name,
                   std::string fingerprint, std::string session_id,
                   std::vector<MountSpec> mounts, std::filesystem::path artifact_dir)
      : Sandbox(BackendKind::container, std::move(fingerprint), std::move(session_id),
                std::move(mounts), std::move(artifact_dir)),
        backend_(backend),
        container_(std::move(container_name)) {}

  ~ContainerSandbox() override {
    try {
      teardown();
    } catch (...) {
    }
  }

  ExecResult exec_command(const std::string& command, double timeout_s) override {
    require_alive();
    const auto& opt = backend_->options();
    ProcessResult pr =
        run_process({opt.runtime, "exec", container_, "/bin/bash", "-lc", command},
                    timeout_s + opt.exec_overhead_s);
    ExecResult result;
    result.exit_code = pr.timed_out ? ExecResult::kKilledExitCode : pr.exit_code;
    result.stdout_text = std::move(pr.out);
    result.stderr_text = std::move(pr.err);
    result.duration_s = pr.duration_s;
    result.timed_out = pr.timed_out;
    return result;
  }

  void write_file(const std::string& guest_path, const std::string& content) override {
    require_alive();
    const auto& opt = backend_->options();
    std::filesystem::path tmp = artifact_dir() / ".stage";
    write_text_file(tmp, content);
    ProcessResult pr = run_process(
        {opt.runtime, "cp", tmp.string(), container_ + ":" + guest_path}, 60.0);
    std::filesystem::remove(tmp);
    if (pr.exit_code != 0) {
      throw IoFailure("cannot write " + guest_path + " in container: " + pr.err);
    }
  }

  std::optional<std::string> read_file(const std::string& guest_path) override {
    require_alive();
    const auto& opt = backend_->options();
    ProcessResult pr =
        run_process({opt.runtime, "exec", container_, "/bin/cat", guest_path}, 60.0);
    if (pr.exit_code != 0) return std::nullopt;
    return pr.out;
  }

  TestRunReport run_test_script(const std::vector<TestId>& selected) override {
    require_alive();
    std::string script = render_run_script(selected);
    write_text_file(artifact_dir() / "run-tests.sh", script);
    write_file("/run-tests.sh", script);

    const auto& opt = backend_->options();
    ProcessResult pr =
        run_process({opt.runtime, "exec", container_, "/bin/bash", "/run-tests.sh"},
                    opt.build_timeout_s);

    // The template tees runner output into /test.log; the persisted file,
    // not the live stream, is the parsing interface.
    std::string log = read_file("/test.log").value_or("");
    std::filesystem::path host_log = artifact_dir() / "test.log";
    write_text_file(host_log, log);

    TestRunReport report = parse_verbose_log(log);
    report.raw_log_path = host_log.string();
    if (report.duration_s == 0.0) report.duration_s = pr.duration_s;
    return report;
  }

  void teardown() override {
    if (!alive()) return;
    mark_dead();
    const auto& opt = backend_->options();
    ProcessResult pr = run_process({opt.runtime, "rm", "-f", container_}, 60.0);
    if (pr.exit_code != 0) {
      fprintf(stderr, "cligym: container teardown of %s failed: %s\n", container_.c_str(),
              trim(pr.err).c_str());
    }
  }

 private:
  ContainerBackend* backend_;
  std::string container_;
};

}  // namespace

ContainerBackend::ContainerBackend(Options options)
    : options_(std::move(options)), build_slots_(options_.max_concurrent_builds) {
  if (options_.artifact_root.empty()) {
    options_.artifact_root = std::filesystem::temp_directory_path() / "cligym-sessions";
  }
  if (build_slots_ < 1) build_slots_ = 1;
}

void ContainerBackend::acquire_build_slot() {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [&] { return build_slots_ > 0; });
  --build_slots_;
}

void ContainerBackend::release_build_slot() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    ++build_slots_;
  }
  cv_.notify_one();
}

std::unique_ptr<Sandbox> ContainerBackend::build_state(const EnvironmentState& state) {
  const std::string fp = fingerprint(state);
  const std::string tag = options_.tag_prefix + short_fingerprint(fp);

  ProcessResult probe = run_process({options_.runtime, "image", "inspect", tag}, 60.0);
  if (probe.exit_code != 0) {
    acquire_build_slot();
    struct SlotGuard {
      ContainerBackend* b;
      ~SlotGuard() { b->release_build_slot(); }
    } guard{this};

    builds_.fetch_add(1);
    std::filesystem::path context =
        options_.artifact_root / ("build-" + short_fingerprint(fp));
    std::filesystem::create_directories(context);

    std::string dockerfile = "FROM " + state.base.ref() + "\n";
    int patch_serial = 0;
    for (const EnvDelta& delta : state.deltas) {
      validate_delta(delta);
      // Patches are COPY'd before the delta's own directives so those
      // directives observe the patched codebase.
      for (const CodePatch& patch : delta.code_patches) {
        std::string staged = "patch" + std::to_string(patch_serial++);
        write_text_file(context / staged, patch.content);
        dockerfile += "COPY " + staged + " /testbed/" + patch.path + "\n";
      }
      for (const std::string& line : delta.dockerfile_lines) {
        dockerfile += line + "\n";
      }
    }
    write_text_file(context / "Dockerfile", dockerfile);

    ProcessResult build = run_process(
        {options_.runtime, "build", "-t", tag, context.string()}, options_.build_timeout_s);
    if (build.exit_code != 0) {
      throw BuildFailed(build.out + build.err);
    }
  }

  std::string session =
      short_fingerprint(fp) + "-" + std::to_string(g_container_session_serial.fetch_add(1));
  std::filesystem::path artifact_dir = options_.artifact_root / session;
  std::filesystem::create_directories(artifact_dir / "logs");
  std::vector<MountSpec> mounts = {
      {artifact_dir / "logs", "/logs", MountSpec::Mode::read_write}};

  std::string container_name = "cligym-" + session;
  std::vector<std::string> run_argv = {options_.runtime, "run", "-d", "--name", container_name};
  for (const MountSpec& m : mounts) {
    std::string spec = m.host.string() + ":" + m.guest;
    if (m.mode == MountSpec::Mode::read_only) spec += ":ro";
    run_argv.push_back("-v");
    run_argv.push_back(spec);
  }
  run_argv.push_back(tag);
  run_argv.push_back("sleep");
  run_argv.push_back("infinity");

  ProcessResult started = run_process(run_argv, 120.0);
  if (started.exit_code != 0) {
    throw BuildFailed("container start failed:\n" + started.err);
  }
  return std::make_unique<ContainerSandbox>(this, container_name, fp, session,
                                            std::move(mounts), artifact_dir);
}

}  // namespace cligym
