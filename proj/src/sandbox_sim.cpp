#include <algorithm>
#include <atomic>

#include "cligym/errors.hpp"
#include "cligym/sandbox.hpp"
#include "cligym/util.hpp"

namespace cligym {

namespace {

std::atomic<std::uint64_t> g_build_serial{0};
std::atomic<std::uint64_t> g_session_serial{0};

struct SimCommandResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

bool known_verb(const std::string& verb) {
  static const std::set<std::string> verbs = {
      "corrupt_lib", "restore_lib", "rm",      "patch_file", "chmod_deny", "chmod_allow",
      "env_unset",   "env_set",     "break_path", "fix_path", "true",       "false",
      "echo",        "sleep",       "cat"};
  return verbs.count(verb) > 0;
}

// Interprets one command against the scenario. The verb set is closed;
// callers decide how to treat unknown verbs.
SimCommandResult interpret(SimScenario& world, const std::string& command) {
  std::string text = trim(command);
  if (text.rfind("RUN ", 0) == 0) text = trim(text.substr(4));

  std::size_t sp = text.find(' ');
  std::string verb = sp == std::string::npos ? text : text.substr(0, sp);
  std::string rest = sp == std::string::npos ? "" : trim(text.substr(sp + 1));

  SimCommandResult r;
  if (verb == "true") return r;
  if (verb == "false") {
    r.exit_code = 1;
    return r;
  }
  if (verb == "echo") {
    r.out = rest + "\n";
    return r;
  }
  if (verb == "sleep") return r;  // duration handled by the exec timeout check
  if (verb == "cat") {
    auto it = world.files.find(rest);
    if (it == world.files.end()) {
      r.exit_code = 1;
      r.err = "cat: " + rest + ": No such file or directory\n";
    } else if (!it->second.readable) {
      r.exit_code = 1;
      r.err = "cat: " + rest + ": Permission denied\n";
    } else {
      r.out = it->second.content;
    }
    return r;
  }
  if (verb == "corrupt_lib" || verb == "restore_lib") {
    auto it = world.packages.find(rest);
    if (it == world.packages.end()) {
      r.exit_code = 1;
      r.err = verb + ": no such package: " + rest + "\n";
    } else {
      it->second.corrupted = (verb == "corrupt_lib");
    }
    return r;
  }
  if (verb == "rm") {
    if (world.files.erase(rest) == 0) {
      r.exit_code = 1;
      r.err = "rm: cannot remove '" + rest + "': No such file or directory\n";
    }
    return r;
  }
  if (verb == "patch_file") {
    std::size_t sp2 = rest.find(' ');
    std::string path = sp2 == std::string::npos ? rest : rest.substr(0, sp2);
    std::string content = sp2 == std::string::npos ? "" : rest.substr(sp2 + 1);
    if (path.empty()) {
      r.exit_code = 1;
      r.err = "patch_file: missing path\n";
    } else {
      world.files[path] = SimFile{content, true};
    }
    return r;
  }
  if (verb == "chmod_deny" || verb == "chmod_allow") {
    auto it = world.files.find(rest);
    if (it == world.files.end()) {
      r.exit_code = 1;
      r.err = verb + ": no such file: " + rest + "\n";
    } else {
      it->second.readable = (verb == "chmod_allow");
    }
    return r;
  }
  if (verb == "env_unset") {
    world.env.erase(rest);
    return r;
  }
  if (verb == "env_set") {
    world.env.insert(rest);
    return r;
  }
  if (verb == "break_path") {
    world.path_ok = false;
    return r;
  }
  if (verb == "fix_path") {
    world.path_ok = true;
    return r;
  }
  r.exit_code = 127;
  r.err = "sim: command not found: " + verb + "\n";
  return r;
}

std::string synthesize_verbose_log(const std::vector<std::pair<TestId, TestOutcome>>& results) {
  std::string log;
  log += "============================= test session starts ==============================\n";
  log += "platform linux -- Python 3.11.9, pytest-8.2.0, pluggy-1.5.0 -- "
         "/opt/miniconda3/envs/testbed/bin/python\n";
  log += "collected " + std::to_string(results.size()) + " items\n\n";

  std::size_t n = results.size();
  std::size_t passed = 0, failed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [id, outcome] = results[i];
    int pct = static_cast<int>((i + 1) * 100 / (n == 0 ? 1 : n));
    const char* marker = outcome == TestOutcome::passed ? "PASSED" : "FAILED";
    (outcome == TestOutcome::passed ? passed : failed) += 1;
    char pctbuf[16];
    std::snprintf(pctbuf, sizeof(pctbuf), "[%3d%%]", pct);
    log += id.canonical() + " " + marker + " " + pctbuf + "\n";
  }
  log += "\n";
  std::vector<std::string> counts;
  if (failed) counts.push_back(std::to_string(failed) + " failed");
  if (passed) counts.push_back(std::to_string(passed) + " passed");
  if (counts.empty()) counts.push_back("no tests ran");
  log += "========================= " + join(counts, ", ") +
         " in 0.02s =========================\n";
  return log;
}

}  // namespace

bool SimScenario::package_healthy(const std::string& name) const {
  std::set<std::string> visiting;
  // Recursive health: a package is healthy when present, uncorrupted, and
  // all dependencies are healthy. Cycles count as healthy links.
  auto walk = [&](auto&& self, const std::string& pkg) -> bool {
    auto it = packages.find(pkg);
    if (it == packages.end()) return false;
    if (it->second.corrupted) return false;
    if (!visiting.insert(pkg).second) return true;
    for (const std::string& dep : it->second.deps) {
      if (!self(self, dep)) return false;
    }
    return true;
  };
  return walk(walk, name);
}

bool SimScenario::eval(const TestPredicate& predicate, std::uint64_t build_serial) const {
  for (const std::string& path : predicate.needs_files) {
    auto it = files.find(path);
    if (it == files.end() || !it->second.readable) return false;
  }
  for (const auto& [path, needle] : predicate.needs_file_contains) {
    auto it = files.find(path);
    if (it == files.end() || !it->second.readable) return false;
    if (!contains(it->second.content, needle)) return false;
  }
  for (const std::string& pkg : predicate.needs_packages) {
    if (!package_healthy(pkg)) return false;
  }
  for (const std::string& var : predicate.needs_env) {
    if (!env.count(var)) return false;
  }
  if (predicate.needs_path && !path_ok) return false;
  if (predicate.unstable && build_serial % 2 != 0) return false;
  return true;
}

std::vector<TestId> SimScenario::inventory() const {
  std::vector<TestId> ids;
  ids.reserve(tests.size());
  for (const auto& [key, _] : tests) ids.push_back(TestId::parse(key));
  return ids;
}

std::string SimScenario::image_name() const {
  std::size_t colon = image.rfind(':');
  return colon == std::string::npos ? image : image.substr(0, colon);
}

SimScenario SimScenario::from_json(const nlohmann::json& doc) {
  SimScenario s;
  s.image = doc.at("image").get<std::string>();
  s.repo = doc.at("repo").get<std::string>();
  if (doc.contains("files")) {
    for (const auto& [path, value] : doc.at("files").items()) {
      SimFile f;
      if (value.is_string()) {
        f.content = value.get<std::string>();
      } else {
        f.content = value.value("content", "");
        f.readable = value.value("readable", true);
      }
      s.files[path] = std::move(f);
    }
  }
  if (doc.contains("packages")) {
    for (const auto& [name, value] : doc.at("packages").items()) {
      SimPackage p;
      if (value.is_array()) {
        p.deps = value.get<std::vector<std::string>>();
      } else {
        p.deps = value.value("deps", std::vector<std::string>{});
        p.corrupted = value.value("corrupted", false);
      }
      s.packages[name] = std::move(p);
    }
  }
  if (doc.contains("env")) s.env = doc.at("env").get<std::set<std::string>>();
  s.path_ok = doc.value("path_ok", true);
  for (const auto& [key, value] : doc.at("tests").items()) {
    TestPredicate p;
    p.needs_files = value.value("needs_files", std::vector<std::string>{});
    if (value.contains("needs_file_contains")) {
      for (const auto& pair : value.at("needs_file_contains")) {
        p.needs_file_contains.emplace_back(pair.at(0).get<std::string>(),
                                           pair.at(1).get<std::string>());
      }
    }
    p.needs_packages = value.value("needs_packages", std::vector<std::string>{});
    p.needs_env = value.value("needs_env", std::vector<std::string>{});
    p.needs_path = value.value("needs_path", false);
    p.unstable = value.value("unstable", false);
    TestId::parse(key);  // validate
    s.tests[key] = std::move(p);
  }
  return s;
}

SimScenario SimScenario::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad scenario file " + path.string() + ": " + e.what());
  }
}

nlohmann::json SimScenario::to_json() const {
  nlohmann::json doc;
  doc["image"] = image;
  doc["repo"] = repo;
  doc["files"] = nlohmann::json::object();
  for (const auto& [path, f] : files) {
    doc["files"][path] = {{"content", f.content}, {"readable", f.readable}};
  }
  doc["packages"] = nlohmann::json::object();
  for (const auto& [name, p] : packages) {
    doc["packages"][name] = {{"deps", p.deps}, {"corrupted", p.corrupted}};
  }
  doc["env"] = env;
  doc["path_ok"] = path_ok;
  doc["tests"] = nlohmann::json::object();
  for (const auto& [key, p] : tests) {
    nlohmann::json pj;
    if (!p.needs_files.empty()) pj["needs_files"] = p.needs_files;
    if (!p.needs_file_contains.empty()) {
      pj["needs_file_contains"] = nlohmann::json::array();
      for (const auto& [path, needle] : p.needs_file_contains) {
        pj["needs_file_contains"].push_back({path, needle});
      }
    }
    if (!p.needs_packages.empty()) pj["needs_packages"] = p.needs_packages;
    if (!p.needs_env.empty()) pj["needs_env"] = p.needs_env;
    if (p.needs_path) pj["needs_path"] = true;
    if (p.unstable) pj["unstable"] = true;
    doc["tests"][key] = std::move(pj);
  }
  return doc;
}

void Sandbox::require_alive() const {
  if (!alive_) throw SessionDead("sandbox session " + session_id_ + " is torn down");
}

namespace {

class SimSandbox : public Sandbox {
 public:
  SimSandbox(SimScenario world, std::uint64_t build_serial, std::string fingerprint,
             std::string session_id, std::vector<MountSpec> mounts,
             std::filesystem::path artifact_dir)
      : Sandbox(BackendKind::simulated, std::move(fingerprint), std::move(session_id),
                std::move(mounts), std::move(artifact_dir)),
        world_(std::move(world)),
        build_serial_(build_serial) {}

  ExecResult exec_command(const std::string& command, double timeout_s) override {
    require_alive();
    ExecResult result;
    std::string text = trim(command);
    if (text.rfind("sleep ", 0) == 0) {
      double wanted = 0.0;
      try {
        wanted = std::stod(text.substr(6));
      } catch (...) {
      }
      if (wanted > timeout_s) {
        result.timed_out = true;
        result.exit_code = ExecResult::kKilledExitCode;
        result.duration_s = timeout_s;
        return result;
      }
      result.duration_s = wanted;
      return result;
    }
    SimCommandResult r = interpret(world_, text);
    result.exit_code = r.exit_code;
    result.stdout_text = std::move(r.out);
    result.stderr_text = std::move(r.err);
    return result;
  }

  void write_file(const std::string& guest_path, const std::string& content) override {
    require_alive();
    world_.files[guest_path] = SimFile{content, true};
    mirror_to_host(guest_path, content);
  }

  std::optional<std::string> read_file(const std::string& guest_path) override {
    require_alive();
    auto it = world_.files.find(guest_path);
    if (it == world_.files.end() || !it->second.readable) return std::nullopt;
    return it->second.content;
  }

  TestRunReport run_test_script(const std::vector<TestId>& selected) override {
    require_alive();
    std::string script = render_run_script(selected);
    write_text_file(artifact_dir() / "run-tests.sh", script);

    std::vector<std::pair<TestId, TestOutcome>> results;
    for (const TestId& id : selected) {
      auto it = world_.tests.find(id.canonical());
      if (it == world_.tests.end()) continue;  // not collectable
      bool ok = world_.eval(it->second, build_serial_);
      results.emplace_back(id, ok ? TestOutcome::passed : TestOutcome::failed);
    }
    std::string log = synthesize_verbose_log(results);
    write_file("/test.log", log);
    std::filesystem::path host_log = artifact_dir() / "test.log";
    write_text_file(host_log, log);

    TestRunReport report = parse_verbose_log(log);
    report.raw_log_path = host_log.string();
    return report;
  }

  void teardown() override { mark_dead(); }

  const SimScenario& world() const { return world_; }

 private:
  void mirror_to_host(const std::string& guest_path, const std::string& content) {
    for (const MountSpec& mount : mounts()) {
      std::string prefix = mount.guest;
      if (!prefix.empty() && prefix.back() != '/') prefix += '/';
      if (guest_path.rfind(prefix, 0) == 0) {
        write_text_file(mount.host / guest_path.substr(prefix.size()), content);
      }
    }
  }

  SimScenario world_;
  std::uint64_t build_serial_;
};

}  // namespace

SimBackend::SimBackend(std::filesystem::path artifact_root)
    : artifact_root_(std::move(artifact_root)) {
  if (artifact_root_.empty()) {
    artifact_root_ = std::filesystem::temp_directory_path() / "cligym-sim-sessions";
  }
}

void SimBackend::register_scenario(SimScenario scenario) {
  std::lock_guard<std::mutex> lock(mu_);
  scenarios_[scenario.image_name()] = std::move(scenario);
}

const SimScenario* SimBackend::scenario_for(const std::string& image_name) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = scenarios_.find(image_name);
  return it == scenarios_.end() ? nullptr : &it->second;
}

std::unique_ptr<Sandbox> SimBackend::build_state(const EnvironmentState& state) {
  SimScenario world;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = scenarios_.find(state.base.name);
    if (it == scenarios_.end()) {
      throw BuildFailed("no registered scenario for image " + state.base.name);
    }
    world = it->second;
  }
  builds_.fetch_add(1);
  std::uint64_t serial = g_build_serial.fetch_add(1);

  std::string build_log;
  for (const EnvDelta& delta : state.deltas) {
    validate_delta(delta);
    // Code patches land before the delta's build directives run.
    for (const CodePatch& patch : delta.code_patches) {
      world.files["/testbed/" + patch.path] = SimFile{patch.content, true};
    }
    for (const std::string& line : delta.dockerfile_lines) {
      std::string text = trim(line);
      if (text.rfind("RUN ", 0) == 0) text = trim(text.substr(4));
      std::string verb = text.substr(0, text.find(' '));
      if (!known_verb(verb)) {
        throw UnknownSimOp("uninterpretable delta line: " + line);
      }
      SimCommandResult r = interpret(world, text);
      build_log += "+ " + line + "\n" + r.err;
      if (r.exit_code != 0) {
        throw BuildFailed(build_log + "step exited with " + std::to_string(r.exit_code));
      }
    }
  }

  std::string fp = fingerprint(state);
  std::string session =
      short_fingerprint(fp) + "-" + std::to_string(g_session_serial.fetch_add(1));
  std::filesystem::path artifact_dir = artifact_root_ / session;
  std::filesystem::create_directories(artifact_dir / "logs");
  std::vector<MountSpec> mounts = {
      {artifact_dir / "logs", "/logs", MountSpec::Mode::read_write}};
  return std::make_unique<SimSandbox>(std::move(world), serial, fp, session, std::move(mounts),
                                      artifact_dir);
}

std::string render_compose_file(const std::string& image, const std::string& container_name) {
  std::string out;
  out += "services:\n";
  out += "  task:\n";
  out += "    build:\n";
  out += "      context: .\n";
  out += "      dockerfile: Dockerfile\n";
  out += "    image: " + image + "\n";
  out += "    container_name: " + container_name + "\n";
  out += "    command: [\"sleep\", \"infinity\"]\n";
  out += "    volumes:\n";
  out += "      - ./logs:/logs\n";
  out += "      - ./trajectories:/trajectories\n";
  return out;
}

}  // namespace cligym
