#include "cligym/bundle.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <set>
#include <thread>

#include "json.hpp"

#include "cligym/errors.hpp"
#include "cligym/prompts.hpp"
#include "cligym/sandbox.hpp"
#include "cligym/templates.hpp"
#include "cligym/testrun.hpp"
#include "cligym/util.hpp"

namespace cligym {

namespace {

std::vector<std::string> id_strings(const std::vector<TestId>& ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (const TestId& id : ids) out.push_back(id.canonical());
  return out;
}

std::vector<TestId> parse_ids(const nlohmann::json& arr) {
  std::vector<TestId> out;
  for (const auto& item : arr) out.push_back(TestId::parse(item.get<std::string>()));
  return out;
}

// Holds <id>.lock next to the bundle directory while writing.
class DirLock {
 public:
  explicit DirLock(std::filesystem::path path) : path_(std::move(path)) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
      if (fd_ >= 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(25));
    }
    throw IoFailure("could not acquire bundle lock: " + path_.string());
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      std::filesystem::remove(path_, ec);
    }
  }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

// Extracts the test ids out of a rendered run script by locating the
// runner invocation inside the embedded tester program.
std::vector<std::string> script_test_ids(const std::string& script) {
  const std::string marker = "--verbose ";
  std::size_t pos = script.find(marker);
  if (pos == std::string::npos) throw SchemaViolation("run-tests.sh has no runner invocation");
  pos += marker.size();
  std::size_t end = script.find('\'', pos);
  if (end == std::string::npos) throw SchemaViolation("run-tests.sh runner line unterminated");
  return split_ws(script.substr(pos, end - pos));
}

}  // namespace

std::vector<TestId> bundle_test_order(const TaskInstance& instance) {
  std::vector<TestId> order = instance.fail_to_pass;
  order.insert(order.end(), instance.pass_to_pass.begin(), instance.pass_to_pass.end());
  return order;
}

std::map<std::string, std::string> render_bundle_files(const TaskInstance& instance) {
  if (instance.delta.dockerfile_lines.empty()) {
    throw SchemaViolation("instance has an empty environment delta");
  }
  if (instance.fail_to_pass.empty()) {
    throw SchemaViolation("instance has no fail-to-pass tests");
  }

  std::map<std::string, std::string> files;

  std::string dockerfile = "FROM " + instance.gold_image_tag + "\n\n";
  for (const std::string& line : instance.delta.dockerfile_lines) {
    dockerfile += line + "\n";
  }
  files["Dockerfile"] = std::move(dockerfile);

  files["task.yaml"] = repair_instruction(instance.issue_text);
  files["docker-compose.yaml"] = render_compose_file(instance.id + ":latest", instance.id);
  files["run-tests.sh"] = render_run_script(bundle_test_order(instance));

  nlohmann::ordered_json meta;
  meta["instance_id"] = instance.id;
  meta["repo"] = instance.repo;
  meta["gold_image_tag"] = instance.gold_image_tag;
  meta["task_name"] = instance.task_name;
  meta["guidance_level"] = to_string(instance.guidance_level);
  meta["hint_present"] = instance.hint_present;
  meta["fail_to_pass"] = id_strings(instance.fail_to_pass);
  meta["pass_to_pass"] = id_strings(instance.pass_to_pass);
  meta["provenance"] = {{"seed", instance.seed}, {"prompts_hash", instance.prompts_hash}};
  files["meta.json"] = meta.dump(2) + "\n";

  return files;
}

TaskBundle emit_bundle(const TaskInstance& instance, const std::filesystem::path& out_root) {
  std::map<std::string, std::string> files = render_bundle_files(instance);
  std::filesystem::path dir = out_root / instance.id;

  std::error_code ec;
  std::filesystem::create_directories(out_root, ec);
  DirLock lock(out_root / (instance.id + ".lock"));

  if (std::filesystem::exists(dir)) {
    for (const auto& [name, content] : files) {
      std::optional<std::string> existing = try_read_text_file(dir / name);
      if (!existing || *existing != content) {
        throw CollisionDifferentContent("bundle " + dir.string() +
                                        " exists with different bytes in " + name);
      }
    }
    return {dir, instance};
  }

  try {
    for (const auto& [name, content] : files) {
      write_text_file(dir / name, content);
    }
  } catch (const IoFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw IoFailure(std::string("bundle emission failed: ") + e.what());
  }
  return {dir, instance};
}

TaskInstance load_and_validate(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir)) throw IoFailure("no such bundle: " + dir.string());
  for (const char* name : kBundleFiles) {
    if (!std::filesystem::exists(dir / name)) throw MissingFile(name);
  }

  TaskInstance inst;

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(dir / "meta.json"));
    inst.id = meta.at("instance_id").get<std::string>();
    inst.repo = meta.at("repo").get<std::string>();
    inst.gold_image_tag = meta.at("gold_image_tag").get<std::string>();
    inst.task_name = meta.at("task_name").get<std::string>();
    inst.guidance_level =
        guidance_level_from_string(meta.at("guidance_level").get<std::string>());
    inst.hint_present = meta.at("hint_present").get<bool>();
    inst.fail_to_pass = parse_ids(meta.at("fail_to_pass"));
    inst.pass_to_pass = parse_ids(meta.at("pass_to_pass"));
    inst.seed = meta.at("provenance").at("seed").get<std::uint64_t>();
    inst.prompts_hash = meta.at("provenance").at("prompts_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation(std::string("bad meta.json: ") + e.what());
  } catch (const Error& e) {
    throw SchemaViolation(std::string("bad meta.json: ") + e.what());
  }
  if (inst.fail_to_pass.empty()) {
    throw SchemaViolation("meta.json has an empty fail_to_pass set");
  }
  {
    std::set<std::string> f2p;
    for (const TestId& id : inst.fail_to_pass) f2p.insert(id.canonical());
    for (const TestId& id : inst.pass_to_pass) {
      if (f2p.count(id.canonical())) throw SchemaViolation("test sets overlap");
    }
  }

  std::string dockerfile = read_text_file(dir / "Dockerfile");
  std::vector<std::string> lines = normalize_dockerfile_text(dockerfile);
  if (lines.empty() || lines.front().rfind("FROM ", 0) != 0) {
    throw SchemaViolation("Dockerfile must begin with the gold image FROM line");
  }
  if (trim(lines.front().substr(5)) != inst.gold_image_tag) {
    throw SchemaViolation("Dockerfile FROM line does not name the gold image");
  }
  inst.delta.dockerfile_lines.assign(lines.begin() + 1, lines.end());
  if (inst.delta.dockerfile_lines.empty()) {
    throw SchemaViolation("Dockerfile carries no delta lines");
  }

  std::string task_yaml = read_text_file(dir / "task.yaml");
  const std::string header = "instruction: |\n";
  if (task_yaml.rfind(header, 0) != 0) {
    throw SchemaViolation("task.yaml must start with 'instruction: |'");
  }
  std::vector<std::string> body_lines;
  for (const std::string& line : split_lines(task_yaml.substr(header.size()))) {
    if (line.empty()) {
      body_lines.push_back("");
    } else if (line.rfind("  ", 0) == 0) {
      body_lines.push_back(line.substr(2));
    } else {
      throw SchemaViolation("task.yaml instruction body must be indented two spaces");
    }
  }
  inst.issue_text = join(body_lines, "\n");

  bool has_marker = strip_hint(inst.issue_text).second.has_value();
  if (has_marker != inst.hint_present) {
    throw SchemaViolation("hint_present does not match the instruction text");
  }

  std::string script = read_text_file(dir / "run-tests.sh");
  std::set<std::string> script_set;
  for (const std::string& id : script_test_ids(script)) script_set.insert(id);
  std::set<std::string> meta_set;
  for (const TestId& id : bundle_test_order(inst)) meta_set.insert(id.canonical());
  if (script_set != meta_set) {
    throw TestSetMismatch("run-tests.sh tests differ from meta.json tests");
  }

  return inst;
}

}  // namespace cligym
