#include "cligym/trajectory.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <regex>
#include <set>

#include "cligym/errors.hpp"
#include "cligym/testrun.hpp"
#include "cligym/util.hpp"

namespace cligym {

namespace {

double mono_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

Step step_from_action(const AgentAction& action, int id) {
  return step_from_json(action_to_step_json(action, id));
}

Step step_from_observation(const AgentObservation& obs, int id) {
  return step_from_json(observation_to_step_json(obs, id));
}

// Text a cheat rule sees for one agent step: the command it ran plus any
// file path it touched.
std::string step_probe_text(const Step& step) {
  if (!step.function) return {};
  try {
    nlohmann::json args = nlohmann::json::parse(step.function->arguments);
    std::string probe;
    if (args.contains("command") && args["command"].is_string()) {
      probe += args["command"].get<std::string>();
    }
    if (args.contains("path")) {
      probe += ' ';
      probe += args["path"].get<std::string>();
    }
    return probe;
  } catch (const nlohmann::json::exception&) {
    return step.function->arguments;
  }
}

}  // namespace

const char* to_string(FilterVerdict verdict) {
  switch (verdict) {
    case FilterVerdict::kept: return "kept";
    case FilterVerdict::dropped_short: return "dropped_short";
    case FilterVerdict::dropped_cheat: return "dropped_cheat";
  }
  return "?";
}

std::size_t Trajectory::agent_step_count() const {
  return static_cast<std::size_t>(
      std::count_if(steps.begin(), steps.end(),
                    [](const Step& s) { return s.source == Step::Source::agent; }));
}

nlohmann::ordered_json step_to_json(const Step& step) {
  nlohmann::ordered_json doc;
  doc["id"] = step.id;
  doc["source"] = step.source == Step::Source::agent ? "agent" : "environment";
  doc["message"] = step.message;
  doc["action"] = step.action;
  if (step.function) {
    doc["function"] = {{"arguments", step.function->arguments}, {"name", step.function->name}};
  }
  return doc;
}

Step step_from_json(const nlohmann::json& doc) {
  Step step;
  step.id = doc.at("id").get<int>();
  std::string source = doc.at("source").get<std::string>();
  if (source == "agent") {
    step.source = Step::Source::agent;
  } else if (source == "environment") {
    step.source = Step::Source::environment;
  } else {
    throw Error("unknown step source: " + source);
  }
  step.message = doc.value("message", "");
  step.action = doc.value("action", "");
  if (doc.contains("function") && !doc.at("function").is_null()) {
    Step::Function fn;
    fn.name = doc.at("function").value("name", "");
    const auto& args = doc.at("function").at("arguments");
    fn.arguments = args.is_string() ? args.get<std::string>() : args.dump();
    step.function = std::move(fn);
  }
  return step;
}

nlohmann::ordered_json trajectory_to_json(const Trajectory& traj) {
  nlohmann::ordered_json doc;
  doc["task_id"] = traj.task_id;
  doc["success"] = traj.success;
  doc["filter_verdict"] = to_string(traj.filter_verdict);
  doc["steps"] = nlohmann::ordered_json::array();
  for (const Step& step : traj.steps) doc["steps"].push_back(step_to_json(step));
  return doc;
}

Trajectory trajectory_from_json(const nlohmann::json& doc) {
  Trajectory traj;
  traj.task_id = doc.at("task_id").get<std::string>();
  traj.success = doc.at("success").get<bool>();
  std::string verdict = doc.value("filter_verdict", "kept");
  if (verdict == "kept") traj.filter_verdict = FilterVerdict::kept;
  else if (verdict == "dropped_short") traj.filter_verdict = FilterVerdict::dropped_short;
  else if (verdict == "dropped_cheat") traj.filter_verdict = FilterVerdict::dropped_cheat;
  else throw Error("unknown filter verdict: " + verdict);
  int last_id = -1;
  for (const auto& item : doc.at("steps")) {
    Step step = step_from_json(item);
    if (step.id <= last_id) throw Error("step ids must be strictly increasing");
    last_id = step.id;
    traj.steps.push_back(std::move(step));
  }
  return traj;
}

std::vector<CheatRule> parse_cheat_rules(std::string_view text) {
  std::vector<CheatRule> rules;
  for (const std::string& raw : split_lines(text)) {
    std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::size_t sp = line.find_first_of(" \t");
    if (sp == std::string::npos) {
      throw Error("cheat rule needs 'pattern label': " + line);
    }
    CheatRule rule;
    rule.pattern = line.substr(0, sp);
    rule.label = trim(line.substr(sp + 1));
    std::regex probe(rule.pattern);  // validate eagerly
    (void)probe;
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<CheatRule> load_cheat_rules(const std::filesystem::path& path) {
  return parse_cheat_rules(read_text_file(path));
}

std::vector<CheatRule> default_cheat_rules() {
  return parse_cheat_rules(
      "\\.git(/|\\s|$) git-metadata\n"
      "(conda|pip)[^\\s]*/(pkgs|cache|logs?)(/|\\s|$) package-cache\n"
      "\\.cache/(pip|conda) package-cache\n"
      "\\.bak(\\s|$) backup-file\n"
      "(cat|cp|mv|less|head|tail)\\s+/tmp/ tmp-restore\n");
}

bool trajectory_matches_cheat(const Trajectory& traj, const std::vector<CheatRule>& rules,
                              std::string* hit_label) {
  std::vector<std::regex> compiled;
  compiled.reserve(rules.size());
  for (const CheatRule& rule : rules) compiled.emplace_back(rule.pattern);
  for (const Step& step : traj.steps) {
    if (step.source != Step::Source::agent) continue;
    std::string probe = step_probe_text(step);
    if (probe.empty()) continue;
    for (std::size_t i = 0; i < rules.size(); ++i) {
      if (std::regex_search(probe, compiled[i])) {
        if (hit_label) *hit_label = rules[i].label;
        return true;
      }
    }
  }
  return false;
}

Trajectory collect_trajectory(const TaskBundle& bundle, AgentAdapter& agent,
                              SandboxBackend& backend, const CollectOptions& options) {
  const TaskInstance& inst = bundle.instance;
  Trajectory traj;
  traj.task_id = inst.id;

  EnvironmentState poor;
  std::size_t colon = inst.gold_image_tag.rfind(':');
  poor.base.name =
      colon == std::string::npos ? inst.gold_image_tag : inst.gold_image_tag.substr(0, colon);
  poor.base.tag = colon == std::string::npos ? "latest" : inst.gold_image_tag.substr(colon + 1);
  poor.codebase_ref = inst.repo;
  poor.deltas.push_back(inst.delta);

  std::unique_ptr<Sandbox> box;
  try {
    box = backend.build_state(poor);
  } catch (const BuildFailed&) {
    traj.success = false;
    return traj;
  }

  int wire_id = 0;
  const double deadline = mono_s() + options.budget_s;
  AgentObservation obs;
  obs.step_index = 0;
  obs.task = inst.issue_text;

  agent.reset();
  try {
    while (mono_s() < deadline) {
      std::optional<AgentAction> action = agent.next_action(obs);
      if (!action) break;
      traj.steps.push_back(step_from_action(*action, wire_id++));
      if (action->kind == AgentAction::Kind::finish) break;

      AgentObservation next;
      next.step_index = obs.step_index + 1;
      if (action->kind == AgentAction::Kind::shell) {
        double remaining = deadline - mono_s();
        if (remaining <= 0) break;
        ExecResult r = box->exec_command(action->command,
                                         std::min(options.command_timeout_s, remaining));
        next.output = r.stdout_text + r.stderr_text;
        next.exit_code = r.exit_code;
        next.timed_out = r.timed_out;
      } else {
        box->write_file(action->path, action->content);
        next.output = "wrote " + action->path;
      }
      traj.steps.push_back(step_from_observation(next, wire_id++));
      obs = std::move(next);
    }

    // Success comes from rerunning the tests in the post-agent session,
    // never from the agent's own claims.
    std::vector<TestId> targets = bundle_test_order(inst);
    TestRunReport report = box->run_test_script(targets);
    std::map<std::string, TestOutcome> outcomes;
    for (const TestRecord& rec : report.records) outcomes[rec.id.canonical()] = rec.outcome;
    bool all_pass = report.runner_status == RunnerStatus::completed;
    for (const TestId& id : targets) {
      auto it = outcomes.find(id.canonical());
      if (it == outcomes.end() || it->second != TestOutcome::passed) {
        all_pass = false;
        break;
      }
    }
    traj.success = all_pass;
    box->teardown();
  } catch (const AgentCrashed&) {
    traj.success = false;
    box->teardown();
  }

  if (!options.artifact_dir.empty()) {
    std::string lines;
    for (const Step& step : traj.steps) lines += step_to_json(step).dump() + "\n";
    write_text_file(options.artifact_dir / "trajectory.json", lines);
  }
  return traj;
}

std::pair<std::vector<Trajectory>, std::vector<Trajectory>> filter_trajectories(
    std::vector<Trajectory> trajectories, const std::vector<CheatRule>& rules) {
  for (const Trajectory& traj : trajectories) {
    if (!traj.success) {
      throw NotSuccessful("filter input contains an unsuccessful trajectory: " + traj.task_id);
    }
  }
  std::vector<Trajectory> kept, dropped;
  for (Trajectory& traj : trajectories) {
    if (traj.agent_step_count() < kMinAgentSteps) {
      traj.filter_verdict = FilterVerdict::dropped_short;
      dropped.push_back(std::move(traj));
      continue;
    }
    if (trajectory_matches_cheat(traj, rules)) {
      traj.filter_verdict = FilterVerdict::dropped_cheat;
      dropped.push_back(std::move(traj));
      continue;
    }
    traj.filter_verdict = FilterVerdict::kept;
    kept.push_back(std::move(traj));
  }
  return {std::move(kept), std::move(dropped)};
}

ExportManifest export_dataset(std::vector<Trajectory> kept,
                              const std::filesystem::path& out_dir) {
  std::sort(kept.begin(), kept.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.task_id < b.task_id; });

  ExportManifest manifest;
  manifest.count = kept.size();
  std::string lines;
  for (const Trajectory& traj : kept) {
    lines += trajectory_to_json(traj).dump() + "\n";
    std::string repo = traj.task_id.substr(0, traj.task_id.find("__"));
    manifest.per_repo[repo] += 1;
  }
  manifest.dataset_file = out_dir / "trajectories.jsonl";
  write_text_file(manifest.dataset_file, lines);

  nlohmann::ordered_json mj;
  mj["count"] = manifest.count;
  mj["per_repo"] = manifest.per_repo;
  write_text_file(out_dir / "manifest.json", mj.dump(2) + "\n");
  return manifest;
}

std::vector<Trajectory> read_dataset(const std::filesystem::path& file) {
  std::vector<Trajectory> out;
  for (const std::string& line : split_lines(read_text_file(file))) {
    if (trim(line).empty()) continue;
    out.push_back(trajectory_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace cligym
