#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cligym/agent.hpp"
#include "cligym/bundle.hpp"
#include "cligym/sandbox.hpp"

namespace cligym {

/// One recorded event. Agent-sourced steps carry the tool call; environment
/// steps carry the observed output.
struct Step {
  struct Function {
    std::string name;
    std::string arguments;  // JSON document as a string
  };

  int id = 0;
  enum class Source { agent, environment } source = Source::agent;
  std::string message;
  std::string action;  // run | edit | finish | observe
  std::optional<Function> function;
};

enum class FilterVerdict { kept, dropped_short, dropped_cheat };

const char* to_string(FilterVerdict verdict);

struct Trajectory {
  std::string task_id;
  std::vector<Step> steps;
  bool success = false;  // set only by test verification, never self-report
  FilterVerdict filter_verdict = FilterVerdict::kept;

  /// Agent-sourced step count (the filter threshold's notion of steps).
  std::size_t agent_step_count() const;
};

nlohmann::ordered_json step_to_json(const Step& step);
Step step_from_json(const nlohmann::json& doc);
nlohmann::ordered_json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& doc);

/// One cheat detector: a regex applied to executed commands and touched
/// file paths of agent steps. Rule files hold one "pattern label" pair
/// per line.
struct CheatRule {
  std::string pattern;
  std::string label;
};

std::vector<CheatRule> parse_cheat_rules(std::string_view text);
std::vector<CheatRule> load_cheat_rules(const std::filesystem::path& path);
std::vector<CheatRule> default_cheat_rules();

/// True when any agent step's command or path matches the rule; the
/// matching label is reported through `hit_label`.
bool trajectory_matches_cheat(const Trajectory& traj, const std::vector<CheatRule>& rules,
                              std::string* hit_label = nullptr);

struct CollectOptions {
  double budget_s = 900.0;
  double command_timeout_s = 120.0;
  std::filesystem::path artifact_dir;  // trajectory.json target; empty = skip
};

/// Builds the bundle's environment, lets the agent work on the instruction,
/// then runs the test script in the same session. Success requires every
/// fail-to-pass and pass-to-pass test to pass. Build or agent failures
/// yield an unsuccessful trajectory instead of aborting.
Trajectory collect_trajectory(const TaskBundle& bundle, AgentAdapter& agent,
                              SandboxBackend& backend, const CollectOptions& options = {});

/// Splits successful trajectories into kept and dropped: fewer than 20
/// agent steps drops first (dropped_short), then any cheat-rule match
/// (dropped_cheat). Inputs with success == false raise NotSuccessful.
std::pair<std::vector<Trajectory>, std::vector<Trajectory>> filter_trajectories(
    std::vector<Trajectory> trajectories, const std::vector<CheatRule>& rules);

inline constexpr std::size_t kMinAgentSteps = 20;

struct ExportManifest {
  std::size_t count = 0;
  std::map<std::string, std::size_t> per_repo;
  std::filesystem::path dataset_file;
};

/// Writes kept trajectories as JSON lines (ordered by task id) plus a
/// manifest.json with counts and the per-repo distribution.
ExportManifest export_dataset(std::vector<Trajectory> kept, const std::filesystem::path& out_dir);

/// Reads back a JSON-lines trajectory file.
std::vector<Trajectory> read_dataset(const std::filesystem::path& file);

}  // namespace cligym
