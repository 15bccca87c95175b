#pragma once

#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace cligym {

/// One agent decision: run a shell command, create/replace a file, or
/// finish with a final message.
struct AgentAction {
  enum class Kind { shell, file_edit, finish };

  Kind kind = Kind::finish;
  std::string command;  // shell
  std::string path;     // file_edit
  std::string content;  // file_edit
  std::string message;  // finish / commentary

  static AgentAction shell(std::string command);
  static AgentAction file_edit(std::string path, std::string content);
  static AgentAction finish(std::string message);
};

/// What the harness shows the agent each step. The task text is sent with
/// the first observation; later observations carry the previous action's
/// output.
struct AgentObservation {
  int step_index = 0;
  std::string task;
  std::string output;
  int exit_code = 0;
  bool timed_out = false;
};

/// Bridge between the harness step loop and a concrete agent. The harness
/// sends observations and receives actions until the agent finishes (its
/// framework's final-thought signal maps to Kind::finish) or the budget
/// runs out. Returning nullopt means the agent has nothing more to do.
class AgentAdapter {
 public:
  virtual ~AgentAdapter() = default;
  virtual std::string id() const = 0;
  virtual std::optional<AgentAction> next_action(const AgentObservation& obs) = 0;
  /// Prepares the adapter for a fresh run.
  virtual void reset() {}
};

// ---- wire format ----
// JSON-lines step schema shared with trajectory recording: every message
// is {"id", "source", "message", "action", "function": {"arguments",
// "name"}}. Arguments are a JSON document encoded as a string.

nlohmann::ordered_json action_to_step_json(const AgentAction& action, int id);
nlohmann::ordered_json observation_to_step_json(const AgentObservation& obs, int id);
AgentAction action_from_step_json(const nlohmann::json& step);

/// Replays a fixed action list. Script files are JSON arrays of
/// {"action": "run"|"edit"|"finish", ...} objects.
class ScriptedAgent : public AgentAdapter {
 public:
  explicit ScriptedAgent(std::vector<AgentAction> actions, std::string id = "scripted");
  static ScriptedAgent from_json_file(const std::filesystem::path& path);

  std::string id() const override { return id_; }
  std::optional<AgentAction> next_action(const AgentObservation& obs) override;
  void reset() override { next_ = 0; }

 private:
  std::vector<AgentAction> actions_;
  std::size_t next_ = 0;
  std::string id_;
};

/// Deterministic degradation agent for desk-scale runs: executes every
/// backtick-quoted command in the task text, records them as RUN lines in
/// /logs/Dockerfile, then finishes.
class MockBreakerAgent : public AgentAdapter {
 public:
  std::string id() const override { return "mock-breaker"; }
  std::optional<AgentAction> next_action(const AgentObservation& obs) override;
  void reset() override;

 private:
  bool primed_ = false;
  std::deque<AgentAction> queue_;
};

/// Deterministic solver agent for desk-scale runs: same extraction rule as
/// MockBreakerAgent but only runs the commands, then finishes.
class MockFixerAgent : public AgentAdapter {
 public:
  std::string id() const override { return "mock-fixer"; }
  std::optional<AgentAction> next_action(const AgentObservation& obs) override;
  void reset() override;

 private:
  bool primed_ = false;
  std::deque<AgentAction> queue_;
};

/// Commands quoted in `backticks`, in order of appearance.
std::vector<std::string> extract_backtick_commands(const std::string& text);

/// Talks the step schema over a child process's stdin/stdout, one JSON
/// line per message: observation out, action in. The child exiting or
/// writing an unparsable line raises AgentCrashed.
class ProcessAgent : public AgentAdapter {
 public:
  explicit ProcessAgent(std::vector<std::string> argv, double step_timeout_s = 60.0);
  ~ProcessAgent() override;

  std::string id() const override { return "process"; }
  std::optional<AgentAction> next_action(const AgentObservation& obs) override;
  void reset() override;

 private:
  struct Child;
  void spawn();
  void stop();

  std::vector<std::string> argv_;
  double step_timeout_s_;
  std::unique_ptr<Child> child_;
  int next_id_ = 0;
};

/// Builds the adapter named by a config string: "breaker", "fixer",
/// "scripted:<file>", or "process:<argv...>" (space-separated).
std::unique_ptr<AgentAdapter> make_agent(const std::string& spec);

}  // namespace cligym
