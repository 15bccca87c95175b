#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cligym/agent.hpp"
#include "cligym/prompts.hpp"
#include "cligym/sandbox.hpp"
#include "cligym/state.hpp"
#include "cligym/testrun.hpp"

namespace cligym {

/// What the degradation agent produced: the parsed Dockerfile delta, the
/// spec it was following, the raw summarized text, and how many actions
/// it took (finish excluded).
struct DegradationRecord {
  EnvDelta delta;
  InversionTaskSpec spec;
  std::string raw_dockerfile_text;
  int agent_steps = 0;
};

enum class Reproduction { reproduced, diverged, unchecked };

/// Verified outcome of one inversion: classification from a fresh build
/// plus the double-rebuild reproduction check. accepted implies the
/// classification kept at least one fail-to-pass test and the failing set
/// was stable across rebuilds.
struct InversionRun {
  std::string repo;
  std::string gold_image_tag;
  std::string gold_fingerprint;
  DegradationRecord record;
  Classification classification;
  Reproduction reproduction = Reproduction::unchecked;
  bool accepted = false;
  std::string discard_reason;  // set when !accepted
};

struct InversionOptions {
  double budget_s = 900.0;  // agent loop wall clock
  double command_timeout_s = 120.0;
  std::filesystem::path artifact_dir;  // step log target; empty = skip
};

/// A packaged repair task, ready for bundle emission.
struct TaskInstance {
  std::string id;
  std::string repo;
  std::string gold_image_tag;
  std::string task_name;
  EnvDelta delta;
  std::string issue_text;  // full instruction; contains the hint when present
  bool hint_present = false;
  GuidanceLevel guidance_level = GuidanceLevel::balanced;
  std::vector<TestId> fail_to_pass;
  std::vector<TestId> pass_to_pass;
  std::uint64_t seed = 0;
  std::string prompts_hash;
};

/// Runs the degradation agent against a sandbox built from the gold state
/// until it finishes or the budget runs out, then reads and parses the
/// summarized /logs/Dockerfile. Throws NoDockerfileWritten when the agent
/// leaves no usable summary, AgentCrashed when the adapter fails.
DegradationRecord run_inversion(const GoldInstance& gold, const InversionTaskSpec& spec,
                                AgentAdapter& agent, SandboxBackend& backend,
                                const InversionOptions& options = {});

/// Builds gold + delta fresh (never the agent's dirty session), classifies
/// the selected tests, rebuilds a second time, and compares failing sets.
InversionRun verify_and_classify(const GoldInstance& gold, const DegradationRecord& record,
                                 SandboxBackend& backend);

/// Packages an accepted run into task instances: one with the hint
/// embedded and, when a hint exists, a second with the hint stripped.
std::vector<TaskInstance> assemble_instance(const InversionRun& run,
                                            const IssueStatement& issue,
                                            std::uint64_t seed = 0,
                                            const std::string& prompts_hash = {});

}  // namespace cligym
