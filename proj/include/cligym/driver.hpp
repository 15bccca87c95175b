#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cligym/config.hpp"
#include "cligym/inversion.hpp"
#include "cligym/prompts.hpp"
#include "cligym/sandbox.hpp"
#include "cligym/stats.hpp"

namespace cligym {

/// Long-lived wiring for one tool invocation: the configured backend, LLM
/// client, direction catalog, and the shared memory pool.
struct DriverContext {
  ToolConfig config;
  std::shared_ptr<SimBackend> sim;
  std::shared_ptr<ContainerBackend> container;
  std::unique_ptr<LlmClient> llm;
  DirectionCatalog catalog;
  MemoryPool pool;

  SandboxBackend& backend();
};

/// Builds the context; the LLM client is only created when `with_llm` is
/// set (sandbox-only commands don't need credentials).
DriverContext make_driver(const ToolConfig& config, bool with_llm);

// ---- gold instances ----

/// A gold instance persisted alongside what the backend needs to rebuild
/// it (the scenario for the simulated backend).
struct GoldFile {
  GoldInstance gold;
  std::optional<SimScenario> scenario;
};

/// Builds and verifies a gold instance from a repo config: the scenario
/// file (sim backend) or a {repo, base, tag, setup_lines, tests} document
/// (container backend). Throws unless every inventory test passes.
GoldFile build_gold(DriverContext& ctx, const std::filesystem::path& repo_config);

void save_gold_file(const GoldFile& gold, const std::filesystem::path& path);

/// Loads a gold file and, for the simulated backend, registers its
/// scenario so later builds can find it.
GoldFile load_gold_file(DriverContext& ctx, const std::filesystem::path& path);

// ---- spec generation ----

struct GeneratedSpec {
  InversionTaskSpec spec;
  std::uint64_t seed = 0;
  bool refined = false;
  std::string prompts_material;  // prompts + replies, hashed into provenance
  std::vector<std::string> warnings;
};

/// One degradation-prompt round trip, deterministic per seed: sample
/// inputs, query the model, optionally refine, parse. The task name joins
/// the memory pool on success.
GeneratedSpec generate_spec(DriverContext& ctx, const GoldInstance& gold, std::uint64_t seed);

void save_spec_file(const GeneratedSpec& spec, const std::filesystem::path& path);
GeneratedSpec load_spec_file(const std::filesystem::path& path);

// ---- inversion + packaging ----

struct InvertOutcome {
  InversionRun run;
  std::vector<TaskInstance> instances;  // empty unless accepted
  std::string note;
};

/// Runs the degradation agent, verifies and classifies, and (when
/// accepted) generates the repair issue and assembles instances.
InvertOutcome invert_spec(DriverContext& ctx, const GoldInstance& gold,
                          const GeneratedSpec& spec);

void save_run_file(const InvertOutcome& outcome, const std::filesystem::path& path);
InvertOutcome load_run_file(const std::filesystem::path& path);

/// Emits every instance of an accepted run; returns the bundle dirs.
std::vector<std::filesystem::path> package_run(const InvertOutcome& outcome,
                                               const std::filesystem::path& dataset_root);

// ---- end-to-end generation ----

struct PipelineReport {
  int specs_attempted = 0;
  int specs_parsed = 0;
  int runs_accepted = 0;
  std::vector<std::filesystem::path> bundles;
  std::vector<std::string> notes;
};

/// Full generation loop over gold instances: seeds are derived per gold
/// and per attempt, so a fixed base seed reproduces the dataset bundle
/// for bundle. Token spend lands in the dataset run ledger.
PipelineReport run_generation_pipeline(DriverContext& ctx, const std::vector<GoldFile>& golds,
                                       std::uint64_t base_seed, int per_gold,
                                       const std::filesystem::path& dataset_root);

/// Rebuilds a bundle's environment twice and checks that recorded
/// fail-to-pass tests fail, pass-to-pass tests pass, and the failing set
/// is stable.
bool verify_bundle(DriverContext& ctx, const std::filesystem::path& bundle_dir,
                   std::string* detail = nullptr);

// ---- JSON codecs for artifact files ----

nlohmann::ordered_json delta_to_json(const EnvDelta& delta);
EnvDelta delta_from_json(const nlohmann::json& doc);
nlohmann::ordered_json spec_to_json(const InversionTaskSpec& spec);
InversionTaskSpec spec_from_json(const nlohmann::json& doc);
nlohmann::ordered_json instance_to_json(const TaskInstance& instance);
TaskInstance instance_from_json(const nlohmann::json& doc);

}  // namespace cligym
