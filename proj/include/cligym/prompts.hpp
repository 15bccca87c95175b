#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cligym/state.hpp"
#include "cligym/util.hpp"

namespace cligym {

/// A high-level corruption theme sampled into degradation prompts.
struct InterventionDirection {
  std::string label;
  std::string description;
};

/// Catalog of intervention directions, loaded from a text file with one
/// "label: description" entry per line ('#' starts a comment).
struct DirectionCatalog {
  std::vector<InterventionDirection> entries;

  static DirectionCatalog parse(std::string_view text);
  static DirectionCatalog load(const std::filesystem::path& path);
  static DirectionCatalog builtin_default();
};

/// Everything sampled into one degradation prompt.
struct DegradationPromptInputs {
  std::vector<TestId> candidate_tests;            // min(200, inventory) sampled tests
  std::vector<InterventionDirection> directions;  // 1..3 sampled directions
  std::vector<std::string> previous_titles;       // memory pool snapshot
};

/// Structured spec parsed from the degradation model's markdown output.
struct InversionTaskSpec {
  std::string task_name;
  std::string category;  // single word
  std::vector<TestId> selected_uts;
  std::string task_description;
  std::string expected_result;
  std::string recovery_strategy;
};

enum class GuidanceLevel { strong, weak, balanced };

const char* to_string(GuidanceLevel level);
GuidanceLevel guidance_level_from_string(std::string_view name);

/// A repair issue: hint-free body plus the optional hint that a rule-based
/// filter can split off.
struct IssueStatement {
  std::string body;
  std::optional<std::string> hint;
  GuidanceLevel guidance_level = GuidanceLevel::balanced;

  /// Body with the hint re-embedded under a "Hint:" marker line.
  std::string full_text() const;
};

/// Accumulated titles of previously generated tasks, injected into prompts
/// to push the model away from repeats. Append and snapshot are safe to
/// call from concurrent workers. Only the most recent `kMaxTitles` titles
/// are injected.
class MemoryPool {
 public:
  static constexpr std::size_t kMaxTitles = 500;

  MemoryPool() = default;
  MemoryPool(MemoryPool&& other) noexcept;
  MemoryPool& operator=(MemoryPool&& other) noexcept;
  MemoryPool(const MemoryPool&) = delete;
  MemoryPool& operator=(const MemoryPool&) = delete;

  void add(std::string title);
  std::vector<std::string> snapshot() const;
  std::size_t size() const;

  /// Seeds the pool with the bundle directory names under a dataset root
  /// (sorted), the cold-start source of previous titles.
  void load_dataset_dir(const std::filesystem::path& root);

 private:
  mutable std::mutex mu_;
  std::vector<std::string> titles_;
};

/// Samples prompt inputs: min(200, inventory) tests uniformly without
/// replacement and a uniform 1..3 directions, deterministic per seed.
/// Throws EmptyInventory / EmptyCatalog.
DegradationPromptInputs sample_inputs(const GoldInstance& gold, const MemoryPool& pool,
                                      const DirectionCatalog& catalog, std::uint64_t seed);

enum class DegradationStage { initial, refine };

/// Renders the stage-1 or stage-2 degradation prompt. The refine stage
/// requires the draft spec (MissingDraft otherwise).
std::string build_degradation_prompt(const DegradationPromptInputs& inputs,
                                     DegradationStage stage,
                                     const std::optional<InversionTaskSpec>& draft = std::nullopt);

/// Re-renders a spec in the fenced markdown block format the prompts demand.
std::string render_task_spec_markdown(const InversionTaskSpec& spec);

/// Extracts the six bold-labeled fields from the model output. Unknown
/// test paths are dropped with a warning; MissingField / NoValidTests /
/// TooManyTests on violations.
InversionTaskSpec parse_task_spec(std::string_view llm_output,
                                  const DegradationPromptInputs& inputs,
                                  std::vector<std::string>* warnings = nullptr);

/// Renders the repair-issue generation prompt for one guidance level.
/// Throws EmptySymptoms when the fail-to-pass list is empty.
std::string build_issue_prompt(const InversionTaskSpec& spec,
                               const std::vector<TestId>& symptoms, GuidanceLevel level);

/// Uniform of the three guidance levels.
GuidanceLevel pick_guidance_level(Rng& rng);

/// Splits at the first line that, after trimming, case-insensitively
/// equals "hint:". Everything after that line is the hint; without the
/// marker the text is returned unchanged and the hint is absent.
std::pair<std::string, std::optional<std::string>> strip_hint(std::string_view issue);

/// The agent-facing degradation task text: the instruction template with
/// the issue and the selected tests substituted.
std::string degradation_instruction(const InversionTaskSpec& spec);

/// The repair task manifest body: "instruction: |" plus the statement
/// indented by two spaces.
std::string repair_instruction(std::string_view problem_statement);

}  // namespace cligym
