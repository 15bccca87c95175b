#include "cligym/prompts.hpp"

#include <algorithm>
#include <array>
#include <set>

#include "cligym/errors.hpp"
#include "cligym/templates.hpp"

namespace cligym {

namespace {

std::string render_id_list(const std::vector<TestId>& ids, std::string_view prefix,
                           std::string_view sep) {
  std::vector<std::string> parts;
  parts.reserve(ids.size());
  for (const TestId& id : ids) parts.push_back(std::string(prefix) + id.canonical());
  return join(parts, sep);
}

// Python list repr, matching the os.listdir injection the template mimics.
std::string render_title_list(const std::vector<std::string>& titles) {
  std::string out = "[";
  for (std::size_t i = 0; i < titles.size(); ++i) {
    if (i) out += ", ";
    out += '\'';
    out += replace_all(titles[i], "'", "\\'");
    out += '\'';
  }
  out += ']';
  return out;
}

std::string render_directions(const std::vector<InterventionDirection>& dirs) {
  std::vector<std::string> parts;
  parts.reserve(dirs.size());
  for (const auto& d : dirs) parts.push_back("- " + d.label + ": " + d.description);
  return join(parts, "\n");
}

constexpr std::array<std::string_view, 6> kSpecFields = {
    "Task Name", "Category", "Selected UTs", "Task Description", "Expected Result",
    "Recovery Strategy"};

// "**Label**: value" at line start -> label, else nullopt.
std::optional<std::string> field_label(const std::string& line) {
  std::string t = trim(line);
  if (t.substr(0, 2) != "**") return std::nullopt;
  std::size_t close = t.find("**", 2);
  if (close == std::string::npos) return std::nullopt;
  std::size_t colon = t.find(':', close + 2);
  if (colon == std::string::npos || trim(t.substr(close + 2, colon - close - 2)) != "")
    return std::nullopt;
  std::string label = trim(t.substr(2, close - 2));
  for (std::string_view known : kSpecFields) {
    if (label == known) return label;
  }
  return std::nullopt;
}

std::string field_value_on_line(const std::string& line) {
  std::string t = trim(line);
  std::size_t close = t.find("**", 2);
  std::size_t colon = t.find(':', close + 2);
  return trim(t.substr(colon + 1));
}

}  // namespace

const char* to_string(GuidanceLevel level) {
  switch (level) {
    case GuidanceLevel::strong: return "strong";
    case GuidanceLevel::weak: return "weak";
    case GuidanceLevel::balanced: return "balanced";
  }
  return "?";
}

GuidanceLevel guidance_level_from_string(std::string_view name) {
  if (name == "strong") return GuidanceLevel::strong;
  if (name == "weak") return GuidanceLevel::weak;
  if (name == "balanced") return GuidanceLevel::balanced;
  throw Error("unknown guidance level: " + std::string(name));
}

std::string IssueStatement::full_text() const {
  if (!hint) return body;
  return body + "\nHint:\n" + *hint;
}

DirectionCatalog DirectionCatalog::parse(std::string_view text) {
  DirectionCatalog catalog;
  std::set<std::string> labels;
  for (const std::string& raw : split_lines(text)) {
    std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::size_t colon = line.find(':');
    if (colon == std::string::npos) {
      throw Error("direction entry needs 'label: description': " + line);
    }
    InterventionDirection dir;
    dir.label = trim(line.substr(0, colon));
    dir.description = trim(line.substr(colon + 1));
    if (dir.label.empty()) throw Error("direction with empty label");
    if (!labels.insert(dir.label).second) {
      throw Error("duplicate direction label: " + dir.label);
    }
    catalog.entries.push_back(std::move(dir));
  }
  return catalog;
}

DirectionCatalog DirectionCatalog::load(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

DirectionCatalog DirectionCatalog::builtin_default() {
  return parse(
      "library-corruption: Corrupt shared libraries or compiled extensions so imports and "
      "dynamic linking fail.\n"
      "dependency-removal: Remove or break installed packages the test suite depends on.\n"
      "file-tampering: Delete, truncate, or rewrite source and data files the code reads.\n"
      "permission-lockdown: Revoke read or write permissions on files the tests need.\n"
      "environment-variables: Unset or repoint environment variables the runtime relies on.\n"
      "path-sabotage: Break command lookup so required executables stop resolving.\n"
      "configuration-drift: Rewrite configuration files into inconsistent or stale shapes.\n"
      "locale-tampering: Switch locale or encoding settings so parsing and formatting "
      "misbehave.\n");
}

MemoryPool::MemoryPool(MemoryPool&& other) noexcept {
  std::lock_guard<std::mutex> lock(other.mu_);
  titles_ = std::move(other.titles_);
}

MemoryPool& MemoryPool::operator=(MemoryPool&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mu_, other.mu_);
    titles_ = std::move(other.titles_);
  }
  return *this;
}

void MemoryPool::add(std::string title) {
  std::lock_guard<std::mutex> lock(mu_);
  if (std::find(titles_.begin(), titles_.end(), title) != titles_.end()) return;
  titles_.push_back(std::move(title));
}

std::vector<std::string> MemoryPool::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  if (titles_.size() <= kMaxTitles) return titles_;
  return std::vector<std::string>(titles_.end() - kMaxTitles, titles_.end());
}

std::size_t MemoryPool::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return titles_.size();
}

void MemoryPool::load_dataset_dir(const std::filesystem::path& root) {
  std::error_code ec;
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(root, ec)) {
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  for (std::string& n : names) add(std::move(n));
}

DegradationPromptInputs sample_inputs(const GoldInstance& gold, const MemoryPool& pool,
                                      const DirectionCatalog& catalog, std::uint64_t seed) {
  if (gold.test_inventory.empty()) throw EmptyInventory("gold instance has no tests");
  if (catalog.entries.empty()) throw EmptyCatalog("direction catalog is empty");

  Rng rng(seed);
  DegradationPromptInputs inputs;

  std::size_t n_dirs = 1 + static_cast<std::size_t>(rng.below(3));
  n_dirs = std::min(n_dirs, catalog.entries.size());
  for (std::size_t i : rng.sample_indices(catalog.entries.size(), n_dirs)) {
    inputs.directions.push_back(catalog.entries[i]);
  }

  std::size_t quota = std::min<std::size_t>(200, gold.test_inventory.size());
  for (std::size_t i : rng.sample_indices(gold.test_inventory.size(), quota)) {
    inputs.candidate_tests.push_back(gold.test_inventory[i]);
  }

  inputs.previous_titles = pool.snapshot();
  return inputs;
}

std::string build_degradation_prompt(const DegradationPromptInputs& inputs,
                                     DegradationStage stage,
                                     const std::optional<InversionTaskSpec>& draft) {
  if (stage == DegradationStage::initial) {
    return substitute_template(
        templates::degradation_prompt_initial(),
        {{"{candidate_uts_list}", render_id_list(inputs.candidate_tests, "- ", "\n")},
         {"{directions}", render_directions(inputs.directions)},
         {"{os.listdir(dataset_path)}", render_title_list(inputs.previous_titles)}});
  }
  if (!draft) throw MissingDraft("refine stage needs a draft spec");
  return substitute_template(
      templates::degradation_prompt_refine(),
      {{"{extract_result['selected_uts']}", render_id_list(draft->selected_uts, "", "\n")},
       {"{extract_result}", render_task_spec_markdown(*draft)}});
}

std::string render_task_spec_markdown(const InversionTaskSpec& spec) {
  std::string out = "---\n";
  out += "**Task Name**: " + spec.task_name + "\n";
  out += "**Category**: " + spec.category + "\n";
  out += "**Selected UTs**:\n";
  for (const TestId& id : spec.selected_uts) out += "- " + id.canonical() + "\n";
  out += "**Task Description**: " + spec.task_description + "\n";
  out += "**Expected Result**: " + spec.expected_result + "\n";
  out += "**Recovery Strategy**: " + spec.recovery_strategy + "\n";
  out += "---";
  return out;
}

InversionTaskSpec parse_task_spec(std::string_view llm_output,
                                  const DegradationPromptInputs& inputs,
                                  std::vector<std::string>* warnings) {
  std::vector<std::string> lines = split_lines(llm_output);

  // Restrict to the fenced block when both fences exist.
  std::size_t begin = 0, end = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]) == "---") {
      begin = i + 1;
      for (std::size_t j = begin; j < lines.size(); ++j) {
        if (trim(lines[j]) == "---") {
          end = j;
          break;
        }
      }
      break;
    }
  }

  std::vector<std::pair<std::string, std::string>> fields;  // label -> value
  std::string current_label;
  std::string current_value;
  auto flush = [&]() {
    if (!current_label.empty()) fields.emplace_back(current_label, trim(current_value));
    current_label.clear();
    current_value.clear();
  };
  for (std::size_t i = begin; i < end && i < lines.size(); ++i) {
    if (auto label = field_label(lines[i])) {
      flush();
      current_label = *label;
      current_value = field_value_on_line(lines[i]);
    } else if (!current_label.empty()) {
      current_value += '\n';
      current_value += lines[i];
    }
  }
  flush();

  auto find = [&](std::string_view label) -> const std::string* {
    for (const auto& [k, v] : fields) {
      if (k == label) return &v;
    }
    return nullptr;
  };
  for (std::string_view label : kSpecFields) {
    if (!find(label)) throw MissingField(std::string(label));
  }

  InversionTaskSpec spec;
  spec.task_name = *find("Task Name");
  spec.task_description = *find("Task Description");
  spec.expected_result = *find("Expected Result");
  spec.recovery_strategy = *find("Recovery Strategy");

  // Category is a single word by contract; keep the first token.
  std::vector<std::string> cat = split_ws(*find("Category"));
  spec.category = cat.empty() ? "" : cat[0];

  std::set<std::string> candidates;
  for (const TestId& id : inputs.candidate_tests) candidates.insert(id.canonical());

  std::set<std::string> taken;
  for (const std::string& raw : split_lines(*find("Selected UTs"))) {
    std::string line = trim(raw);
    if (line.substr(0, 2) == "- " || line.substr(0, 2) == "* ") line = trim(line.substr(2));
    if (line.empty()) continue;
    TestId id;
    try {
      id = TestId::parse(line);
    } catch (const InvalidState&) {
      continue;
    }
    std::string key = id.canonical();
    if (!candidates.count(key)) {
      if (warnings) warnings->push_back("dropped unknown test: " + key);
      continue;
    }
    if (taken.insert(key).second) spec.selected_uts.push_back(std::move(id));
  }

  if (spec.selected_uts.empty()) {
    throw NoValidTests("no selected test matches the candidate list");
  }
  if (spec.selected_uts.size() > 50) {
    throw TooManyTests("spec selects " + std::to_string(spec.selected_uts.size()) +
                       " tests, limit is 50");
  }
  return spec;
}

std::string build_issue_prompt(const InversionTaskSpec& spec,
                               const std::vector<TestId>& symptoms, GuidanceLevel level) {
  if (symptoms.empty()) throw EmptySymptoms("issue prompt needs a non-empty fail-to-pass set");
  std::string_view tpl;
  switch (level) {
    case GuidanceLevel::strong: tpl = templates::repair_prompt_strong(); break;
    case GuidanceLevel::weak: tpl = templates::repair_prompt_weak(); break;
    case GuidanceLevel::balanced: tpl = templates::repair_prompt_balanced(); break;
  }
  return substitute_template(tpl,
                             {{"{data[\"task_description\"]}", spec.task_description},
                              {"{symptoms_UTs}", render_id_list(symptoms, "", "\n")}});
}

GuidanceLevel pick_guidance_level(Rng& rng) {
  switch (rng.below(3)) {
    case 0: return GuidanceLevel::strong;
    case 1: return GuidanceLevel::weak;
    default: return GuidanceLevel::balanced;
  }
}

std::pair<std::string, std::optional<std::string>> strip_hint(std::string_view issue) {
  std::size_t line_start = 0;
  while (line_start <= issue.size()) {
    std::size_t nl = issue.find('\n', line_start);
    std::string_view line = (nl == std::string_view::npos)
                                ? issue.substr(line_start)
                                : issue.substr(line_start, nl - line_start);
    if (to_lower(trim(line)) == "hint:") {
      std::string body(issue.substr(0, line_start));
      if (!body.empty() && body.back() == '\n') body.pop_back();
      std::string hint;
      if (nl != std::string_view::npos) hint = std::string(issue.substr(nl + 1));
      return {std::move(body), std::move(hint)};
    }
    if (nl == std::string_view::npos) break;
    line_start = nl + 1;
  }
  return {std::string(issue), std::nullopt};
}

std::string degradation_instruction(const InversionTaskSpec& spec) {
  // Continuation lines keep the placeholder's four-space indent so the
  // instruction stays a valid YAML block scalar.
  std::string issue = replace_all(spec.task_description, "\n", "\n    ");
  return substitute_template(
      templates::degradation_instruction(),
      {{"{degradaton_issue}", issue},
       {"{UTs}", render_id_list(spec.selected_uts, "", "\n    ")}});
}

std::string repair_instruction(std::string_view problem_statement) {
  return substitute_template(templates::repair_instruction(),
                             {{"{problem_statement}", indent_lines(problem_statement, "  ")}});
}

}  // namespace cligym
