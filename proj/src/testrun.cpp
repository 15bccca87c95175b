#include "cligym/testrun.hpp"

#include <map>
#include <optional>

#include "cligym/errors.hpp"
#include "cligym/templates.hpp"
#include "cligym/util.hpp"

namespace cligym {

namespace {

std::optional<TestOutcome> outcome_from_marker(std::string_view marker) {
  if (marker == "PASSED") return TestOutcome::passed;
  if (marker == "FAILED") return TestOutcome::failed;
  if (marker == "ERROR") return TestOutcome::errored;
  if (marker == "SKIPPED") return TestOutcome::skipped;
  return std::nullopt;
}

// Session summary footer, e.g. "==== 1 failed, 2 passed in 0.31s ====".
bool is_summary_footer(const std::string& line) {
  std::string t = trim(line);
  if (t.size() < 8 || t.front() != '=' || t.back() != '=') return false;
  if (!contains(t, " in ")) return false;
  return contains(t, "passed") || contains(t, "failed") || contains(t, "error") ||
         contains(t, "skipped") || contains(t, "no tests ran") || contains(t, "warning");
}

double footer_duration(const std::string& line) {
  // "... in 12.34s ..." -> 12.34
  std::size_t pos = line.rfind(" in ");
  if (pos == std::string::npos) return 0.0;
  std::size_t start = pos + 4;
  std::size_t end = start;
  while (end < line.size() &&
         (std::isdigit(static_cast<unsigned char>(line[end])) || line[end] == '.')) {
    ++end;
  }
  if (end == start || end >= line.size() || line[end] != 's') return 0.0;
  try {
    return std::stod(line.substr(start, end - start));
  } catch (...) {
    return 0.0;
  }
}

}  // namespace

const char* to_string(TestOutcome outcome) {
  switch (outcome) {
    case TestOutcome::passed: return "passed";
    case TestOutcome::failed: return "failed";
    case TestOutcome::errored: return "errored";
    case TestOutcome::skipped: return "skipped";
  }
  return "?";
}

std::string render_run_script(const std::vector<TestId>& selected) {
  if (selected.empty()) throw EmptySelection("no tests selected for run script");
  std::vector<std::string> ids;
  ids.reserve(selected.size());
  for (const TestId& id : selected) ids.push_back(id.canonical());
  return substitute_template(templates::run_tests(), {{"{UTs}", join(ids, " ")}});
}

TestRunReport parse_verbose_log(std::string_view log) {
  TestRunReport report;
  std::map<std::string, std::size_t> seen;  // canonical id -> record index
  for (const std::string& line : split_lines(log)) {
    std::vector<std::string> tokens = split_ws(line);
    if (tokens.size() >= 2 && contains(tokens[0], "::")) {
      if (auto outcome = outcome_from_marker(tokens[1])) {
        TestId id;
        try {
          id = TestId::parse(tokens[0]);
        } catch (const InvalidState&) {
          continue;
        }
        auto [it, inserted] = seen.emplace(id.canonical(), report.records.size());
        if (inserted) {
          report.records.push_back({std::move(id), *outcome});
        } else {
          report.records[it->second].outcome = *outcome;
        }
        continue;
      }
    }
    if (is_summary_footer(line)) {
      report.runner_status = RunnerStatus::completed;
      report.duration_s = footer_duration(line);
    }
  }
  return report;
}

Classification classify_outcomes(const std::vector<TestId>& selected,
                                 const TestRunReport& report) {
  if (selected.empty()) throw EmptySelection("no tests selected for classification");

  std::map<std::string, TestOutcome> outcomes;
  for (const TestRecord& rec : report.records) outcomes[rec.id.canonical()] = rec.outcome;

  Classification result;
  std::map<std::string, bool> handled;
  for (const TestId& id : selected) {
    std::string key = id.canonical();
    if (handled[key]) continue;  // duplicate selection entries count once
    handled[key] = true;

    if (report.runner_status == RunnerStatus::command_failed) {
      result.fail_to_pass.push_back(id);
      continue;
    }
    auto it = outcomes.find(key);
    if (it == outcomes.end()) {
      // Not even collected: failing from the task's perspective.
      result.fail_to_pass.push_back(id);
      continue;
    }
    switch (it->second) {
      case TestOutcome::passed:
        result.pass_to_pass.push_back(id);
        break;
      case TestOutcome::failed:
      case TestOutcome::errored:
        result.fail_to_pass.push_back(id);
        break;
      case TestOutcome::skipped:
        break;
    }
  }
  result.verdict = result.fail_to_pass.empty() ? ClassifyVerdict::discard
                                               : ClassifyVerdict::instance_ok;
  return result;
}

}  // namespace cligym
