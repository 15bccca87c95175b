#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cligym/state.hpp"

namespace cligym {

enum class TestOutcome { passed, failed, errored, skipped };

struct TestRecord {
  TestId id;
  TestOutcome outcome;
};

enum class RunnerStatus { completed, command_failed };

/// Parsed result of one execution of the test script.
struct TestRunReport {
  std::vector<TestRecord> records;
  RunnerStatus runner_status = RunnerStatus::command_failed;
  std::string raw_log_path;
  double duration_s = 0.0;
};

enum class ClassifyVerdict { instance_ok, discard };

/// Fail-to-pass / pass-to-pass split of a selection, in selection order.
/// The two sets are disjoint; skipped tests belong to neither.
struct Classification {
  std::vector<TestId> fail_to_pass;
  std::vector<TestId> pass_to_pass;
  ClassifyVerdict verdict = ClassifyVerdict::discard;
};

/// Renders the test script: the fixed template with {UTs} replaced by the
/// space-joined canonical ids, in input order. Throws EmptySelection.
std::string render_run_script(const std::vector<TestId>& selected);

/// Parses a verbose runner log. One record per per-test status line
/// (PASSED/FAILED/ERROR/SKIPPED next to a test identifier); if a test id
/// appears more than once the last status wins. runner_status is
/// command_failed when no session summary footer is present. Never throws
/// on malformed input.
TestRunReport parse_verbose_log(std::string_view log);

/// Applies the outcome rules: on command failure every selected test is
/// fail-to-pass; otherwise failed/errored selected tests are fail-to-pass
/// and passed ones pass-to-pass. Selected tests missing from a completed
/// report count as fail-to-pass; skipped tests are excluded from both
/// sets. Verdict is discard iff fail-to-pass is empty.
Classification classify_outcomes(const std::vector<TestId>& selected,
                                 const TestRunReport& report);

const char* to_string(TestOutcome outcome);

}  // namespace cligym
