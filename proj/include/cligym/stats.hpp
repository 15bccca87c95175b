#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "cligym/inversion.hpp"

namespace cligym {

struct DatasetStats {
  std::size_t instance_count = 0;
  std::size_t image_count = 0;
  double mean_issue_words = 0.0;
  double mean_dockerfile_lines = 0.0;
  double mean_f2p = 0.0;
  double mean_p2p = 0.0;
  std::uint64_t total_tokens_spent = 0;
  std::vector<std::string> errors;  // per-bundle failures, skipped
};

/// Streaming accumulator using the incremental mean update, so one scan
/// over the dataset suffices.
class StatsAccumulator {
 public:
  void add(const TaskInstance& instance);
  DatasetStats finish() const;

 private:
  std::size_t n_ = 0;
  double mean_words_ = 0.0;
  double mean_lines_ = 0.0;
  double mean_f2p_ = 0.0;
  double mean_p2p_ = 0.0;
  std::set<std::string> images_;
};

/// Word count of the hint-stripped issue body (whitespace tokens).
std::size_t issue_word_count(const TaskInstance& instance);

/// Scans a dataset root of bundle directories. Invalid bundles are
/// reported in `errors` and skipped; an empty root yields all-zero stats.
/// Token spend is read from the run ledger file when present.
DatasetStats compute_stats(const std::filesystem::path& dataset_root);

/// Full-production reference values, shown next to computed stats for
/// orientation only.
struct ReferenceStats {
  std::size_t instances = 1655;
  std::size_t images = 29;
  double issue_words = 159.1;
  double dockerfile_lines = 6.8;
  double f2p = 20.4;
  double p2p = 29.6;
};

std::string format_stats(const DatasetStats& stats, bool with_reference);

/// Run ledger: accumulated LLM token spend for a dataset root.
inline constexpr const char* kRunLedgerFile = "run_ledger.json";
void add_tokens_to_ledger(const std::filesystem::path& dataset_root, std::uint64_t tokens);
std::uint64_t read_token_ledger(const std::filesystem::path& dataset_root);

}  // namespace cligym
