#include "cligym/stats.hpp"

#include <algorithm>

#include "json.hpp"

#include "cligym/bundle.hpp"
#include "cligym/errors.hpp"
#include "cligym/prompts.hpp"
#include "cligym/util.hpp"

namespace cligym {

std::size_t issue_word_count(const TaskInstance& instance) {
  auto [body, hint] = strip_hint(instance.issue_text);
  (void)hint;
  return count_words(body);
}

void StatsAccumulator::add(const TaskInstance& instance) {
  ++n_;
  const double n = static_cast<double>(n_);
  mean_words_ += (static_cast<double>(issue_word_count(instance)) - mean_words_) / n;
  mean_lines_ +=
      (static_cast<double>(instance.delta.dockerfile_lines.size()) - mean_lines_) / n;
  mean_f2p_ += (static_cast<double>(instance.fail_to_pass.size()) - mean_f2p_) / n;
  mean_p2p_ += (static_cast<double>(instance.pass_to_pass.size()) - mean_p2p_) / n;
  images_.insert(instance.gold_image_tag);
}

DatasetStats StatsAccumulator::finish() const {
  DatasetStats stats;
  stats.instance_count = n_;
  stats.image_count = images_.size();
  stats.mean_issue_words = mean_words_;
  stats.mean_dockerfile_lines = mean_lines_;
  stats.mean_f2p = mean_f2p_;
  stats.mean_p2p = mean_p2p_;
  return stats;
}

DatasetStats compute_stats(const std::filesystem::path& dataset_root) {
  StatsAccumulator acc;
  std::vector<std::string> errors;

  std::vector<std::filesystem::path> dirs;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dataset_root, ec)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());

  for (const std::filesystem::path& dir : dirs) {
    if (!std::filesystem::exists(dir / "meta.json")) continue;  // not a bundle
    try {
      acc.add(load_and_validate(dir));
    } catch (const Error& e) {
      errors.push_back(dir.filename().string() + ": " + e.what());
    }
  }

  DatasetStats stats = acc.finish();
  stats.errors = std::move(errors);
  stats.total_tokens_spent = read_token_ledger(dataset_root);
  return stats;
}

std::string format_stats(const DatasetStats& stats, bool with_reference) {
  char buf[512];
  std::string out;
  out += "metric                 value\n";
  std::snprintf(buf, sizeof(buf), "instances              %zu\n", stats.instance_count);
  out += buf;
  std::snprintf(buf, sizeof(buf), "images                 %zu\n", stats.image_count);
  out += buf;
  std::snprintf(buf, sizeof(buf), "mean issue words       %.2f\n", stats.mean_issue_words);
  out += buf;
  std::snprintf(buf, sizeof(buf), "mean dockerfile lines  %.2f\n", stats.mean_dockerfile_lines);
  out += buf;
  std::snprintf(buf, sizeof(buf), "mean fail-to-pass      %.2f\n", stats.mean_f2p);
  out += buf;
  std::snprintf(buf, sizeof(buf), "mean pass-to-pass      %.2f\n", stats.mean_p2p);
  out += buf;
  std::snprintf(buf, sizeof(buf), "tokens spent           %llu\n",
                static_cast<unsigned long long>(stats.total_tokens_spent));
  out += buf;
  if (with_reference) {
    ReferenceStats ref;
    std::snprintf(buf, sizeof(buf),
                  "\nfull-scale reference: %zu instances, %zu images, %.1f words, "
                  "%.1f lines, %.1f f2p, %.1f p2p\n",
                  ref.instances, ref.images, ref.issue_words, ref.dockerfile_lines, ref.f2p,
                  ref.p2p);
    out += buf;
  }
  if (!stats.errors.empty()) {
    out += "\nskipped bundles:\n";
    for (const std::string& err : stats.errors) out += "  " + err + "\n";
  }
  return out;
}

void add_tokens_to_ledger(const std::filesystem::path& dataset_root, std::uint64_t tokens) {
  if (tokens == 0) return;
  std::filesystem::path file = dataset_root / kRunLedgerFile;
  std::uint64_t total = read_token_ledger(dataset_root) + tokens;
  nlohmann::ordered_json doc;
  doc["tokens_spent"] = total;
  write_text_file(file, doc.dump(2) + "\n");
}

std::uint64_t read_token_ledger(const std::filesystem::path& dataset_root) {
  std::optional<std::string> text = try_read_text_file(dataset_root / kRunLedgerFile);
  if (!text) return 0;
  try {
    return nlohmann::json::parse(*text).value("tokens_spent", std::uint64_t{0});
  } catch (const nlohmann::json::exception&) {
    return 0;
  }
}

}  // namespace cligym
