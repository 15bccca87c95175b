#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace cligym {

// ---- strings ----

std::string trim(std::string_view s);
std::string trim_right(std::string_view s);
std::string to_lower(std::string_view s);
bool contains(std::string_view hay, std::string_view needle);

// Splits on '\n'; a trailing '\r' on each line is dropped. A trailing
// newline does not produce an extra empty element.
std::vector<std::string> split_lines(std::string_view text);

std::vector<std::string> split_ws(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string text, std::string_view from, std::string_view to);

// Prefixes every non-empty line with `prefix`; empty lines stay empty.
std::string indent_lines(std::string_view text, std::string_view prefix);

// Number of maximal non-whitespace runs.
std::size_t count_words(std::string_view text);

// Lowercase [a-z0-9] with runs of anything else squeezed to single '-'.
std::string slugify(std::string_view text);

// ---- hashing ----

std::string sha256_hex(std::string_view data);

// ---- deterministic rng ----
//
// Thin wrapper over mt19937_64 with explicit draw algorithms, so a fixed
// seed reproduces the same stream on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, bound) via rejection sampling. bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

  // Uniform in [0, 1) with 53 bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

// ---- files ----

std::string read_text_file(const std::filesystem::path& path);
std::optional<std::string> try_read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace cligym
