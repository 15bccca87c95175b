#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "cligym/llm.hpp"

namespace cligym {

/// Tool-wide configuration, loaded from one JSON file. Credentials are
/// only ever referenced by environment variable name.
struct ToolConfig {
  // backend
  std::string backend = "sim";  // "sim" | "container"
  std::string container_runtime = "docker";
  int max_concurrent_builds = 2;

  // provider
  std::string provider_endpoint;   // empty with mock_script set = offline mode
  std::string provider_model = "gpt-4o-mini";
  std::string credential_env = "CLIGYM_API_KEY";
  double provider_timeout_s = 60.0;
  int provider_max_attempts = 3;
  int provider_backoff_ms = 500;
  double temperature = 0.7;
  int max_tokens = 4096;
  std::filesystem::path mock_script;  // JSON array of canned replies

  // pipeline
  double refine_probability = 0.5;
  double budget_s = 900.0;
  int jobs = 1;
  std::string agent = "breaker";
  std::filesystem::path direction_catalog;  // empty = builtin defaults
  std::filesystem::path cheat_rules;        // empty = builtin defaults
  std::filesystem::path artifacts_root = "artifacts";

  static ToolConfig load(const std::filesystem::path& path);

  /// Mock client when mock_script is set, HTTP client otherwise.
  std::unique_ptr<LlmClient> make_llm_client() const;
};

}  // namespace cligym
