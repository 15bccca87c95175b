#include "cligym/config.hpp"

#include "json.hpp"

#include "cligym/errors.hpp"
#include "cligym/util.hpp"

namespace cligym {

ToolConfig ToolConfig::load(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad config " + path.string() + ": " + e.what());
  }

  ToolConfig cfg;
  cfg.backend = doc.value("backend", cfg.backend);
  cfg.container_runtime = doc.value("container_runtime", cfg.container_runtime);
  cfg.max_concurrent_builds = doc.value("max_concurrent_builds", cfg.max_concurrent_builds);

  if (doc.contains("provider")) {
    const auto& p = doc.at("provider");
    cfg.provider_endpoint = p.value("endpoint", cfg.provider_endpoint);
    cfg.provider_model = p.value("model", cfg.provider_model);
    cfg.credential_env = p.value("credential_env", cfg.credential_env);
    cfg.provider_timeout_s = p.value("timeout_s", cfg.provider_timeout_s);
    cfg.provider_max_attempts = p.value("max_attempts", cfg.provider_max_attempts);
    cfg.provider_backoff_ms = p.value("backoff_ms", cfg.provider_backoff_ms);
    cfg.temperature = p.value("temperature", cfg.temperature);
    cfg.max_tokens = p.value("max_tokens", cfg.max_tokens);
    if (p.contains("mock_script")) cfg.mock_script = p.at("mock_script").get<std::string>();
  }

  cfg.refine_probability = doc.value("refine_probability", cfg.refine_probability);
  cfg.budget_s = doc.value("budget_s", cfg.budget_s);
  cfg.jobs = doc.value("jobs", cfg.jobs);
  cfg.agent = doc.value("agent", cfg.agent);
  if (doc.contains("direction_catalog")) {
    cfg.direction_catalog = doc.at("direction_catalog").get<std::string>();
  }
  if (doc.contains("cheat_rules")) cfg.cheat_rules = doc.at("cheat_rules").get<std::string>();
  if (doc.contains("artifacts_root")) {
    cfg.artifacts_root = doc.at("artifacts_root").get<std::string>();
  }

  if (cfg.backend != "sim" && cfg.backend != "container") {
    throw Error("config backend must be \"sim\" or \"container\"");
  }
  if (cfg.refine_probability < 0.0 || cfg.refine_probability > 1.0) {
    throw Error("refine_probability must lie in [0, 1]");
  }
  return cfg;
}

std::unique_ptr<LlmClient> ToolConfig::make_llm_client() const {
  if (!mock_script.empty()) {
    return std::make_unique<MockChatClient>(MockChatClient::replies_from_file(mock_script));
  }
  if (provider_endpoint.empty()) {
    throw Error("config needs either provider.endpoint or provider.mock_script");
  }
  ProviderConfig provider;
  provider.endpoint = provider_endpoint;
  provider.credential_env = credential_env;
  provider.timeout_s = provider_timeout_s;
  provider.retry.max_attempts = provider_max_attempts;
  provider.retry.backoff_base = std::chrono::milliseconds(provider_backoff_ms);
  return std::make_unique<HttpChatClient>(provider);
}

}  // namespace cligym
