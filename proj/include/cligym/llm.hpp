#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

namespace cligym {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 4096;
  std::string model;

  static ChatRequest user(std::string content, std::string model = {});
};

struct RetryPolicy {
  int max_attempts = 3;                        // >= 1
  std::chrono::milliseconds backoff_base{500};  // doubled per retry
};

struct ProviderConfig {
  std::string endpoint;        // full URL of the chat-completions endpoint
  std::string credential_env;  // env var holding the key; empty = no auth header
  double timeout_s = 60.0;
  RetryPolicy retry;
};

/// Chat-completion access point. Implementations must be safe for
/// concurrent complete() calls. Tokens are approximated as whitespace
/// words of prompt plus reply and accumulated for the cost ledger.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
  std::uint64_t tokens_spent() const { return tokens_.load(); }

 protected:
  void account(const ChatRequest& request, const std::string& reply);

 private:
  std::atomic<std::uint64_t> tokens_{0};
};

/// HTTP client for the de-facto chat-completions JSON shape. Retries
/// transient transport failures and rate limits with exponential backoff;
/// authentication failures are never retried.
class HttpChatClient : public LlmClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpChatClient(ProviderConfig config, Sleeper sleeper = nullptr);
  std::string complete(const ChatRequest& request) override;

 private:
  ProviderConfig config_;
  Sleeper sleeper_;
};

/// Deterministic scripted provider: returns the configured replies in
/// order. With fixed scripts and fixed seeds the whole pipeline becomes
/// bit-reproducible.
class MockChatClient : public LlmClient {
 public:
  MockChatClient() = default;
  explicit MockChatClient(std::vector<std::string> replies);

  /// Script file: a JSON array of reply strings.
  static std::vector<std::string> replies_from_file(const std::filesystem::path& path);

  void push_reply(std::string reply);
  std::string complete(const ChatRequest& request) override;
  std::size_t replies_left() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

}  // namespace cligym
