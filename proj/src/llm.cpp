#include "cligym/llm.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "cligym/errors.hpp"
#include "cligym/util.hpp"

namespace cligym {

namespace {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) throw Error("endpoint URL needs a scheme: " + url);
  std::size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

ChatRequest ChatRequest::user(std::string content, std::string model) {
  ChatRequest req;
  req.messages.push_back({"user", std::move(content)});
  req.model = std::move(model);
  return req;
}

void LlmClient::account(const ChatRequest& request, const std::string& reply) {
  std::uint64_t n = count_words(reply);
  for (const ChatMessage& m : request.messages) n += count_words(m.content);
  tokens_.fetch_add(n);
}

HttpChatClient::HttpChatClient(ProviderConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
  if (config_.retry.max_attempts < 1) throw Error("retry policy needs max_attempts >= 1");
  if (config_.timeout_s <= 0) throw Error("provider timeout must be positive");
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  if (request.messages.empty()) throw Error("chat request without messages");
  if (request.temperature < 0) throw Error("negative temperature");

  nlohmann::json body;
  body["model"] = request.model;
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  body["messages"] = nlohmann::json::array();
  for (const ChatMessage& m : request.messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  const std::string payload = body.dump();

  SplitUrl url = split_url(config_.endpoint);
  httplib::Client client(url.base);
  client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_s));
  client.set_read_timeout(std::chrono::duration<double>(config_.timeout_s));

  httplib::Headers headers;
  if (!config_.credential_env.empty()) {
    if (const char* key = std::getenv(config_.credential_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  std::string last_failure = "no attempt made";
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    auto res = client.Post(url.path, headers, payload, "application/json");
    if (res) {
      if (res->status == 401 || res->status == 403) {
        throw AuthRejected("provider rejected credentials (status " +
                           std::to_string(res->status) + ")");
      }
      if (res->status == 200) {
        try {
          nlohmann::json reply = nlohmann::json::parse(res->body);
          std::string content =
              reply.at("choices").at(0).at("message").at("content").get<std::string>();
          account(request, content);
          return content;
        } catch (const nlohmann::json::exception& e) {
          throw MalformedResponse(std::string("bad completion payload: ") + e.what());
        }
      }
      if (res->status == 429 || res->status >= 500) {
        last_failure = "status " + std::to_string(res->status);
      } else {
        throw MalformedResponse("unexpected status " + std::to_string(res->status));
      }
    } else {
      last_failure = "transport: " + httplib::to_string(res.error());
    }
    if (attempt < config_.retry.max_attempts) {
      sleeper_(config_.retry.backoff_base * (1 << (attempt - 1)));
    }
  }
  throw TransportError("gave up after " + std::to_string(config_.retry.max_attempts) +
                       " attempts, last failure: " + last_failure);
}

MockChatClient::MockChatClient(std::vector<std::string> replies)
    : replies_(std::move(replies)) {}

std::vector<std::string> MockChatClient::replies_from_file(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad mock script " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error("mock script must be a JSON array of strings");
  std::vector<std::string> replies;
  for (const auto& item : doc) replies.push_back(item.get<std::string>());
  return replies;
}

void MockChatClient::push_reply(std::string reply) {
  std::lock_guard<std::mutex> lock(mu_);
  replies_.push_back(std::move(reply));
}

std::string MockChatClient::complete(const ChatRequest& request) {
  if (request.messages.empty()) throw Error("chat request without messages");
  std::string reply;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (next_ >= replies_.size()) {
      throw TransportError("mock reply script exhausted after " +
                           std::to_string(replies_.size()) + " replies");
    }
    reply = replies_[next_++];
  }
  account(request, reply);
  return reply;
}

std::size_t MockChatClient::replies_left() const {
  std::lock_guard<std::mutex> lock(mu_);
  return replies_.size() - next_;
}

}  // namespace cligym
