#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>

namespace causal_rag {

struct CompletionRequest {
  std::string system_text;
  std::string user_text;
  std::string model_id;
  double temperature = 0.0;
  int max_output_tokens = 512;
  // Prompt catalog version the texts came from; empty for ad-hoc requests.
  std::string catalog_version;
};

struct CompletionResponse {
  std::string text;
  std::map<std::string, std::string> provider_meta;
};

// Hex SHA-256 over model id, system text, user text, temperature and catalog
// version. max_output_tokens is deliberately NOT part of the hash, so raising
// an output cap keeps recorded transcripts valid.
std::string request_hash(const CompletionRequest& req);

struct TranscriptEntry {
  std::string request_hash;
  std::string response_text;
  std::string timestamp;  // UTC, ISO 8601
};

// Append-only JSONL log of request hash -> response text. Lookups take a
// shared lock; appends are serialized and flushed line by line so that an
// interrupted run keeps every answer it already received.
class Transcript {
 public:
  Transcript() = default;  // in-memory only
  explicit Transcript(std::filesystem::path path);

  Transcript(const Transcript&) = delete;
  Transcript& operator=(const Transcript&) = delete;

  std::optional<std::string> lookup(const std::string& hash) const;
  // No-op when the hash is already present (first answer wins).
  void append(const std::string& hash, const std::string& response_text);

  std::size_t size() const;
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
  std::ofstream out_;
};

// Result of one HTTP exchange. status == 0 means the request never got an
// HTTP response (connection refused, timeout, ...).
struct HttpResult {
  int status = 0;
  std::string body;
  std::string error;
};

// Raw chat transport used by live and record modes.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual HttpResult send(const CompletionRequest& req) = 0;
};

// OpenAI-compatible POST {base_url}/v1/chat/completions.
class HttpChatTransport : public ChatTransport {
 public:
  HttpChatTransport(std::string base_url, std::string api_key, std::chrono::seconds timeout = std::chrono::seconds(120));
  HttpResult send(const CompletionRequest& req) override;

 private:
  std::string base_url_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

// Scripted backend for tests and offline fixtures: a function from request to
// reply text, wrapped as a successful chat-completions HTTP response.
class ScriptedTransport : public ChatTransport {
 public:
  using Script = std::function<std::string(const CompletionRequest&)>;
  explicit ScriptedTransport(Script script) : script_(std::move(script)) {}
  HttpResult send(const CompletionRequest& req) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  Script script_;
  std::atomic<std::size_t> calls_{0};
};

// Builds the JSON body the live transport sends; exposed for tests.
std::string chat_request_body(const CompletionRequest& req);
// Extracts choices[0].message.content (and finish reason / usage into meta).
CompletionResponse parse_chat_response(const std::string& body);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
  // Invoked with the full-jitter delay; tests swap in a recorder.
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

enum class Backend { live, replay, record };

Backend parse_backend(std::string_view name);
std::string_view to_string(Backend backend);

// Provider-neutral completion entry point.
class LlmGateway {
 public:
  LlmGateway(Backend backend, ChatTransport* transport, Transcript* transcript, RetryPolicy retry = {});

  CompletionResponse complete(const CompletionRequest& req);

  Backend backend() const { return backend_; }
  // Requests that actually went out through the transport (all attempts).
  std::size_t network_calls() const { return network_calls_.load(); }

 private:
  CompletionResponse call_with_retry(const CompletionRequest& req);

  Backend backend_;
  ChatTransport* transport_;
  Transcript* transcript_;
  RetryPolicy retry_;
  std::atomic<std::size_t> network_calls_{0};
  std::mutex jitter_mu_;
  std::mt19937_64 jitter_{std::random_device{}()};
};

}  // namespace causal_rag
