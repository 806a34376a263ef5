#include "causal_rag/llm_gateway.hpp"

#include <charconv>
#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "causal_rag/error.hpp"
#include "causal_rag/text.hpp"

namespace causal_rag {

namespace {

using json = nlohmann::json;

void append_field(std::string& out, std::string_view field) {
  out += std::to_string(field.size());
  out += ':';
  out += field;
  out += ';';
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

struct BaseUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

BaseUrl split_base_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  const std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const std::size_t slash = url.find('/', host_start);
  BaseUrl out;
  out.scheme_host_port = url.substr(0, slash);
  out.path_prefix = slash == std::string::npos ? "" : url.substr(slash);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

std::string endpoint_path(const std::string& prefix, std::string_view leaf) {
  // Accept both "https://host" and "https://host/v1" as base URLs.
  if (prefix.size() >= 3 && prefix.compare(prefix.size() - 3, 3, "/v1") == 0) {
    return prefix + "/" + std::string(leaf);
  }
  return prefix + "/v1/" + std::string(leaf);
}

}  // namespace

std::string request_hash(const CompletionRequest& req) {
  std::string buf = "causal-rag/request/v1;";
  append_field(buf, req.model_id);
  append_field(buf, req.system_text);
  append_field(buf, req.user_text);
  append_field(buf, format_double(req.temperature));
  append_field(buf, req.catalog_version);
  return text::sha256_hex(buf);
}

// ---- Transcript ----------------------------------------------------------

Transcript::Transcript(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_);
  std::string line;
  std::size_t line_no = 0;
  while (in && std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("request_hash") || !j.contains("response_text") ||
        !j["request_hash"].is_string() || !j["response_text"].is_string()) {
      throw Error(ErrorKind::CorruptRecord,
                  path_->string() + " line " + std::to_string(line_no) + ": not a transcript entry");
    }
    entries_.try_emplace(j["request_hash"].get<std::string>(), j["response_text"].get<std::string>());
  }
}

std::optional<std::string> Transcript::lookup(const std::string& hash) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void Transcript::append(const std::string& hash, const std::string& response_text) {
  std::unique_lock lock(mu_);
  if (!entries_.try_emplace(hash, response_text).second) return;
  if (path_) {
    if (!out_.is_open()) {
      if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
      out_.open(*path_, std::ios::app);
      if (!out_) throw Error(ErrorKind::IoError, "cannot open transcript " + path_->string() + " for append");
    }
    const json j = {{"request_hash", hash}, {"response_text", response_text}, {"timestamp", text::utc_timestamp()}};
    out_ << j.dump() << '\n';
    out_.flush();
    if (!out_) throw Error(ErrorKind::IoError, "failed writing transcript " + path_->string());
  }
}

std::size_t Transcript::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

// ---- transports ----------------------------------------------------------

std::string chat_request_body(const CompletionRequest& req) {
  json messages = json::array();
  if (!req.system_text.empty()) messages.push_back({{"role", "system"}, {"content", req.system_text}});
  messages.push_back({{"role", "user"}, {"content", req.user_text}});
  json body = {{"model", req.model_id}, {"messages", std::move(messages)}, {"temperature", req.temperature}};
  if (req.max_output_tokens > 0) body["max_tokens"] = req.max_output_tokens;
  return body.dump();
}

CompletionResponse parse_chat_response(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw Error(ErrorKind::ProviderError, "chat completion response has no choices");
  }
  const auto& choice = j["choices"][0];
  CompletionResponse out;
  if (choice.contains("message") && choice["message"].is_object() && choice["message"].contains("content") &&
      choice["message"]["content"].is_string()) {
    out.text = choice["message"]["content"].get<std::string>();
  }
  if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
    out.provider_meta["finish_reason"] = choice["finish_reason"].get<std::string>();
  }
  if (j.contains("usage") && j["usage"].is_object()) {
    for (const auto& [k, v] : j["usage"].items()) {
      if (v.is_number_integer()) out.provider_meta[k] = std::to_string(v.get<long long>());
    }
  }
  return out;
}

HttpChatTransport::HttpChatTransport(std::string base_url, std::string api_key, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_(timeout) {}

HttpResult HttpChatTransport::send(const CompletionRequest& req) {
  const BaseUrl base = split_base_url(base_url_);
  httplib::Client cli(base.scheme_host_port);
  cli.set_connection_timeout(std::chrono::seconds(10));
  cli.set_read_timeout(timeout_);
  cli.set_write_timeout(std::chrono::seconds(30));
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = cli.Post(endpoint_path(base.path_prefix, "chat/completions"), headers, chat_request_body(req),
                      "application/json");
  if (!res) return {0, "", httplib::to_string(res.error())};
  return {res->status, res->body, ""};
}

HttpResult ScriptedTransport::send(const CompletionRequest& req) {
  ++calls_;
  const json body = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", script_(req)}}},
                                              {"finish_reason", "stop"}}})}};
  return {200, body.dump(), ""};
}

// ---- gateway -------------------------------------------------------------

Backend parse_backend(std::string_view name) {
  if (name == "live") return Backend::live;
  if (name == "replay") return Backend::replay;
  if (name == "record") return Backend::record;
  throw Error(ErrorKind::InvalidConfig, "unknown backend `" + std::string(name) + "`");
}

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::live: return "live";
    case Backend::replay: return "replay";
    case Backend::record: return "record";
  }
  return "?";
}

LlmGateway::LlmGateway(Backend backend, ChatTransport* transport, Transcript* transcript, RetryPolicy retry)
    : backend_(backend), transport_(transport), transcript_(transcript), retry_(std::move(retry)) {
  if (backend_ != Backend::live && !transcript_) {
    throw Error(ErrorKind::InvalidConfig, std::string(to_string(backend_)) + " backend needs a transcript");
  }
  if (backend_ != Backend::replay && !transport_) {
    throw Error(ErrorKind::InvalidConfig, std::string(to_string(backend_)) + " backend needs a transport");
  }
}

CompletionResponse LlmGateway::complete(const CompletionRequest& req) {
  if (text::trim(req.user_text).empty()) throw Error(ErrorKind::InvalidConfig, "completion request with empty user text");
  if (!(req.temperature >= 0.0)) throw Error(ErrorKind::InvalidConfig, "temperature must be >= 0");

  const std::string hash = backend_ == Backend::live ? std::string() : request_hash(req);
  if (backend_ != Backend::live) {
    if (auto hit = transcript_->lookup(hash)) {
      CompletionResponse r;
      r.text = *hit;
      r.provider_meta["source"] = "transcript";
      if (r.text.empty()) throw Error(ErrorKind::EmptyCompletion, "recorded response for " + hash + " is empty");
      return r;
    }
    if (backend_ == Backend::replay) throw Error(ErrorKind::ReplayMiss, "no transcript entry for request " + hash);
  }

  CompletionResponse r = call_with_retry(req);
  if (r.text.empty()) {
    const auto it = r.provider_meta.find("finish_reason");
    throw Error(ErrorKind::EmptyCompletion,
                "provider returned no text (finish_reason=" + (it == r.provider_meta.end() ? "?" : it->second) + ")");
  }
  if (backend_ == Backend::record) transcript_->append(hash, r.text);
  return r;
}

CompletionResponse LlmGateway::call_with_retry(const CompletionRequest& req) {
  double backoff_ms = static_cast<double>(retry_.initial_backoff.count());
  for (int attempt = 1;; ++attempt) {
    ++network_calls_;
    const HttpResult res = transport_->send(req);
    if (res.status >= 200 && res.status < 300) return parse_chat_response(res.body);

    ErrorKind kind;
    std::string what;
    if (res.status == 429) {
      kind = ErrorKind::RateLimited;
      what = "HTTP 429";
    } else if (res.status == 0 || res.status >= 500) {
      kind = ErrorKind::TransportError;
      what = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
    } else {
      throw Error(ErrorKind::ProviderError, "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 300));
    }
    if (attempt >= retry_.max_attempts) {
      throw Error(kind, what + " after " + std::to_string(attempt) + " attempts");
    }
    std::chrono::milliseconds delay;
    {
      std::lock_guard lock(jitter_mu_);
      std::uniform_real_distribution<double> dist(0.0, backoff_ms);
      delay = std::chrono::milliseconds(static_cast<long long>(std::llround(dist(jitter_))));
    }
    retry_.sleep(delay);
    backoff_ms *= retry_.multiplier;
  }
}

}  // namespace causal_rag
