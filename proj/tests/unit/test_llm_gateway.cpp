#include <doctest.h>

#include <json.hpp>

#include "causal_rag/llm_gateway.hpp"
#include "doctest_util.hpp"

using namespace causal_rag;
using causal_rag::testing::kind_of;
using causal_rag::testing::TempDir;

namespace {

CompletionRequest sample_request() {
  CompletionRequest r;
  r.system_text = "sys";
  r.user_text = "Sentence: Fever is caused by flu.";
  r.model_id = "m";
  r.catalog_version = "v1";
  return r;
}

// Transport replaying a fixed list of HTTP results.
class SequenceTransport : public ChatTransport {
 public:
  explicit SequenceTransport(std::vector<HttpResult> results) : results_(std::move(results)) {}
  HttpResult send(const CompletionRequest&) override { return results_.at(std::min(sent_++, results_.size() - 1)); }
  std::size_t sent() const { return sent_; }

 private:
  std::vector<HttpResult> results_;
  std::size_t sent_ = 0;
};

std::string ok_body(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"content", content}}}, {"finish_reason", "stop"}}}}}.dump();
}

RetryPolicy recording_policy(std::vector<long long>& delays) {
  RetryPolicy p;
  p.sleep = [&delays](std::chrono::milliseconds d) { delays.push_back(d.count()); };
  return p;
}

}  // namespace

TEST_CASE("request hash covers prompt fields but not the output cap") {
  const auto base = sample_request();
  const auto h = request_hash(base);
  CHECK(h.size() == 64);
  auto r = base;
  r.max_output_tokens = 2048;
  CHECK(request_hash(r) == h);
  for (auto mutate : std::vector<std::function<void(CompletionRequest&)>>{
           [](auto& x) { x.system_text += "!"; }, [](auto& x) { x.user_text += "!"; },
           [](auto& x) { x.model_id = "n"; }, [](auto& x) { x.temperature = 0.5; },
           [](auto& x) { x.catalog_version = "v2"; }}) {
    auto m = base;
    mutate(m);
    CHECK(request_hash(m) != h);
  }
  // length prefixes keep field boundaries unambiguous
  auto a = base;
  auto b = base;
  a.system_text = "ab";
  a.user_text = "c";
  b.system_text = "a";
  b.user_text = "bc";
  CHECK(request_hash(a) != request_hash(b));
}

TEST_CASE("chat body and response parsing") {
  const auto body = nlohmann::json::parse(chat_request_body(sample_request()));
  CHECK(body["model"] == "m");
  CHECK(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][1]["content"] == "Sentence: Fever is caused by flu.");
  CHECK(body["temperature"] == 0.0);
  CHECK(parse_chat_response(ok_body("1")).text == "1");
  CHECK(kind_of([] { parse_chat_response("{}"); }) == ErrorKind::ProviderError);
  CHECK(kind_of([] { parse_chat_response("not json"); }) == ErrorKind::ProviderError);
}

TEST_CASE("record then replay without network") {
  Transcript t;
  ScriptedTransport model([](const CompletionRequest&) { return "1"; });
  LlmGateway rec(Backend::record, &model, &t);
  CHECK(rec.complete(sample_request()).text == "1");
  CHECK(rec.complete(sample_request()).text == "1");
  CHECK(model.calls() == 1);
  LlmGateway rep(Backend::replay, nullptr, &t);
  CHECK(rep.complete(sample_request()).text == "1");
  auto other = sample_request();
  other.user_text = "different";
  CHECK(kind_of([&] { rep.complete(other); }) == ErrorKind::ReplayMiss);
  CHECK(rep.network_calls() == 0);
}

TEST_CASE("transcript persists, first answer wins, corrupt lines rejected") {
  TempDir dir;
  {
    Transcript t(dir / "t.jsonl");
    t.append("h1", "first");
    t.append("h1", "second");
    t.append("h2", "x");
  }
  Transcript again(dir / "t.jsonl");
  CHECK(again.size() == 2);
  CHECK(again.lookup("h1") == "first");
  {
    std::ofstream(dir / "bad.jsonl") << "{\"hash\":\"a\",\"response\":\"b\"}\nnot json\n";
  }
  CHECK(kind_of([&] { Transcript bad(dir / "bad.jsonl"); }) == ErrorKind::CorruptRecord);
}

TEST_CASE("retry on 429 and 5xx with full-jitter exponential backoff") {
  std::vector<long long> delays;
  SequenceTransport tx({{429, "", ""}, {503, "", ""}, {0, "", "refused"}, {200, ok_body("0"), ""}});
  LlmGateway g(Backend::live, &tx, nullptr, recording_policy(delays));
  CHECK(g.complete(sample_request()).text == "0");
  CHECK(tx.sent() == 4);
  REQUIRE(delays.size() == 3);
  CHECK(delays[0] <= 1000);
  CHECK(delays[1] <= 2000);
  CHECK(delays[2] <= 4000);
}

TEST_CASE("retries are bounded") {
  std::vector<long long> delays;
  SequenceTransport tx({{500, "", ""}});
  LlmGateway g(Backend::live, &tx, nullptr, recording_policy(delays));
  CHECK(kind_of([&] { g.complete(sample_request()); }) == ErrorKind::TransportError);
  CHECK(tx.sent() == 5);
  CHECK(delays.size() == 4);

  SequenceTransport limited({{429, "", ""}});
  LlmGateway g2(Backend::live, &limited, nullptr, recording_policy(delays));
  CHECK(kind_of([&] { g2.complete(sample_request()); }) == ErrorKind::RateLimited);
}

TEST_CASE("client errors are not retried") {
  std::vector<long long> delays;
  SequenceTransport tx({{401, "{\"error\":\"bad key\"}", ""}});
  LlmGateway g(Backend::live, &tx, nullptr, recording_policy(delays));
  CHECK(kind_of([&] { g.complete(sample_request()); }) == ErrorKind::ProviderError);
  CHECK(tx.sent() == 1);
  CHECK(delays.empty());
}

TEST_CASE("empty completions and invalid requests") {
  SequenceTransport tx({{200, ok_body(""), ""}});
  Transcript t;
  LlmGateway g(Backend::record, &tx, &t);
  CHECK(kind_of([&] { g.complete(sample_request()); }) == ErrorKind::EmptyCompletion);
  CHECK(t.size() == 0);
  auto blank = sample_request();
  blank.user_text = "  ";
  CHECK(kind_of([&] { g.complete(blank); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([&] { LlmGateway bad(Backend::replay, nullptr, nullptr); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { parse_backend("cloud"); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("concurrent record mode answers each distinct request once") {
  Transcript t;
  ScriptedTransport model([](const CompletionRequest& r) { return "echo:" + r.user_text; });
  LlmGateway g(Backend::record, &model, &t);
  std::vector<std::jthread> pool;
  for (int w = 0; w < 4; ++w) {
    pool.emplace_back([&, w] {
      for (int i = 0; i < 50; ++i) {
        auto r = sample_request();
        r.user_text = "s" + std::to_string((i + w) % 20);
        CHECK(g.complete(r).text == "echo:" + r.user_text);
      }
    });
  }
  pool.clear();
  CHECK(t.size() == 20);
}
