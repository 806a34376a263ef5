#include <doctest.h>

#include "causal_rag/prompting.hpp"
#include "causal_rag/repository.hpp"
#include "doctest_util.hpp"

using namespace causal_rag;
using causal_rag::testing::kind_of;

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

std::vector<ExampleRecord> make_records(std::size_t n) {
  std::vector<ExampleRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    ExampleRecord r;
    r.id = "r-" + std::to_string(100 + i);
    r.raw_text = "Storm " + std::to_string(i) + " lead to damage.";
    r.tagged_text = "<cause>Storm " + std::to_string(i) + "</cause> lead to <effect>damage</effect>.";
    r.pairs = {{"Storm " + std::to_string(i), "damage"}};
    r.connectives = {"lead to"};
    recs.push_back(r);
  }
  return recs;
}

RetrievalResult as_result(const std::vector<ExampleRecord>& recs, StrategyKind s) {
  RetrievalResult out;
  out.strategy = s;
  for (const auto& r : recs) out.examples.push_back({&r, ExampleOrigin::knn, 0.5, std::nullopt});
  return out;
}

}  // namespace

TEST_CASE("builtin catalog has every block and a version") {
  const auto c = PromptCatalog::builtin();
  CHECK_FALSE(c.version().empty());
  for (const char* b : {"connective.system", "connective.user", "detection.system", "detection.task", "detection.input",
                        "extraction.system", "extraction.task", "extraction.single_pair", "extraction.input",
                        "examples.lead_in"}) {
    CHECK(c.has(b));
  }
  CHECK(kind_of([&] { c.block("nope"); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("catalog parsing") {
  std::string text(builtin_catalog_text());
  text += "\n[extra.block]\nline one\nline two\n\n\n";
  const auto c = PromptCatalog::parse(text);
  CHECK(c.version() == PromptCatalog::builtin().version());
  CHECK(c.block("extra.block") == "line one\nline two");
  // a catalog missing required blocks is rejected up front
  CHECK(kind_of([] { PromptCatalog::parse("catalog_version = t/1\n[a.b]\nx\n"); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { PromptCatalog::parse("[a]\nx\n"); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("zeroshot detection prompt") {
  const auto c = PromptCatalog::builtin();
  const auto p = detection_prompt("Fever is caused by flu.", RetrievalResult{}, c);
  CHECK(p.example_count == 0);
  CHECK(p.user_text.find("Fever is caused by flu.") != std::string::npos);
  CHECK(p.user_text.find("Below are") == std::string::npos);
  CHECK(p.catalog_version == c.version());
  CHECK(p.to_request("m").catalog_version == c.version());
}

TEST_CASE("ten examples give one lead-in and ten example lines") {
  const auto c = PromptCatalog::builtin();
  const auto recs = make_records(10);
  const auto p = detection_prompt("x causes y", as_result(recs, StrategyKind::knn), c);
  CHECK(p.example_count == 10);
  CHECK(count_of(p.user_text, "Below are 10 example sentences") == 1);
  CHECK(count_of(p.user_text, "</cause> lead to <effect>") == 10);
}

TEST_CASE("twenty examples") {
  const auto c = PromptCatalog::builtin();
  const auto recs = make_records(20);
  const auto p = extraction_prompt("x causes y", as_result(recs, StrategyKind::knn_pattern), false, c);
  CHECK(p.example_count == 20);
  CHECK(p.strategy == StrategyKind::knn_pattern);
  CHECK(count_of(p.user_text, " => ") == 20);
}

TEST_CASE("single-pair constraint appears only when asked") {
  const auto c = PromptCatalog::builtin();
  const auto& rule = c.block("extraction.single_pair");
  CHECK(extraction_prompt("s", RetrievalResult{}, true, c).user_text.find(rule) != std::string::npos);
  CHECK(extraction_prompt("s", RetrievalResult{}, false, c).user_text.find(rule) == std::string::npos);
}

TEST_CASE("extraction example tags the connective") {
  ExampleRecord r;
  r.id = "a";
  r.tagged_text = "Highly viscous <cause>lavas</cause> lead to a violent <effect>eruption</effect>.";
  r.pairs = {{"lavas", "eruption"}};
  r.connectives = {"lead to"};
  RetrievedExample ex{&r, ExampleOrigin::pattern, 1.0, std::string("lead to")};
  CHECK(render_extraction_example(ex) ==
        "Highly viscous <cause>lavas</cause> <connective>lead to</connective> a violent <effect>eruption</effect>. => "
        "<cause>lavas</cause> <effect>eruption</effect>");
  // connective inside a tagged phrase is not matched there; falls back to appending
  r.connectives = {"lavas"};
  ex.connective.reset();
  CHECK(render_extraction_example(ex).find("<connective>lavas</connective> =>") != std::string::npos);
}

TEST_CASE("connective response parsing") {
  CHECK(parse_connective_response("- Caused by\n* \"lead to\"\n1. due to, because of\nNONE\ncaused by") ==
        std::vector<std::string>{"caused by", "lead to", "due to", "because of"});
  CHECK(parse_connective_response("-induced") == std::vector<std::string>{"-induced"});
  CHECK(parse_connective_response("none").empty());
  CHECK(parse_connective_response("n/a\n\n").empty());
}

TEST_CASE("detection parsing") {
  CHECK(parse_detection("1").label == 1);
  CHECK(parse_detection("Answer: 0").label == 0);
  CHECK(parse_detection(" 1.\nBecause").label == 1);
  CHECK(kind_of([] { parse_detection("10 reasons"); }) == ErrorKind::UnparseableResponse);
  CHECK(kind_of([] { parse_detection("yes"); }) == ErrorKind::UnparseableResponse);
}

TEST_CASE("extraction parsing") {
  const auto p = parse_extraction("<cause>salmonella bacteria</cause> <effect>foodborne illness</effect>");
  REQUIRE(p.pairs.size() == 1);
  CHECK(p.pairs[0] == CauseEffectPair{"salmonella bacteria", "foodborne illness"});
  CHECK_FALSE(p.overlap_flag);
  CHECK(p.unmatched_spans == 0);

  const auto multi = parse_extraction("<CAUSE>a</CAUSE><effect>b</effect>\n<cause>c</cause> <effect>d</effect> <cause>e</cause>");
  CHECK(multi.pairs.size() == 2);
  CHECK(multi.unmatched_spans == 1);

  CHECK(parse_extraction("<cause>heavy rain</cause> <effect>rain damage</effect>").overlap_flag);
  CHECK(kind_of([] { parse_extraction("no tags"); }) == ErrorKind::UnparseableResponse);
  CHECK(kind_of([] { parse_extraction("<cause>only</cause>"); }) == ErrorKind::UnparseableResponse);
}

TEST_CASE("phrase overlap") {
  CHECK(phrases_overlap("heavy rain", "rain"));
  CHECK(phrases_overlap("the heavy rain", "rain storm"));
  CHECK_FALSE(phrases_overlap("smoking", "lung cancer"));
}

TEST_CASE("connective prompt carries the sentence") {
  const auto p = connective_prompt("Fever  is caused by flu.", PromptCatalog::builtin());
  CHECK(p.user_text.find("Sentence: Fever is caused by flu.") != std::string::npos);
}
