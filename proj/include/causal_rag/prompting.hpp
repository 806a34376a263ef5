#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "causal_rag/corpus.hpp"
#include "causal_rag/llm_gateway.hpp"
#include "causal_rag/retrieval_types.hpp"

namespace causal_rag {

// Versioned prompt texts. File layout:
//
//   # comment
//   catalog_version = <string>
//
//   [block.name]
//   text lines ...
//
// Block text runs until the next header; trailing blank lines are dropped.
class PromptCatalog {
 public:
  static PromptCatalog builtin();
  static PromptCatalog parse(std::string_view content);
  static PromptCatalog load(const std::filesystem::path& path);

  const std::string& version() const { return version_; }
  // Throws InvalidConfig for unknown blocks.
  const std::string& block(std::string_view name) const;
  bool has(std::string_view name) const;

 private:
  std::string version_;
  std::map<std::string, std::string, std::less<>> blocks_;
};

// Text of the catalog shipped under prompts/catalog.txt.
std::string_view builtin_catalog_text();

struct AssembledPrompt {
  std::string system_text;
  std::string user_text;
  std::size_t example_count = 0;
  StrategyKind strategy = StrategyKind::zeroshot;
  std::string catalog_version;

  CompletionRequest to_request(const std::string& model_id, double temperature = 0.0,
                               int max_output_tokens = 512) const;
};

AssembledPrompt connective_prompt(std::string_view sentence, const PromptCatalog& catalog);

AssembledPrompt detection_prompt(std::string_view sentence, const RetrievalResult& examples,
                                 const PromptCatalog& catalog);

AssembledPrompt extraction_prompt(std::string_view sentence, const RetrievalResult& examples, bool single_pair,
                                  const PromptCatalog& catalog);

// One detection example line: the tagged sentence.
std::string render_detection_example(const RetrievedExample& example);

// One extraction example line: tagged sentence with the connective marked,
// followed by the expected answer in the output tag format.
std::string render_extraction_example(const RetrievedExample& example);

// The cause/effect markup an extraction answer should contain for `pairs`.
std::string render_answer(const std::vector<CauseEffectPair>& pairs);

// Splits a connective-extraction reply on newlines and commas, strips list
// bullets and surrounding quotes/punctuation, normalizes, drops empties,
// "none" and duplicates. Order follows the reply.
std::vector<std::string> parse_connective_response(std::string_view response);

struct DetectionPrediction {
  int label = 0;
  std::string raw_response;
};

// First standalone "1" or "0" token decides; UnparseableResponse otherwise.
DetectionPrediction parse_detection(std::string_view response);

struct ExtractionPrediction {
  std::vector<CauseEffectPair> pairs;
  std::string raw_response;
  bool overlap_flag = false;
  std::size_t unmatched_spans = 0;
};

// i-th <cause> span pairs with the i-th <effect> span; leftovers are counted
// in unmatched_spans. UnparseableResponse when no complete pair exists.
ExtractionPrediction parse_extraction(std::string_view response);

// True when the two phrases could come from overlapping spans: one token
// sequence contains the other, or a suffix of one is a prefix of the other.
bool phrases_overlap(std::string_view a, std::string_view b);

}  // namespace causal_rag
