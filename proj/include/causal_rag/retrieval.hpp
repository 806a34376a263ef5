#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "causal_rag/embedding.hpp"
#include "causal_rag/repository.hpp"
#include "causal_rag/retrieval_types.hpp"

namespace causal_rag {

class LlmGateway;
class PromptCatalog;

enum class MatcherKind { edit_ratio, token_containment };

MatcherKind parse_matcher(std::string_view name);
std::string_view to_string(MatcherKind kind);

struct RetrievalConfig {
  std::size_t k = 10;
  double similarity_threshold = 0.90;  // a key matches when similarity > threshold
  MatcherKind matcher = MatcherKind::edit_ratio;
  std::uint64_t seed = 0;
  bool fallback_to_random = true;

  void validate() const;
};

// Unit-cost Levenshtein distance over code points.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);

// edit_ratio: 1 - distance / max(|a|, |b|) over code points.
// token_containment: 1.0 when the shorter token sequence occurs contiguously
// in the longer one, otherwise the edit_ratio value.
double connective_similarity(std::string_view a, std::string_view b, MatcherKind matcher);

// Record embeddings keyed by record id.
struct RecordEmbeddings {
  EmbeddingCorpus vectors;
};

RecordEmbeddings embed_repository(const Repository& repo, EmbeddingProvider& provider, EmbeddingCache& cache,
                                  std::size_t concurrency = 1);

// `salt` (normally the input sentence id) decorrelates random draws between
// inputs while keeping them reproducible for a fixed seed.
RetrievalResult retrieve_random(const Repository& repo, const RetrievalConfig& cfg, std::string_view salt = {});

RetrievalResult retrieve_knn(std::string_view input_text, const Repository& repo, const RecordEmbeddings& embeddings,
                             EmbeddingProvider& provider, EmbeddingCache& cache, const RetrievalConfig& cfg);

RetrievalResult retrieve_pattern(const std::vector<std::string>& input_connectives, const Repository& repo,
                                 const RetrievalConfig& cfg, std::string_view salt = {});

// kNN block first, then the pattern block; duplicates dropped keeping the
// first occurrence.
RetrievalResult combine_knn_pattern(const RetrievalResult& knn, const RetrievalResult& pattern);

RetrievalResult retrieve_knn_pattern(std::string_view input_text, const std::vector<std::string>& input_connectives,
                                     const Repository& repo, const RecordEmbeddings& embeddings,
                                     EmbeddingProvider& provider, EmbeddingCache& cache, const RetrievalConfig& cfg,
                                     std::string_view salt = {});

// Per-sentence cache of input connectives; concurrent readers, serialized inserts.
class InputConnectiveCache {
 public:
  std::optional<std::vector<std::string>> get(const std::string& sentence_id) const;
  void put(const std::string& sentence_id, std::vector<std::string> connectives);

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::vector<std::string>> entries_;
};

// Connectives of a bare input sentence via the connective-extraction prompt.
// An unparseable reply yields an empty list (pattern retrieval then falls
// back); provider errors propagate.
std::vector<std::string> input_connectives(const std::string& sentence_id, std::string_view sentence, LlmGateway& llm,
                                           const PromptCatalog& catalog, const std::string& model_id,
                                           InputConnectiveCache& cache);

// Everything a strategy needs to pick examples for one input.
struct RetrievalContext {
  const Repository* repo = nullptr;
  const RecordEmbeddings* embeddings = nullptr;  // knn strategies
  EmbeddingProvider* embedder = nullptr;         // knn strategies
  EmbeddingCache* embedding_cache = nullptr;     // knn strategies
  LlmGateway* llm = nullptr;                     // pattern strategies
  const PromptCatalog* catalog = nullptr;        // pattern strategies
  InputConnectiveCache* connective_cache = nullptr;
  std::string model_id;
};

RetrievalResult retrieve(StrategyKind strategy, const std::string& sentence_id, std::string_view sentence,
                         const RetrievalContext& ctx, const RetrievalConfig& cfg);

}  // namespace causal_rag
