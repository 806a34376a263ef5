#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "causal_rag/repository.hpp"

namespace causal_rag {

enum class StrategyKind { zeroshot, random, knn, pattern, knn_pattern };

StrategyKind parse_strategy(std::string_view name);
// CLI spelling: zeroshot, random, knn, pattern, knn-pattern.
std::string_view to_string(StrategyKind kind);

// Where one retrieved example came from.
enum class ExampleOrigin { random, knn, pattern, random_fallback };

std::string_view to_string(ExampleOrigin origin);

struct RetrievedExample {
  const ExampleRecord* record = nullptr;
  ExampleOrigin origin = ExampleOrigin::random;
  // Cosine similarity for knn, matched-key similarity for pattern, 0 otherwise.
  double score = 0.0;
  // Repository key matched by pattern retrieval.
  std::optional<std::string> connective;
};

struct RetrievalResult {
  StrategyKind strategy = StrategyKind::zeroshot;
  std::vector<RetrievedExample> examples;
  bool fallback_used = false;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

}  // namespace causal_rag
