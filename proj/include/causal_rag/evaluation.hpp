#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causal_rag/corpus.hpp"

namespace causal_rag {

// Directional, contiguous, token-level: every token of the normalized gold
// phrase appears, in order and adjacent, inside the normalized prediction.
// Normalization lowercases, collapses whitespace and strips punctuation at
// token edges only.
bool containment_match(std::string_view gold_phrase, std::string_view predicted_phrase);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct DetectionMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  ConfusionCounts counts;
  std::size_t unparseable = 0;
};

// Harmonic mean, 0 when p + r == 0.
double f1_score(double precision, double recall);

struct DetectionCase {
  std::optional<int> predicted;  // nullopt: reply could not be parsed
  int gold = 0;
};

// Positive class is causal (1). An unparseable prediction is scored as the
// wrong label: a false negative for a causal gold, a false positive otherwise.
DetectionMetrics detection_metrics(const std::vector<DetectionCase>& cases);
DetectionMetrics detection_metrics(const std::vector<std::pair<int, int>>& predicted_gold);

struct ExtractionOutcome {
  std::string sentence_id;
  bool success = false;
  bool cause_matched = false;
  bool effect_matched = false;
  bool overlap_flag = false;
};

struct SinglePairCase {
  std::string sentence_id;
  CauseEffectPair gold;
  std::optional<CauseEffectPair> predicted;  // nullopt: unparseable
  bool overlap_flag = false;
};

struct SinglePairResult {
  double accuracy = 0.0;
  std::size_t successes = 0;
  std::vector<ExtractionOutcome> outcomes;
};

SinglePairResult single_pair_accuracy(const std::vector<SinglePairCase>& cases);

struct TripletMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t matched = 0;
  std::size_t predicted_total = 0;
  std::size_t gold_total = 0;
};

enum class TripletMatching { greedy, optimal };

// Gold g matches prediction p iff same sentence id and containment on both
// cause and effect. greedy: golds in order each take the first unused
// compatible prediction. optimal: maximum bipartite matching per sentence.
std::size_t match_triplets(const std::vector<Triplet>& gold, const std::vector<Triplet>& predicted,
                           TripletMatching mode = TripletMatching::greedy);

TripletMetrics triplet_metrics(const std::vector<Triplet>& gold, const std::vector<Triplet>& predicted,
                               TripletMatching mode = TripletMatching::greedy);

// JSON objects with every metric field; the caller adds the config echo.
nlohmann::ordered_json to_json(const DetectionMetrics& m);
nlohmann::ordered_json to_json(const SinglePairResult& r);
nlohmann::ordered_json to_json(const TripletMetrics& m);

// Aligned two-column plain-text rendering of a flat JSON object
// (nested objects are flattened with dotted keys).
std::string render_table(const nlohmann::ordered_json& report);

}  // namespace causal_rag
