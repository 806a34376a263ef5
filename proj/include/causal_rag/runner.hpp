#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "causal_rag/corpus.hpp"
#include "causal_rag/embedding.hpp"
#include "causal_rag/evaluation.hpp"
#include "causal_rag/llm_gateway.hpp"
#include "causal_rag/prompting.hpp"
#include "causal_rag/repository.hpp"
#include "causal_rag/retrieval.hpp"

namespace causal_rag {

enum class Task { detect, extract };

Task parse_task(std::string_view name);
std::string_view to_string(Task task);

struct ExperimentConfig {
  Task task = Task::detect;
  StrategyKind strategy = StrategyKind::zeroshot;
  RetrievalConfig retrieval;
  bool single_pair = false;
  std::string model_id = "gpt-4o";
  double temperature = 0.0;
  int max_output_tokens = 512;
  Backend backend = Backend::replay;
  std::size_t concurrency = 4;
  TripletMatching matching = TripletMatching::greedy;
  bool record_timing = false;  // off: prediction files stay byte-identical
  std::filesystem::path db;
  std::filesystem::path dataset;
  std::filesystem::path transcript;
  std::filesystem::path cache;
  std::filesystem::path output;

  // InvalidConfig on: replay without a transcript, k == 0, bad threshold,
  // zero concurrency.
  void validate() const;
  // Effective configuration, echoed into every metrics report.
  nlohmann::ordered_json to_json() const;
};

struct PredictionRecord {
  std::string sentence_id;
  std::string prompt_hash;
  std::string raw_response;
  std::optional<int> label;             // detect
  std::vector<CauseEffectPair> pairs;   // extract
  bool parse_failed = false;
  bool overlap_flag = false;
  std::string strategy;
  std::vector<std::string> example_ids;
  std::vector<std::string> example_origins;
  bool fallback_used = false;
  std::optional<double> elapsed_ms;

  std::size_t example_count() const { return example_ids.size(); }
};

nlohmann::ordered_json to_json(const PredictionRecord& record);
PredictionRecord prediction_from_json(const nlohmann::json& j);

// Non-owning handles to everything a run needs. Unused members may be null
// when the strategy does not need them (zeroshot needs only llm + catalog).
struct RunServices {
  LlmGateway* llm = nullptr;
  const PromptCatalog* catalog = nullptr;
  const Repository* repo = nullptr;
  const RecordEmbeddings* embeddings = nullptr;
  EmbeddingProvider* embedder = nullptr;
  EmbeddingCache* embedding_cache = nullptr;
  InputConnectiveCache* connective_cache = nullptr;
};

// Instances the task is scored on: all for detect, causal ones for extract.
std::vector<LabeledInstance> task_instances(const std::vector<LabeledInstance>& all, Task task);

// retrieve -> assemble -> complete -> parse for one instance. Unparseable
// replies are recorded with parse_failed; provider errors propagate.
PredictionRecord predict_instance(const LabeledInstance& instance, const ExperimentConfig& cfg, RunServices& svc);

// All instances, at most cfg.concurrency in flight, result in id order.
std::vector<PredictionRecord> run_predictions(const std::vector<LabeledInstance>& instances,
                                              const ExperimentConfig& cfg, RunServices& svc);

struct RunSummary {
  std::size_t instances = 0;
  std::size_t parse_failures = 0;
  std::size_t fallback_count = 0;
  double mean_example_count = 0.0;
  std::size_t min_example_count = 0;
  std::size_t max_example_count = 0;
  nlohmann::ordered_json metrics;  // task metrics from the evaluation module
};

// Scores predictions against the gold of `instances`; every instance needs a
// prediction (MalformedRecord names the first missing id). Single-pair
// scoring compares the predicted pair with the gold pair it matches, or the
// first gold pair when it matches none.
RunSummary score_predictions(const std::vector<LabeledInstance>& instances,
                             const std::vector<PredictionRecord>& predictions, const ExperimentConfig& cfg);

// {"config": ..., "task": ..., "metrics": ..., "retrieval": ..., ...}
nlohmann::ordered_json metrics_report(const RunSummary& summary, const ExperimentConfig& cfg);

// Prediction files: JSONL, one record per sentence id, sorted by id.
std::map<std::string, PredictionRecord> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, const std::map<std::string, PredictionRecord>& records);

// <dir>/<stem>.metrics.json next to a predictions file.
std::filesystem::path metrics_path_for(const std::filesystem::path& predictions);

struct SweepRow {
  std::string strategy;
  std::size_t k = 0;
  std::string metric;
  double value = 0.0;
  bool integral = false;  // a count rather than a rate
};

// One run per (strategy, k); rows carry the task metrics plus the actual
// example counts the prompts received.
std::vector<SweepRow> run_sweep(const std::vector<LabeledInstance>& instances, const ExperimentConfig& base,
                                const std::vector<StrategyKind>& strategies, const std::vector<std::size_t>& ks,
                                RunServices& svc);

// Header "strategy,k,metric,value"; counts print as integers, rates with six
// decimals.
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

// Human-readable repository stats; with sample > 0, up to `sample` seeded
// random connectives per list-length category 1..cap.
std::string format_repository_stats(const Repository& repo, std::size_t sample = 0, std::uint64_t seed = 0);

}  // namespace causal_rag
