#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "causal_rag/corpus.hpp"

namespace causal_rag {

class LlmGateway;
class PromptCatalog;

// One causal sentence in the fewshot example store.
struct ExampleRecord {
  std::string id;
  std::string raw_text;
  std::string tagged_text;
  std::vector<CauseEffectPair> pairs;
  std::vector<std::string> connectives;  // normalized
  std::string source;
  // Set when some connective is not a substring of the sentence.
  bool connective_unverified = false;

  friend bool operator==(const ExampleRecord&, const ExampleRecord&) = default;
};

// connective -> record ids, at most `cap` per key, in sampled order.
using ConnectiveIndex = std::map<std::string, std::vector<std::string>>;

struct Repository {
  std::vector<ExampleRecord> records;  // sorted by id
  ConnectiveIndex index;
  std::size_t cap = 10;
  std::uint64_t seed = 0;

  const ExampleRecord* find(const std::string& id) const;
  bool empty() const { return records.empty(); }
};

struct RepositoryStats {
  std::size_t total_records = 0;
  std::size_t unique_connectives = 0;
  std::map<std::size_t, std::size_t> frequency_histogram;  // list length -> connectives
  std::size_t connectives_with_at_least_5 = 0;
  std::size_t index_entries = 0;  // sum of list lengths

  friend bool operator==(const RepositoryStats&, const RepositoryStats&) = default;
};

// Lowercase, collapse internal whitespace, trim. Leading hyphens survive.
std::string normalize_connective(std::string_view connective);

// Asks the model for the sentence's causal connectives. Throws
// UnparseableResponse when the reply holds none, provider errors as-is.
std::vector<std::string> extract_connectives(const TaggedSentence& sentence, LlmGateway& llm,
                                             const PromptCatalog& catalog, const std::string& model_id);

// Samples the index from per-record connectives: each key gets a seeded
// uniform sample of min(cap, candidates) ids, seeded per key so the result
// is independent of key order. Records must be sorted by id.
ConnectiveIndex build_index(const std::vector<ExampleRecord>& records, std::size_t cap, std::uint64_t seed);

struct BuildOptions {
  std::size_t cap = 10;
  std::uint64_t seed = 0;
  std::size_t concurrency = 4;
  std::string model_id;
};

struct BuildReport {
  std::vector<std::string> skipped_ids;  // no connective could be parsed
  std::size_t unverified = 0;
};

// Extracts connectives for every sentence (fan-out bounded by
// options.concurrency), then assembles records and index in id order.
Repository build_repository(const std::vector<TaggedSentence>& corpus, LlmGateway& llm, const PromptCatalog& catalog,
                            const BuildOptions& options, BuildReport* report = nullptr);

// Assembles a repository from already-extracted connectives.
Repository assemble_repository(std::vector<ExampleRecord> records, std::size_t cap, std::uint64_t seed);

RepositoryStats repository_stats(const Repository& repo);

inline constexpr int kRepositorySchemaVersion = 1;

// Atomic write (temp file + rename); byte-identical for identical input.
void save_repository(const Repository& repo, const std::filesystem::path& path);
Repository load_repository(const std::filesystem::path& path);

}  // namespace causal_rag
