#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace causal_rag {

struct CauseEffectPair {
  std::string cause;
  std::string effect;

  friend bool operator==(const CauseEffectPair&, const CauseEffectPair&) = default;
};

// One sentence with its cause/effect annotation. raw_text has no markup and
// collapsed whitespace; tagged_text carries <cause>/<effect> markup.
struct TaggedSentence {
  std::string id;
  std::string raw_text;
  std::string tagged_text;
  std::vector<CauseEffectPair> pairs;
  std::string source;

  bool causal() const { return !pairs.empty(); }
};

struct Triplet {
  std::string sentence_id;
  std::string cause;
  std::string effect;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct LabeledInstance {
  TaggedSentence sentence;
  int label = 0;  // 1 causal, 0 non-causal
};

struct SplitCounts {
  std::size_t total = 0;
  std::size_t causal = 0;
  std::size_t non_causal = 0;

  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct DatasetSplit {
  std::string name;
  std::vector<LabeledInstance> instances;
  SplitCounts counts;
};

enum class DatasetFormat { semeval, ade, li, jsonl };

DatasetFormat parse_dataset_format(std::string_view name);
std::string_view to_string(DatasetFormat format);

// "<source>-<6-digit ordinal>"
std::string make_sentence_id(std::string_view source, std::size_t ordinal);

// Removes <cause>/<effect> markers, collapses whitespace, trims. Never throws.
std::string strip_tags(std::string_view tagged_text);

// Parses inline cause/effect markup. Pairs are formed when one side has a
// single phrase (1 x 1, 1 x N, N x 1); several causes and several effects
// together are ambiguous and raise UnpairedTags, as does a lone side.
TaggedSentence parse_tagged_sentence(std::string_view line, std::string_view source,
                                     std::size_t ordinal);

// Inserts markup for the pair phrases into raw_text at their leftmost
// non-overlapping occurrences.
std::string render_tagged(std::string_view raw_text, const std::vector<CauseEffectPair>& pairs);

// Builds a sentence from untagged text and explicit pairs, validating that
// every phrase occurs in the text. Throws MalformedRecord otherwise.
TaggedSentence make_sentence(std::string id, std::string_view text,
                             std::vector<CauseEffectPair> pairs, std::string source);

DatasetSplit load_dataset(const std::filesystem::path& path, DatasetFormat format);

// Parses from a stream; `name` becomes the split name and default source.
DatasetSplit read_dataset(std::istream& in, DatasetFormat format, std::string_view name);

// Canonical JSONL, one record per line in instance order.
void write_canonical_jsonl(const DatasetSplit& split, std::ostream& out);

SplitCounts count_instances(const std::vector<LabeledInstance>& instances);

struct DatasetSummary {
  SplitCounts counts;
  std::map<std::size_t, std::size_t> pairs_histogram;  // pairs per causal sentence -> sentences
  std::size_t triplet_count = 0;
};

DatasetSummary dataset_stats(const DatasetSplit& split);

// All (sentence, cause, effect) triplets of the causal instances.
std::vector<Triplet> gold_triplets(const DatasetSplit& split);

}  // namespace causal_rag
