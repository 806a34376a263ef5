#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace causal_rag {

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_id;

  std::size_t dim() const { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

struct EmbeddingKey {
  std::string content_hash;  // hex SHA-256 of the normalized text
  std::string model_id;

  friend auto operator<=>(const EmbeddingKey&, const EmbeddingKey&) = default;
};

// Lowercase + collapsed whitespace; what gets hashed and embedded.
std::string normalize_for_embedding(std::string_view text);

EmbeddingKey embedding_key(std::string_view text, std::string_view model_id);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string model_id() const = 0;
  // Receives normalized, non-empty text.
  virtual std::vector<double> embed(const std::string& normalized_text) = 0;
};

// Offline embedder: each whitespace token is hashed into one of `dim`
// buckets, counts are accumulated and the result is L2-normalized. Not
// semantically meaningful; it keeps retrieval testable without a network.
class LocalHashEmbedder : public EmbeddingProvider {
 public:
  explicit LocalHashEmbedder(std::size_t dim = 256);
  std::string model_id() const override;
  std::vector<double> embed(const std::string& normalized_text) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  std::size_t dim_;
  std::atomic<std::size_t> calls_{0};
};

// OpenAI-compatible POST {base_url}/v1/embeddings.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string base_url, std::string api_key, std::string model);
  std::string model_id() const override { return model_; }
  std::vector<double> embed(const std::string& normalized_text) override;

 private:
  std::string base_url_;
  std::string api_key_;
  std::string model_;
};

// Parses data[0].embedding from an /v1/embeddings response body.
std::vector<double> parse_embedding_response(const std::string& body);

// Key -> vector store with optional JSONL persistence. Readers share a lock;
// inserts are serialized and, with a file attached, appended immediately.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::filesystem::path path);

  EmbeddingCache(const EmbeddingCache&) = delete;
  EmbeddingCache& operator=(const EmbeddingCache&) = delete;

  std::optional<EmbeddingVector> get(const EmbeddingKey& key) const;
  // Throws DimensionMismatch if the model already has vectors of another dim.
  void put(const EmbeddingKey& key, const EmbeddingVector& vec);
  std::optional<std::size_t> model_dim(const std::string& model_id) const;
  std::size_t size() const;

 private:
  void check_dim(const std::string& model_id, std::size_t dim) const;

  std::optional<std::filesystem::path> path_;
  mutable std::shared_mutex mu_;
  std::map<EmbeddingKey, EmbeddingVector> entries_;
  std::unordered_map<std::string, std::size_t> dims_;
  std::ofstream out_;
};

// Cache hit returns the stored vector; a miss calls the provider and writes
// through. EmptyText for blank input, DimensionMismatch / ZeroVector checks
// on the provider's output.
EmbeddingVector embed(std::string_view text, EmbeddingProvider& provider, EmbeddingCache& cache);

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

struct NeighborHit {
  std::string record_id;
  double similarity = 0.0;

  friend bool operator==(const NeighborHit&, const NeighborHit&) = default;
};

using EmbeddingCorpus = std::map<std::string, EmbeddingVector>;

// Exact top-min(k, |corpus|) by cosine similarity, descending, ties by
// ascending record id.
std::vector<NeighborHit> knn_search(const EmbeddingVector& query, const EmbeddingCorpus& corpus, std::size_t k);

}  // namespace causal_rag
