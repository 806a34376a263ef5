#include "causal_rag/embedding.hpp"

#include <algorithm>
#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "causal_rag/error.hpp"
#include "causal_rag/text.hpp"

namespace causal_rag {

namespace {

using json = nlohmann::json;

void require_finite(const std::vector<double>& v, const std::string& model_id) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorKind::ProviderError, "non-finite value in embedding from " + model_id);
  }
}

}  // namespace

std::string normalize_for_embedding(std::string_view t) { return text::normalize(t); }

EmbeddingKey embedding_key(std::string_view t, std::string_view model_id) {
  return {text::sha256_hex(normalize_for_embedding(t)), std::string(model_id)};
}

// ---- providers -----------------------------------------------------------

LocalHashEmbedder::LocalHashEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw Error(ErrorKind::InvalidConfig, "embedding dimension must be positive");
}

std::string LocalHashEmbedder::model_id() const { return "local-hash-" + std::to_string(dim_); }

std::vector<double> LocalHashEmbedder::embed(const std::string& normalized_text) {
  ++calls_;
  std::vector<double> v(dim_, 0.0);
  for (const auto& tok : text::split_whitespace(normalized_text)) v[text::fnv1a64(tok) % dim_] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

std::vector<double> parse_embedding_response(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.contains("data") || !j["data"].is_array() || j["data"].empty() ||
      !j["data"][0].is_object() || !j["data"][0].contains("embedding") || !j["data"][0]["embedding"].is_array()) {
    throw Error(ErrorKind::ProviderError, "embedding response lacks data[0].embedding");
  }
  std::vector<double> out;
  for (const auto& v : j["data"][0]["embedding"]) {
    if (!v.is_number()) throw Error(ErrorKind::ProviderError, "non-numeric embedding component");
    out.push_back(v.get<double>());
  }
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url, std::string api_key, std::string model)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)) {}

std::vector<double> HttpEmbeddingProvider::embed(const std::string& normalized_text) {
  const std::size_t scheme_end = base_url_.find("://");
  const std::size_t slash = base_url_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  std::string prefix = slash == std::string::npos ? "" : base_url_.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  const bool has_v1 = prefix.size() >= 3 && prefix.compare(prefix.size() - 3, 3, "/v1") == 0;

  httplib::Client cli(base_url_.substr(0, slash));
  cli.set_connection_timeout(std::chrono::seconds(10));
  cli.set_read_timeout(std::chrono::seconds(60));
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const json body = {{"model", model_}, {"input", normalized_text}};
  auto res = cli.Post(prefix + (has_v1 ? "/embeddings" : "/v1/embeddings"), headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorKind::TransportError, "embeddings request failed: " + httplib::to_string(res.error()));
  if (res->status == 429) throw Error(ErrorKind::RateLimited, "embeddings endpoint returned 429");
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorKind::ProviderError, "embeddings endpoint returned HTTP " + std::to_string(res->status));
  }
  return parse_embedding_response(res->body);
}

// ---- cache ---------------------------------------------------------------

EmbeddingCache::EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_);
  std::string line;
  std::size_t line_no = 0;
  while (in && std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("key") || !j["key"].is_string() || !j.contains("model") ||
        !j["model"].is_string() || !j.contains("dim") || !j["dim"].is_number_unsigned() || !j.contains("vector") ||
        !j["vector"].is_array()) {
      throw Error(ErrorKind::CorruptRecord, path_->string() + " line " + std::to_string(line_no) + ": not a cache entry");
    }
    EmbeddingVector v;
    v.model_id = j["model"].get<std::string>();
    v.values = j["vector"].get<std::vector<double>>();
    if (v.dim() != j["dim"].get<std::size_t>()) {
      throw Error(ErrorKind::CorruptRecord, path_->string() + " line " + std::to_string(line_no) + ": dim disagrees with vector");
    }
    check_dim(v.model_id, v.dim());
    dims_.emplace(v.model_id, v.dim());
    entries_.emplace(EmbeddingKey{j["key"].get<std::string>(), v.model_id}, std::move(v));
  }
  if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
  out_.open(*path_, std::ios::app);
  if (!out_) throw Error(ErrorKind::IoError, "cannot open embedding cache " + path_->string());
}

void EmbeddingCache::check_dim(const std::string& model_id, std::size_t dim) const {
  auto it = dims_.find(model_id);
  if (it != dims_.end() && it->second != dim) {
    throw Error(ErrorKind::DimensionMismatch, model_id + " produced dim " + std::to_string(dim) + ", earlier vectors have dim " +
                                                  std::to_string(it->second));
  }
}

std::optional<EmbeddingVector> EmbeddingCache::get(const EmbeddingKey& key) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(const EmbeddingKey& key, const EmbeddingVector& vec) {
  std::unique_lock lock(mu_);
  check_dim(vec.model_id, vec.dim());
  if (!entries_.emplace(key, vec).second) return;
  dims_.emplace(vec.model_id, vec.dim());
  if (out_.is_open()) {
    // Default double serialization in nlohmann::json round-trips exactly.
    const json j = {{"key", key.content_hash}, {"model", key.model_id}, {"dim", vec.dim()}, {"vector", vec.values}};
    out_ << j.dump() << '\n';
    out_.flush();
  }
}

std::optional<std::size_t> EmbeddingCache::model_dim(const std::string& model_id) const {
  std::shared_lock lock(mu_);
  auto it = dims_.find(model_id);
  if (it == dims_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

EmbeddingVector embed(std::string_view t, EmbeddingProvider& provider, EmbeddingCache& cache) {
  const std::string normalized = normalize_for_embedding(t);
  if (normalized.empty()) throw Error(ErrorKind::EmptyText, "cannot embed blank text");
  const std::string model = provider.model_id();
  const EmbeddingKey key{text::sha256_hex(normalized), model};
  if (auto hit = cache.get(key)) return *hit;

  EmbeddingVector v{provider.embed(normalized), model};
  if (v.values.empty()) throw Error(ErrorKind::ProviderError, model + " returned an empty embedding");
  require_finite(v.values, model);
  cache.put(key, v);
  return v;
}

// ---- similarity ----------------------------------------------------------

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch, "cosine of dims " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::ZeroVector, "cosine similarity with an all-zero vector");
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_similarity(a.values, b.values);
}

std::vector<NeighborHit> knn_search(const EmbeddingVector& query, const EmbeddingCorpus& corpus, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::InvalidConfig, "k must be at least 1");
  if (corpus.empty()) throw Error(ErrorKind::EmptyInput, "kNN search over an empty corpus");
  std::vector<NeighborHit> hits;
  hits.reserve(corpus.size());
  for (const auto& [id, vec] : corpus) {
    if (vec.dim() != query.dim()) {
      throw Error(ErrorKind::DimensionMismatch, "record " + id + " has dim " + std::to_string(vec.dim()) + ", query has " +
                                                    std::to_string(query.dim()));
    }
    hits.push_back({id, cosine_similarity(query, vec)});
  }
  const auto better = [](const NeighborHit& a, const NeighborHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.record_id < b.record_id;
  };
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);
  hits.resize(n);
  return hits;
}

}  // namespace causal_rag
