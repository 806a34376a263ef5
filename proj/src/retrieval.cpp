#include "causal_rag/retrieval.hpp"

#include <algorithm>
#include <set>

#include "causal_rag/error.hpp"
#include "causal_rag/llm_gateway.hpp"
#include "causal_rag/parallel.hpp"
#include "causal_rag/prompting.hpp"
#include "causal_rag/rng.hpp"
#include "causal_rag/text.hpp"

namespace causal_rag {

StrategyKind parse_strategy(std::string_view name) {
  if (name == "zeroshot") return StrategyKind::zeroshot;
  if (name == "random") return StrategyKind::random;
  if (name == "knn") return StrategyKind::knn;
  if (name == "pattern") return StrategyKind::pattern;
  if (name == "knn-pattern" || name == "knn_pattern") return StrategyKind::knn_pattern;
  throw Error(ErrorKind::InvalidConfig, "unknown strategy `" + std::string(name) + "`");
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::zeroshot: return "zeroshot";
    case StrategyKind::random: return "random";
    case StrategyKind::knn: return "knn";
    case StrategyKind::pattern: return "pattern";
    case StrategyKind::knn_pattern: return "knn-pattern";
  }
  return "?";
}

std::string_view to_string(ExampleOrigin origin) {
  switch (origin) {
    case ExampleOrigin::random: return "random";
    case ExampleOrigin::knn: return "knn";
    case ExampleOrigin::pattern: return "pattern";
    case ExampleOrigin::random_fallback: return "random-fallback";
  }
  return "?";
}

MatcherKind parse_matcher(std::string_view name) {
  if (name == "edit_ratio" || name == "edit-ratio") return MatcherKind::edit_ratio;
  if (name == "token_containment" || name == "token-containment") return MatcherKind::token_containment;
  throw Error(ErrorKind::InvalidConfig, "unknown matcher `" + std::string(name) + "`");
}

std::string_view to_string(MatcherKind kind) {
  return kind == MatcherKind::edit_ratio ? "edit_ratio" : "token_containment";
}

void RetrievalConfig::validate() const {
  if (k < 1) throw Error(ErrorKind::InvalidConfig, "k must be at least 1");
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "similarity threshold must lie in (0, 1]");
  }
}

std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

double connective_similarity(std::string_view a, std::string_view b, MatcherKind matcher) {
  if (text::trim(a).empty() || text::trim(b).empty()) {
    throw Error(ErrorKind::EmptyConnective, "connective similarity needs two non-empty connectives");
  }
  if (matcher == MatcherKind::token_containment) {
    auto ta = text::split_whitespace(a);
    auto tb = text::split_whitespace(b);
    if (ta.size() > tb.size()) std::swap(ta, tb);
    if (std::search(tb.begin(), tb.end(), ta.begin(), ta.end()) != tb.end()) return 1.0;
  }
  const std::u32string ca = text::utf8_to_code_points(a);
  const std::u32string cb = text::utf8_to_code_points(b);
  const double longest = static_cast<double>(std::max(ca.size(), cb.size()));
  return 1.0 - static_cast<double>(edit_distance(ca, cb)) / longest;
}

RecordEmbeddings embed_repository(const Repository& repo, EmbeddingProvider& provider, EmbeddingCache& cache,
                                  std::size_t concurrency) {
  std::vector<EmbeddingVector> vectors(repo.records.size());
  parallel_for(repo.records.size(), concurrency,
               [&](std::size_t i) { vectors[i] = embed(repo.records[i].raw_text, provider, cache); });
  RecordEmbeddings out;
  for (std::size_t i = 0; i < vectors.size(); ++i) out.vectors.emplace(repo.records[i].id, std::move(vectors[i]));
  return out;
}

RetrievalResult retrieve_random(const Repository& repo, const RetrievalConfig& cfg, std::string_view salt) {
  cfg.validate();
  RetrievalResult out;
  out.strategy = StrategyKind::random;
  SeededRng rng(cfg.seed, "random:" + std::string(salt));
  for (std::size_t i : rng.sample_indices(repo.records.size(), cfg.k)) {
    out.examples.push_back({&repo.records[i], ExampleOrigin::random, 0.0, std::nullopt});
  }
  return out;
}

RetrievalResult retrieve_knn(std::string_view input_text, const Repository& repo, const RecordEmbeddings& embeddings,
                             EmbeddingProvider& provider, EmbeddingCache& cache, const RetrievalConfig& cfg) {
  cfg.validate();
  RetrievalResult out;
  out.strategy = StrategyKind::knn;
  if (repo.empty()) return out;
  const EmbeddingVector query = embed(input_text, provider, cache);
  for (const auto& hit : knn_search(query, embeddings.vectors, cfg.k)) {
    const ExampleRecord* rec = repo.find(hit.record_id);
    if (!rec) throw Error(ErrorKind::InvalidConfig, "embedding for unknown record " + hit.record_id);
    out.examples.push_back({rec, ExampleOrigin::knn, hit.similarity, std::nullopt});
  }
  return out;
}

RetrievalResult retrieve_pattern(const std::vector<std::string>& input_connectives, const Repository& repo,
                                 const RetrievalConfig& cfg, std::string_view salt) {
  cfg.validate();
  std::vector<std::string> inputs;
  for (const auto& c : input_connectives) {
    std::string n = normalize_connective(c);
    if (!n.empty() && std::find(inputs.begin(), inputs.end(), n) == inputs.end()) inputs.push_back(std::move(n));
  }

  struct Match {
    double score;
    const std::string* key;
  };
  std::map<std::string, Match> candidates;  // record id -> best matching key
  for (const auto& [key, ids] : repo.index) {
    double best = -1.0;
    for (const auto& in : inputs) best = std::max(best, connective_similarity(in, key, cfg.matcher));
    if (!(best > cfg.similarity_threshold)) continue;
    for (const auto& id : ids) {
      auto [it, inserted] = candidates.try_emplace(id, Match{best, &key});
      if (!inserted && best > it->second.score) it->second = Match{best, &key};
    }
  }

  if (candidates.empty()) {
    if (!cfg.fallback_to_random) return RetrievalResult{StrategyKind::pattern, {}, false};
    RetrievalResult fb = retrieve_random(repo, cfg, salt);
    fb.strategy = StrategyKind::pattern;
    fb.fallback_used = true;
    for (auto& ex : fb.examples) ex.origin = ExampleOrigin::random_fallback;
    return fb;
  }

  std::vector<std::string> ids;
  ids.reserve(candidates.size());
  for (const auto& [id, m] : candidates) ids.push_back(id);
  SeededRng rng(cfg.seed, "pattern:" + std::string(salt));
  RetrievalResult out;
  out.strategy = StrategyKind::pattern;
  for (const auto& id : rng.sample(ids, cfg.k)) {
    const Match& m = candidates.at(id);
    const ExampleRecord* rec = repo.find(id);
    if (!rec) throw Error(ErrorKind::InvalidConfig, "index references unknown record " + id);
    out.examples.push_back({rec, ExampleOrigin::pattern, m.score, *m.key});
  }
  return out;
}

RetrievalResult combine_knn_pattern(const RetrievalResult& knn, const RetrievalResult& pattern) {
  RetrievalResult out;
  out.strategy = StrategyKind::knn_pattern;
  out.fallback_used = pattern.fallback_used;
  std::set<std::string_view> seen;
  for (const auto* block : {&knn, &pattern}) {
    for (const auto& ex : block->examples) {
      if (seen.insert(ex.record->id).second) out.examples.push_back(ex);
    }
  }
  return out;
}

RetrievalResult retrieve_knn_pattern(std::string_view input_text, const std::vector<std::string>& input_connectives,
                                     const Repository& repo, const RecordEmbeddings& embeddings,
                                     EmbeddingProvider& provider, EmbeddingCache& cache, const RetrievalConfig& cfg,
                                     std::string_view salt) {
  return combine_knn_pattern(retrieve_knn(input_text, repo, embeddings, provider, cache, cfg),
                             retrieve_pattern(input_connectives, repo, cfg, salt));
}

std::optional<std::vector<std::string>> InputConnectiveCache::get(const std::string& sentence_id) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(sentence_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void InputConnectiveCache::put(const std::string& sentence_id, std::vector<std::string> connectives) {
  std::unique_lock lock(mu_);
  entries_.try_emplace(sentence_id, std::move(connectives));
}

std::vector<std::string> input_connectives(const std::string& sentence_id, std::string_view sentence, LlmGateway& llm,
                                           const PromptCatalog& catalog, const std::string& model_id,
                                           InputConnectiveCache& cache) {
  if (auto hit = cache.get(sentence_id)) return *hit;
  TaggedSentence bare;
  bare.id = sentence_id;
  bare.raw_text = text::collapse_whitespace(sentence);
  std::vector<std::string> found;
  try {
    found = extract_connectives(bare, llm, catalog, model_id);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UnparseableResponse) throw;
  }
  cache.put(sentence_id, found);
  return found;
}

namespace {

void require(bool ok, StrategyKind s, const char* what) {
  if (!ok) throw Error(ErrorKind::InvalidConfig, std::string(to_string(s)) + " retrieval needs " + what);
}

}  // namespace

RetrievalResult retrieve(StrategyKind strategy, const std::string& sentence_id, std::string_view sentence,
                         const RetrievalContext& ctx, const RetrievalConfig& cfg) {
  if (strategy == StrategyKind::zeroshot) return RetrievalResult{};
  require(ctx.repo != nullptr, strategy, "a repository");
  const bool knn = strategy == StrategyKind::knn || strategy == StrategyKind::knn_pattern;
  const bool pattern = strategy == StrategyKind::pattern || strategy == StrategyKind::knn_pattern;
  if (knn) require(ctx.embeddings && ctx.embedder && ctx.embedding_cache, strategy, "record embeddings and an embedder");
  if (pattern) require(ctx.llm && ctx.catalog && ctx.connective_cache, strategy, "an LLM gateway for input connectives");

  switch (strategy) {
    case StrategyKind::random:
      return retrieve_random(*ctx.repo, cfg, sentence_id);
    case StrategyKind::knn:
      return retrieve_knn(sentence, *ctx.repo, *ctx.embeddings, *ctx.embedder, *ctx.embedding_cache, cfg);
    case StrategyKind::pattern:
    case StrategyKind::knn_pattern: {
      const auto connectives =
          input_connectives(sentence_id, sentence, *ctx.llm, *ctx.catalog, ctx.model_id, *ctx.connective_cache);
      if (strategy == StrategyKind::pattern) return retrieve_pattern(connectives, *ctx.repo, cfg, sentence_id);
      return retrieve_knn_pattern(sentence, connectives, *ctx.repo, *ctx.embeddings, *ctx.embedder,
                                  *ctx.embedding_cache, cfg, sentence_id);
    }
    case StrategyKind::zeroshot:
      break;
  }
  return RetrievalResult{};
}

}  // namespace causal_rag
