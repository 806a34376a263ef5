// causal-rag: build the example DB, run and sweep experiments, print stats,
// re-score prediction files, convert native datasets.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>

#include <CLI11.hpp>

#include "causal_rag/corpus.hpp"
#include "causal_rag/embedding.hpp"
#include "causal_rag/error.hpp"
#include "causal_rag/evaluation.hpp"
#include "causal_rag/llm_gateway.hpp"
#include "causal_rag/prompting.hpp"
#include "causal_rag/repository.hpp"
#include "causal_rag/retrieval.hpp"
#include "causal_rag/runner.hpp"

namespace cr = causal_rag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitProvider = 3;

struct Options {
  std::string db;
  std::vector<std::string> datasets;
  std::string format = "jsonl";
  std::string task = "detect";
  std::vector<std::string> strategies{"zeroshot"};
  std::vector<std::size_t> ks{10};
  std::uint64_t seed = 0;
  std::string backend = "replay";
  std::string transcript;
  std::string base_url = "https://api.openai.com";
  std::string model = "gpt-4o";
  std::string matcher = "edit_ratio";
  double threshold = 0.90;
  bool single_pair = false;
  std::string out;
  std::string metrics;
  std::size_t concurrency = 4;
  std::size_t sample = 0;
  bool force = false;
  std::string embedder = "local";
  std::string embedding_model = "text-embedding-3-small";
  std::size_t embedding_dim = 256;
  std::string cache;
  std::size_t cap = 10;
  std::string catalog;
  std::string matching = "greedy";
  bool timing = false;
  double temperature = 0.0;
  int max_tokens = 512;
};

std::string api_key() {
  const char* k = std::getenv("CAUSAL_RAG_API_KEY");
  return k ? std::string(k) : std::string();
}

cr::PromptCatalog load_catalog(const Options& o) {
  return o.catalog.empty() ? cr::PromptCatalog::builtin() : cr::PromptCatalog::load(o.catalog);
}

// Owns the gateway stack for one command.
struct Gateway {
  std::unique_ptr<cr::Transcript> transcript;
  std::unique_ptr<cr::ChatTransport> transport;
  std::unique_ptr<cr::LlmGateway> llm;
};

Gateway make_gateway(const Options& o) {
  Gateway g;
  const cr::Backend backend = cr::parse_backend(o.backend);
  if (backend != cr::Backend::live) {
    if (o.transcript.empty()) throw cr::Error(cr::ErrorKind::InvalidConfig, o.backend + " backend needs --transcript");
    if (backend == cr::Backend::replay && !std::filesystem::exists(o.transcript)) {
      throw cr::Error(cr::ErrorKind::IoError, "transcript " + o.transcript + " does not exist");
    }
    g.transcript = std::make_unique<cr::Transcript>(o.transcript);
  }
  if (backend != cr::Backend::replay) g.transport = std::make_unique<cr::HttpChatTransport>(o.base_url, api_key());
  g.llm = std::make_unique<cr::LlmGateway>(backend, g.transport.get(), g.transcript.get());
  return g;
}

std::vector<cr::LabeledInstance> load_instances(const Options& o) {
  if (o.datasets.empty()) throw cr::Error(cr::ErrorKind::InvalidConfig, "--dataset is required");
  const cr::DatasetFormat format = cr::parse_dataset_format(o.format);
  std::vector<cr::LabeledInstance> all;
  std::set<std::string> ids;
  for (const auto& path : o.datasets) {
    cr::DatasetSplit split = cr::load_dataset(path, format);
    for (auto& inst : split.instances) {
      if (!ids.insert(inst.sentence.id).second) {
        throw cr::Error(cr::ErrorKind::MalformedRecord, "sentence id " + inst.sentence.id + " appears in several inputs");
      }
      all.push_back(std::move(inst));
    }
  }
  return all;
}

cr::ExperimentConfig experiment_config(const Options& o) {
  cr::ExperimentConfig cfg;
  cfg.task = cr::parse_task(o.task);
  cfg.strategy = cr::parse_strategy(o.strategies.front());
  cfg.retrieval.k = o.ks.front();
  cfg.retrieval.seed = o.seed;
  cfg.retrieval.matcher = cr::parse_matcher(o.matcher);
  cfg.retrieval.similarity_threshold = o.threshold;
  cfg.single_pair = o.single_pair;
  cfg.model_id = o.model;
  cfg.temperature = o.temperature;
  cfg.max_output_tokens = o.max_tokens;
  cfg.backend = cr::parse_backend(o.backend);
  cfg.concurrency = o.concurrency;
  if (o.matching == "greedy") {
    cfg.matching = cr::TripletMatching::greedy;
  } else if (o.matching == "optimal") {
    cfg.matching = cr::TripletMatching::optimal;
  } else {
    throw cr::Error(cr::ErrorKind::InvalidConfig, "unknown matching `" + o.matching + "`");
  }
  cfg.record_timing = o.timing;
  cfg.db = o.db;
  if (!o.datasets.empty()) cfg.dataset = o.datasets.front();
  cfg.transcript = o.transcript;
  cfg.cache = o.cache;
  cfg.output = o.out;
  cfg.validate();
  return cfg;
}

// Repository, embeddings and caches shared by run and sweep.
struct Environment {
  cr::PromptCatalog catalog;
  Gateway gateway;
  cr::Repository repo;
  std::unique_ptr<cr::EmbeddingProvider> embedder;
  std::unique_ptr<cr::EmbeddingCache> embedding_cache;
  cr::RecordEmbeddings embeddings;
  cr::InputConnectiveCache connective_cache;

  cr::RunServices services() {
    cr::RunServices s;
    s.llm = gateway.llm.get();
    s.catalog = &catalog;
    s.repo = &repo;
    s.embeddings = &embeddings;
    s.embedder = embedder.get();
    s.embedding_cache = embedding_cache.get();
    s.connective_cache = &connective_cache;
    return s;
  }
};

std::unique_ptr<Environment> make_environment(const Options& o, const std::vector<cr::StrategyKind>& strategies) {
  auto env = std::make_unique<Environment>();
  env->catalog = load_catalog(o);
  env->gateway = make_gateway(o);
  bool needs_repo = false;
  bool needs_knn = false;
  for (auto s : strategies) {
    needs_repo |= s != cr::StrategyKind::zeroshot;
    needs_knn |= s == cr::StrategyKind::knn || s == cr::StrategyKind::knn_pattern;
  }
  if (needs_repo && o.db.empty()) throw cr::Error(cr::ErrorKind::InvalidConfig, "few-shot strategies need --db");
  if (!o.db.empty()) env->repo = cr::load_repository(o.db);
  if (needs_knn) {
    if (o.embedder == "local") {
      env->embedder = std::make_unique<cr::LocalHashEmbedder>(o.embedding_dim);
    } else if (o.embedder == "remote") {
      env->embedder = std::make_unique<cr::HttpEmbeddingProvider>(o.base_url, api_key(), o.embedding_model);
    } else {
      throw cr::Error(cr::ErrorKind::InvalidConfig, "unknown embedder `" + o.embedder + "`");
    }
    env->embedding_cache = o.cache.empty() ? std::make_unique<cr::EmbeddingCache>()
                                           : std::make_unique<cr::EmbeddingCache>(std::filesystem::path(o.cache));
    env->embeddings = cr::embed_repository(env->repo, *env->embedder, *env->embedding_cache, o.concurrency);
  }
  return env;
}

int cmd_build_db(const Options& o) {
  if (o.db.empty()) throw cr::Error(cr::ErrorKind::InvalidConfig, "--db is required");
  std::vector<cr::TaggedSentence> causal;
  for (auto& inst : load_instances(o)) {
    if (inst.label == 1 && inst.sentence.causal()) causal.push_back(std::move(inst.sentence));
  }
  std::cout << "causal sentences: " << causal.size() << '\n';
  Gateway g = make_gateway(o);
  const cr::PromptCatalog catalog = load_catalog(o);
  cr::BuildOptions opts;
  opts.cap = o.cap;
  opts.seed = o.seed;
  opts.concurrency = o.concurrency;
  opts.model_id = o.model;
  cr::BuildReport report;
  const cr::Repository repo = cr::build_repository(causal, *g.llm, catalog, opts, &report);
  cr::save_repository(repo, o.db);
  std::cout << "skipped (no connective): " << report.skipped_ids.size() << '\n';
  std::cout << "connective not found in text: " << report.unverified << '\n';
  std::cout << cr::format_repository_stats(repo);
  return kExitOk;
}

int cmd_run(const Options& o) {
  if (o.out.empty()) throw cr::Error(cr::ErrorKind::InvalidConfig, "--out is required");
  if (o.ks.size() != 1 || o.strategies.size() != 1) {
    throw cr::Error(cr::ErrorKind::InvalidConfig, "run takes one --k and one --strategy (use sweep for several)");
  }
  const cr::ExperimentConfig cfg = experiment_config(o);
  const auto instances = cr::task_instances(load_instances(o), cfg.task);
  auto env = make_environment(o, {cfg.strategy});

  std::map<std::string, cr::PredictionRecord> records;
  if (!o.force) records = cr::read_predictions(o.out);
  std::vector<cr::LabeledInstance> todo;
  for (const auto& inst : instances) {
    if (!records.count(inst.sentence.id)) todo.push_back(inst);
  }
  std::cerr << instances.size() - todo.size() << " of " << instances.size() << " predictions already present\n";

  cr::RunServices svc = env->services();
  try {
    for (auto& r : cr::run_predictions(todo, cfg, svc)) {
      std::string id = r.sentence_id;
      records.insert_or_assign(std::move(id), std::move(r));
    }
  } catch (const cr::Error& e) {
    if (cr::is_provider_failure(e.kind()) && !o.transcript.empty() && cfg.backend != cr::Backend::replay) {
      std::cerr << "answered requests are kept in " << o.transcript
                << "; rerun the same command with --backend record to resume without repeating them\n";
    }
    throw;
  }
  cr::write_predictions(o.out, records);

  std::vector<cr::PredictionRecord> preds;
  for (const auto& [id, r] : records) preds.push_back(r);
  const auto report = cr::metrics_report(cr::score_predictions(instances, preds, cfg), cfg);
  const std::filesystem::path metrics = o.metrics.empty() ? cr::metrics_path_for(o.out) : std::filesystem::path(o.metrics);
  std::ofstream(metrics) << report.dump(2) << '\n';
  std::cout << cr::render_table(report);
  return kExitOk;
}

int cmd_sweep(const Options& o) {
  if (o.ks.empty()) throw cr::Error(cr::ErrorKind::InvalidConfig, "sweep needs at least one --k");
  std::vector<cr::StrategyKind> strategies;
  for (const auto& s : o.strategies) strategies.push_back(cr::parse_strategy(s));
  const cr::ExperimentConfig cfg = experiment_config(o);
  const auto instances = cr::task_instances(load_instances(o), cfg.task);
  auto env = make_environment(o, strategies);
  cr::RunServices svc = env->services();
  const auto rows = cr::run_sweep(instances, cfg, strategies, o.ks, svc);
  if (o.out.empty()) {
    cr::write_sweep_csv(rows, std::cout);
  } else {
    std::ofstream out(o.out);
    if (!out) throw cr::Error(cr::ErrorKind::IoError, "cannot write " + o.out);
    cr::write_sweep_csv(rows, out);
    std::cout << "wrote " << rows.size() << " rows to " << o.out << '\n';
  }
  return kExitOk;
}

int cmd_stats(const Options& o) {
  if (o.db.empty()) throw cr::Error(cr::ErrorKind::InvalidConfig, "--db is required");
  std::cout << cr::format_repository_stats(cr::load_repository(o.db), o.sample, o.seed);
  return kExitOk;
}

int cmd_eval(const Options& o) {
  if (o.out.empty()) throw cr::Error(cr::ErrorKind::InvalidConfig, "--out must name the prediction file to score");
  const cr::ExperimentConfig cfg = experiment_config(o);
  const auto instances = cr::task_instances(load_instances(o), cfg.task);
  std::vector<cr::PredictionRecord> preds;
  for (auto& [id, r] : cr::read_predictions(o.out)) preds.push_back(std::move(r));
  const auto report = cr::metrics_report(cr::score_predictions(instances, preds, cfg), cfg);
  if (!o.metrics.empty()) std::ofstream(o.metrics) << report.dump(2) << '\n';
  std::cout << cr::render_table(report);
  return kExitOk;
}

int cmd_import(const Options& o) {
  if (o.datasets.size() != 1 || o.out.empty()) {
    throw cr::Error(cr::ErrorKind::InvalidConfig, "import takes one --dataset and --out");
  }
  const cr::DatasetSplit split = cr::load_dataset(o.datasets.front(), cr::parse_dataset_format(o.format));
  std::ofstream out(o.out);
  if (!out) throw cr::Error(cr::ErrorKind::IoError, "cannot write " + o.out);
  cr::write_canonical_jsonl(split, out);
  const auto summary = cr::dataset_stats(split);
  std::cout << split.name << ": " << summary.counts.total << " sentences, " << summary.counts.causal << " causal, "
            << summary.counts.non_causal << " non-causal, " << summary.triplet_count << " triplets\n";
  return kExitOk;
}

int exit_code_for(cr::ErrorKind kind) {
  if (cr::is_provider_failure(kind)) return kExitProvider;
  if (kind == cr::ErrorKind::InvalidConfig) return kExitUsage;
  return kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented few-shot causality detection and extraction"};
  app.set_config("--config", "", "key = value file; flags given on the command line win");
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--db", o.db, "Example repository file");
  app.add_option("--dataset", o.datasets, "Dataset file (repeatable; build-db merges all)");
  app.add_option("--format", o.format, "Dataset format: jsonl, semeval, ade, li");
  app.add_option("--task", o.task, "detect or extract");
  app.add_option("--strategy", o.strategies, "zeroshot, random, knn, pattern, knn-pattern (sweep: comma list)")
      ->delimiter(',');
  app.add_option("--k", o.ks, "Examples per retrieval component (sweep: comma list)")->delimiter(',');
  app.add_option("--seed", o.seed, "Seed for every random draw");
  app.add_option("--backend", o.backend, "live, replay or record");
  app.add_option("--transcript", o.transcript, "Request/response transcript (JSONL)");
  app.add_option("--base-url", o.base_url, "OpenAI-compatible endpoint");
  app.add_option("--model", o.model, "Chat model id");
  app.add_option("--matcher", o.matcher, "edit_ratio or token_containment");
  app.add_option("--threshold", o.threshold, "Connective similarity threshold (match when greater)");
  app.add_flag("--single-pair", o.single_pair, "Ask for and score exactly one cause/effect pair");
  app.add_option("--out", o.out, "Predictions (run, eval), CSV (sweep) or JSONL (import)");
  app.add_option("--metrics", o.metrics, "Metrics report path (default: next to predictions)");
  app.add_option("--concurrency", o.concurrency, "Requests in flight");
  app.add_option("--sample", o.sample, "stats: connectives to list per frequency category");
  app.add_flag("--force", o.force, "Recompute predictions already present in --out");
  app.add_option("--embedder", o.embedder, "local or remote");
  app.add_option("--embedding-model", o.embedding_model, "Remote embedding model id");
  app.add_option("--embedding-dim", o.embedding_dim, "Local hash embedder dimension");
  app.add_option("--cache", o.cache, "Embedding cache (JSONL)");
  app.add_option("--cap", o.cap, "build-db: examples kept per connective");
  app.add_option("--catalog", o.catalog, "Prompt catalog file (default: built in)");
  app.add_option("--matching", o.matching, "Triplet matching: greedy or optimal");
  app.add_flag("--timing", o.timing, "Record per-instance latency in predictions");
  app.add_option("--temperature", o.temperature, "Sampling temperature");
  app.add_option("--max-tokens", o.max_tokens, "Completion token cap");

  auto* build = app.add_subcommand("build-db", "Extract connectives and write the example repository");
  auto* run = app.add_subcommand("run", "Run one task/strategy over a dataset");
  auto* sweep = app.add_subcommand("sweep", "Run every strategy x k pair and write a CSV");
  auto* stats = app.add_subcommand("stats", "Print repository statistics");
  auto* eval = app.add_subcommand("eval", "Re-score an existing prediction file");
  auto* import = app.add_subcommand("import", "Convert a native dataset to canonical JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*build) return cmd_build_db(o);
    if (*run) return cmd_run(o);
    if (*sweep) return cmd_sweep(o);
    if (*stats) return cmd_stats(o);
    if (*eval) return cmd_eval(o);
    if (*import) return cmd_import(o);
  } catch (const cr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
