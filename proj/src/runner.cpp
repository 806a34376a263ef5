#include "causal_rag/runner.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "causal_rag/error.hpp"
#include "causal_rag/parallel.hpp"
#include "causal_rag/rng.hpp"
#include "causal_rag/text.hpp"

namespace causal_rag {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

ojson pairs_json(const std::vector<CauseEffectPair>& pairs) {
  ojson arr = ojson::array();
  for (const auto& p : pairs) arr.push_back({{"cause", p.cause}, {"effect", p.effect}});
  return arr;
}

std::string path_string(const std::filesystem::path& p) { return p.empty() ? std::string() : p.generic_string(); }

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw Error(ErrorKind::IoError, "failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorKind::IoError, "cannot replace " + path.string() + ": " + ec.message());
  }
}

const CauseEffectPair& gold_for(const std::vector<CauseEffectPair>& gold, const CauseEffectPair* predicted) {
  if (predicted) {
    for (const auto& g : gold) {
      if (containment_match(g.cause, predicted->cause) && containment_match(g.effect, predicted->effect)) return g;
    }
  }
  return gold.front();
}

}  // namespace

Task parse_task(std::string_view name) {
  if (name == "detect" || name == "detection") return Task::detect;
  if (name == "extract" || name == "extraction") return Task::extract;
  throw Error(ErrorKind::InvalidConfig, "unknown task `" + std::string(name) + "`");
}

std::string_view to_string(Task task) { return task == Task::detect ? "detect" : "extract"; }

void ExperimentConfig::validate() const {
  retrieval.validate();
  if (backend == Backend::replay && transcript.empty()) {
    throw Error(ErrorKind::InvalidConfig, "replay backend needs --transcript");
  }
  if (concurrency == 0) throw Error(ErrorKind::InvalidConfig, "concurrency must be at least 1");
  if (max_output_tokens <= 0) throw Error(ErrorKind::InvalidConfig, "max output tokens must be positive");
}

ojson ExperimentConfig::to_json() const {
  ojson j;
  j["task"] = std::string(causal_rag::to_string(task));
  j["strategy"] = std::string(causal_rag::to_string(strategy));
  j["k"] = retrieval.k;
  j["seed"] = retrieval.seed;
  j["matcher"] = std::string(causal_rag::to_string(retrieval.matcher));
  j["threshold"] = retrieval.similarity_threshold;
  j["single_pair"] = single_pair;
  j["model"] = model_id;
  j["temperature"] = temperature;
  j["max_output_tokens"] = max_output_tokens;
  j["backend"] = std::string(causal_rag::to_string(backend));
  j["matching"] = matching == TripletMatching::greedy ? "greedy" : "optimal";
  j["db"] = path_string(db);
  j["dataset"] = path_string(dataset);
  j["transcript"] = path_string(transcript);
  j["cache"] = path_string(cache);
  j["output"] = path_string(output);
  // concurrency is left out on purpose: reports must not depend on it.
  return j;
}

ojson to_json(const PredictionRecord& r) {
  ojson j;
  j["id"] = r.sentence_id;
  j["prompt_hash"] = r.prompt_hash;
  j["response"] = r.raw_response;
  if (r.label) {
    j["label"] = *r.label;
  } else if (!r.pairs.empty() || r.parse_failed) {
    j["pairs"] = pairs_json(r.pairs);
  }
  j["parse_failed"] = r.parse_failed;
  if (r.overlap_flag) j["overlap_flag"] = true;
  ojson prov;
  prov["strategy"] = r.strategy;
  prov["example_ids"] = r.example_ids;
  prov["origins"] = r.example_origins;
  prov["fallback_used"] = r.fallback_used;
  j["retrieval"] = std::move(prov);
  if (r.elapsed_ms) j["elapsed_ms"] = *r.elapsed_ms;
  return j;
}

PredictionRecord prediction_from_json(const json& j) {
  try {
    PredictionRecord r;
    r.sentence_id = j.at("id").get<std::string>();
    r.prompt_hash = j.at("prompt_hash").get<std::string>();
    r.raw_response = j.at("response").get<std::string>();
    if (j.contains("label")) r.label = j["label"].get<int>();
    if (j.contains("pairs")) {
      for (const auto& p : j["pairs"]) r.pairs.push_back({p.at("cause").get<std::string>(), p.at("effect").get<std::string>()});
    }
    r.parse_failed = j.at("parse_failed").get<bool>();
    r.overlap_flag = j.value("overlap_flag", false);
    const auto& prov = j.at("retrieval");
    r.strategy = prov.at("strategy").get<std::string>();
    r.example_ids = prov.at("example_ids").get<std::vector<std::string>>();
    r.example_origins = prov.at("origins").get<std::vector<std::string>>();
    r.fallback_used = prov.at("fallback_used").get<bool>();
    if (j.contains("elapsed_ms")) r.elapsed_ms = j["elapsed_ms"].get<double>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("prediction record: ") + e.what());
  }
}

std::vector<LabeledInstance> task_instances(const std::vector<LabeledInstance>& all, Task task) {
  std::vector<LabeledInstance> out;
  for (const auto& inst : all) {
    if (task == Task::detect || (inst.label == 1 && inst.sentence.causal())) out.push_back(inst);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.sentence.id < b.sentence.id; });
  return out;
}

PredictionRecord predict_instance(const LabeledInstance& instance, const ExperimentConfig& cfg, RunServices& svc) {
  if (!svc.llm || !svc.catalog) throw Error(ErrorKind::InvalidConfig, "run needs an LLM gateway and a prompt catalog");
  const auto start = std::chrono::steady_clock::now();
  const TaggedSentence& s = instance.sentence;

  RetrievalContext ctx;
  ctx.repo = svc.repo;
  ctx.embeddings = svc.embeddings;
  ctx.embedder = svc.embedder;
  ctx.embedding_cache = svc.embedding_cache;
  ctx.llm = svc.llm;
  ctx.catalog = svc.catalog;
  ctx.connective_cache = svc.connective_cache;
  ctx.model_id = cfg.model_id;
  const RetrievalResult examples = retrieve(cfg.strategy, s.id, s.raw_text, ctx, cfg.retrieval);

  const AssembledPrompt prompt = cfg.task == Task::detect
                                     ? detection_prompt(s.raw_text, examples, *svc.catalog)
                                     : extraction_prompt(s.raw_text, examples, cfg.single_pair, *svc.catalog);
  const CompletionRequest req = prompt.to_request(cfg.model_id, cfg.temperature, cfg.max_output_tokens);

  PredictionRecord r;
  r.sentence_id = s.id;
  r.prompt_hash = request_hash(req);
  r.strategy = std::string(to_string(cfg.strategy));
  r.fallback_used = examples.fallback_used;
  for (const auto& ex : examples.examples) {
    r.example_ids.push_back(ex.record->id);
    r.example_origins.emplace_back(to_string(ex.origin));
  }

  r.raw_response = svc.llm->complete(req).text;
  try {
    if (cfg.task == Task::detect) {
      r.label = parse_detection(r.raw_response).label;
    } else {
      ExtractionPrediction p = parse_extraction(r.raw_response);
      r.overlap_flag = p.overlap_flag;
      r.pairs = std::move(p.pairs);
      if (cfg.single_pair && r.pairs.size() > 1) r.pairs.resize(1);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UnparseableResponse) throw;
    r.parse_failed = true;
  }
  if (cfg.record_timing) {
    r.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return r;
}

std::vector<PredictionRecord> run_predictions(const std::vector<LabeledInstance>& instances,
                                              const ExperimentConfig& cfg, RunServices& svc) {
  cfg.validate();
  std::vector<PredictionRecord> out(instances.size());
  parallel_for(instances.size(), cfg.concurrency,
               [&](std::size_t i) { out[i] = predict_instance(instances[i], cfg, svc); });
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.sentence_id < b.sentence_id; });
  return out;
}

RunSummary score_predictions(const std::vector<LabeledInstance>& instances,
                             const std::vector<PredictionRecord>& predictions, const ExperimentConfig& cfg) {
  if (instances.empty()) throw Error(ErrorKind::EmptyInput, "no instances to score");
  std::map<std::string_view, const PredictionRecord*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.sentence_id, &p);

  RunSummary sum;
  sum.instances = instances.size();
  sum.min_example_count = static_cast<std::size_t>(-1);
  std::size_t example_total = 0;
  std::vector<DetectionCase> detection;
  std::vector<SinglePairCase> single;
  std::vector<Triplet> gold;
  std::vector<Triplet> predicted;

  for (const auto& inst : instances) {
    auto it = by_id.find(inst.sentence.id);
    if (it == by_id.end()) throw Error(ErrorKind::MalformedRecord, "no prediction for " + inst.sentence.id);
    const PredictionRecord& p = *it->second;
    sum.parse_failures += p.parse_failed;
    sum.fallback_count += p.fallback_used;
    example_total += p.example_count();
    sum.min_example_count = std::min(sum.min_example_count, p.example_count());
    sum.max_example_count = std::max(sum.max_example_count, p.example_count());

    if (cfg.task == Task::detect) {
      detection.push_back({p.parse_failed ? std::nullopt : p.label, inst.label});
    } else if (cfg.single_pair) {
      const CauseEffectPair* first = p.pairs.empty() ? nullptr : &p.pairs.front();
      SinglePairCase c;
      c.sentence_id = inst.sentence.id;
      c.gold = gold_for(inst.sentence.pairs, first);
      if (first) c.predicted = *first;
      c.overlap_flag = p.overlap_flag;
      single.push_back(std::move(c));
    } else {
      for (const auto& g : inst.sentence.pairs) gold.push_back({inst.sentence.id, g.cause, g.effect});
      for (const auto& q : p.pairs) predicted.push_back({inst.sentence.id, q.cause, q.effect});
    }
  }
  sum.mean_example_count = static_cast<double>(example_total) / static_cast<double>(instances.size());

  if (cfg.task == Task::detect) {
    sum.metrics = to_json(detection_metrics(detection));
  } else if (cfg.single_pair) {
    sum.metrics = to_json(single_pair_accuracy(single));
  } else {
    sum.metrics = to_json(triplet_metrics(gold, predicted, cfg.matching));
  }
  return sum;
}

ojson metrics_report(const RunSummary& s, const ExperimentConfig& cfg) {
  ojson j;
  j["config"] = cfg.to_json();
  j["instances"] = s.instances;
  j["parse_failures"] = s.parse_failures;
  j["metrics"] = s.metrics;
  ojson r;
  r["examples_mean"] = s.mean_example_count;
  r["examples_min"] = s.min_example_count;
  r["examples_max"] = s.max_example_count;
  r["fallback_count"] = s.fallback_count;
  j["retrieval"] = std::move(r);
  return j;
}

std::map<std::string, PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::map<std::string, PredictionRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorKind::MalformedRecord, path.string() + " line " + std::to_string(line_no) + ": not JSON");
    }
    PredictionRecord r;
    try {
      r = prediction_from_json(j);
    } catch (const Error& e) {
      throw Error(ErrorKind::MalformedRecord, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
    std::string id = r.sentence_id;
    if (!out.emplace(std::move(id), std::move(r)).second) {
      throw Error(ErrorKind::MalformedRecord, path.string() + " line " + std::to_string(line_no) + ": duplicate id");
    }
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, const std::map<std::string, PredictionRecord>& records) {
  std::string content;
  for (const auto& [id, r] : records) content += to_json(r).dump() + "\n";
  write_atomically(path, content);
}

std::filesystem::path metrics_path_for(const std::filesystem::path& predictions) {
  std::filesystem::path p = predictions;
  p.replace_extension(".metrics.json");
  return p;
}

std::vector<SweepRow> run_sweep(const std::vector<LabeledInstance>& instances, const ExperimentConfig& base,
                                const std::vector<StrategyKind>& strategies, const std::vector<std::size_t>& ks,
                                RunServices& svc) {
  if (ks.empty()) throw Error(ErrorKind::InvalidConfig, "sweep needs at least one k");
  if (strategies.empty()) throw Error(ErrorKind::InvalidConfig, "sweep needs at least one strategy");
  std::vector<SweepRow> rows;
  for (StrategyKind strategy : strategies) {
    for (std::size_t k : ks) {
      ExperimentConfig cfg = base;
      cfg.strategy = strategy;
      cfg.retrieval.k = k;
      const RunSummary s = score_predictions(instances, run_predictions(instances, cfg, svc), cfg);
      const std::string name(to_string(strategy));
      for (const auto& [metric, v] : s.metrics.items()) {
        rows.push_back({name, k, metric, v.get<double>(), !v.is_number_float()});
      }
      rows.push_back({name, k, "examples_mean", s.mean_example_count, false});
      rows.push_back({name, k, "examples_min", static_cast<double>(s.min_example_count), true});
      rows.push_back({name, k, "examples_max", static_cast<double>(s.max_example_count), true});
      rows.push_back({name, k, "fallback_count", static_cast<double>(s.fallback_count), true});
      rows.push_back({name, k, "parse_failures", static_cast<double>(s.parse_failures), true});
    }
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "strategy,k,metric,value\n";
  char buf[64];
  for (const auto& r : rows) {
    if (r.integral) {
      std::snprintf(buf, sizeof buf, "%.0f", r.value);
    } else {
      std::snprintf(buf, sizeof buf, "%.6f", r.value);
    }
    out << r.strategy << ',' << r.k << ',' << r.metric << ',' << buf << '\n';
  }
}

std::string format_repository_stats(const Repository& repo, std::size_t sample, std::uint64_t seed) {
  const RepositoryStats st = repository_stats(repo);
  std::ostringstream out;
  out << "records              " << st.total_records << '\n';
  out << "unique connectives   " << st.unique_connectives << '\n';
  out << "index entries        " << st.index_entries << '\n';
  out << "connectives with >=5 " << st.connectives_with_at_least_5 << '\n';
  out << "cap                  " << repo.cap << '\n';
  out << "examples per connective -> connectives\n";
  for (std::size_t n = 1; n <= repo.cap; ++n) {
    auto it = st.frequency_histogram.find(n);
    out << "  " << n << '\t' << (it == st.frequency_histogram.end() ? 0 : it->second) << '\n';
  }
  if (sample > 0) {
    std::map<std::size_t, std::vector<std::string>> by_len;
    for (const auto& [key, ids] : repo.index) by_len[ids.size()].push_back(key);
    out << "sampled connectives (" << sample << " per category)\n";
    for (std::size_t n = 1; n <= repo.cap; ++n) {
      const auto& keys = by_len[n];
      SeededRng rng(seed, "stats:" + std::to_string(n));
      out << "  " << n << ':';
      for (const auto& k : rng.sample(keys, sample)) out << " \"" << k << '"';
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace causal_rag
