// Regenerates tests/fixtures: training corpus, example DB, evaluation sets,
// recorded transcripts and pinned metrics. Usage: make_fixture <out-dir>
//
// The stand-in model answers from the gold labels, but its mistakes depend
// on a hash of the whole prompt, so different strategies (different example
// blocks) get different, reproducible error patterns.

#include <fstream>
#include <iostream>
#include <map>

#include "causal_rag/corpus.hpp"
#include "causal_rag/error.hpp"
#include "causal_rag/llm_gateway.hpp"
#include "causal_rag/prompting.hpp"
#include "causal_rag/repository.hpp"
#include "causal_rag/runner.hpp"
#include "causal_rag/text.hpp"
#include "synthetic.hpp"

namespace cr = causal_rag;
namespace fs = std::filesystem;

namespace {

struct Item {
  const char* text;
  int label;
  std::vector<cr::CauseEffectPair> pairs;
};

const std::vector<Item>& detect_items() {
  static const std::vector<Item> items{
      {"The outage was caused by a lightning strike.", 1, {{"a lightning strike", "The outage"}}},
      {"Fever is caused by flu.", 1, {{"flu", "Fever"}}},
      {"Unpaid bills lead to late fees.", 1, {{"Unpaid bills", "late fees"}}},
      {"The rash was induced by the new soap.", 1, {{"the new soap", "The rash"}}},
      {"Flights were cancelled due to fog.", 1, {{"fog", "Flights were cancelled"}}},
      {"The match was postponed because of heavy snow.", 1, {{"heavy snow", "The match was postponed"}}},
      {"The leak resulted in water damage.", 1, {{"The leak", "water damage"}}},
      {"A loud noise triggered the alarm.", 1, {{"A loud noise", "the alarm"}}},
      {"The crash was caused by the icy road.", 1, {{"the icy road", "The crash"}}},
      {"Poor sleep leads to fatigue.", 1, {{"Poor sleep", "fatigue"}}},
      {"The protest gave rise to new laws.", 1, {{"The protest", "new laws"}}},
      {"Sunburn is caused by ultraviolet light.", 1, {{"ultraviolet light", "Sunburn"}}},
      {"The meeting started at noon.", 0, {}},
      {"She bought apples and pears at the market.", 0, {}},
      {"The river flows north through the valley.", 0, {}},
      {"He reads the paper every morning.", 0, {}},
      {"The museum opens on Tuesdays.", 0, {}},
      {"Our office is next to the station.", 0, {}},
      {"The report was published in May.", 0, {}},
      {"Cats and dogs were seen in the park.", 0, {}},
      {"The team wore blue shirts.", 0, {}},
      {"A concert was held after the game.", 0, {}},
      {"The library has three floors.", 0, {}},
      {"Prices were listed due to a new rule on labels.", 0, {}},
      {"The garden was planted in spring.", 0, {}},
  };
  return items;
}

const std::vector<Item>& extract_items() {
  static const std::vector<Item> items{
      {"The flooding was caused by heavy rain.", 1, {{"heavy rain", "The flooding"}}},
      {"Paralysis or convulsions are caused by hormone deficiencies and imbalances.",
       1,
       {{"hormone deficiencies and imbalances", "Paralysis"}, {"hormone deficiencies and imbalances", "convulsions"}}},
      {"Information about the foodborne illness caused by salmonella bacteria.",
       1,
       {{"salmonella bacteria", "the foodborne illness"}}},
      {"The liver injury was induced by troglitazone.", 1, {{"troglitazone", "The liver injury"}}},
      {"Smoking and pollution lead to asthma.", 1, {{"Smoking", "asthma"}, {"pollution", "asthma"}}},
      {"The blackout was caused by a storm.", 1, {{"a storm", "The blackout"}}},
      {"Delays resulted in higher costs.", 1, {{"Delays", "higher costs"}}},
      {"The fire was triggered by a spark.", 1, {{"a spark", "The fire"}}},
      {"Stress leads to headaches and fever.", 1, {{"Stress", "headaches"}, {"Stress", "fever"}}},
      {"The patient died due to mishandling of weapons.", 1, {{"mishandling of weapons", "The patient died"}}},
  };
  return items;
}

void write_items(const fs::path& path, const std::string& source, const std::vector<Item>& items) {
  std::ofstream out(path);
  std::size_t n = 0;
  for (const auto& it : items) {
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (const auto& p : it.pairs) pairs.push_back({{"cause", p.cause}, {"effect", p.effect}});
    nlohmann::ordered_json j;
    j["id"] = cr::make_sentence_id(source, n++);
    j["text"] = it.text;
    j["label"] = it.label;
    j["pairs"] = pairs;
    j["source"] = source;
    out << j.dump() << '\n';
  }
}

std::map<std::string, const Item*> gold_by_text() {
  std::map<std::string, const Item*> m;
  for (const auto& it : detect_items()) m.emplace(cr::text::collapse_whitespace(it.text), &it);
  for (const auto& it : extract_items()) m.emplace(cr::text::collapse_whitespace(it.text), &it);
  return m;
}

std::string model_reply(const cr::CompletionRequest& req, const cr::PromptCatalog& catalog) {
  static const auto gold = gold_by_text();
  const std::string sentence = cr::testing::sentence_from_prompt(req.user_text);
  if (req.system_text == catalog.block("connective.system")) return cr::testing::scripted_connective_reply(sentence);

  const std::uint64_t h = cr::text::fnv1a64(req.user_text);
  const Item& item = *gold.at(sentence);
  if (req.system_text == catalog.block("detection.system")) {
    if (h % 13 == 0) return "I am not sure.";
    const bool wrong = h % 5 == 0;
    return std::to_string(wrong ? 1 - item.label : item.label);
  }
  if (h % 11 == 0) return "The sentence does not contain a clear pair.";
  std::string reply;
  for (std::size_t i = 0; i < item.pairs.size(); ++i) {
    const auto& p = item.pairs[i];
    std::string cause = p.cause;
    std::string effect = p.effect;
    if ((h >> 8) % 3 == 0 && cr::text::to_lower(effect).rfind("the ", 0) == 0) effect = effect.substr(4);  // article drop
    if ((h >> 12) % 5 == 0 && i + 1 == item.pairs.size() && i > 0) break;          // misses the last pair
    if ((h >> 16) % 3 == 0) effect = "a " + effect;                                 // still contains gold
    reply += "<cause>" + cause + "</cause> <effect>" + effect + "</effect>\n";
  }
  return reply;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture <out-dir>\n";
    return 1;
  }
  const fs::path dir = argv[1];
  fs::create_directories(dir);
  for (const char* f : {"db_transcript.jsonl", "transcript.jsonl"}) fs::remove(dir / f);
  const cr::PromptCatalog catalog = cr::PromptCatalog::builtin();
  const std::string model = "fixture-model";
  constexpr std::uint64_t kSeed = 7;

  // Training corpus and repository.
  const auto train = cr::testing::synthetic_training_corpus();
  {
    std::ofstream out(dir / "train.jsonl");
    cr::DatasetSplit split;
    split.name = "train";
    for (const auto& s : train) split.instances.push_back({s, 1});
    cr::write_canonical_jsonl(split, out);
  }
  cr::ScriptedTransport connective_model([&](const cr::CompletionRequest& r) { return model_reply(r, catalog); });
  {
    cr::Transcript t(dir / "db_transcript.jsonl");
    cr::LlmGateway llm(cr::Backend::record, &connective_model, &t);
    cr::BuildOptions opts;
    opts.seed = kSeed;
    opts.model_id = model;
    cr::save_repository(cr::build_repository(train, llm, catalog, opts), dir / "db.jsonl");
  }

  write_items(dir / "detect.jsonl", "det", detect_items());
  write_items(dir / "extract.jsonl", "ext", extract_items());

  // Record every strategy for both tasks.
  const cr::Repository repo = cr::load_repository(dir / "db.jsonl");
  cr::LocalHashEmbedder embedder;
  cr::EmbeddingCache cache;
  const cr::RecordEmbeddings embeddings = cr::embed_repository(repo, embedder, cache);
  cr::Transcript transcript(dir / "transcript.jsonl");
  cr::ScriptedTransport eval_model([&](const cr::CompletionRequest& r) { return model_reply(r, catalog); });
  cr::LlmGateway llm(cr::Backend::record, &eval_model, &transcript);
  cr::InputConnectiveCache connectives;
  cr::RunServices svc{&llm, &catalog, &repo, &embeddings, &embedder, &cache, &connectives};

  nlohmann::ordered_json pinned;
  for (cr::Task task : {cr::Task::detect, cr::Task::extract}) {
    const auto split = cr::load_dataset(dir / (task == cr::Task::detect ? "detect.jsonl" : "extract.jsonl"),
                                        cr::DatasetFormat::jsonl);
    const auto instances = cr::task_instances(split.instances, task);
    for (cr::StrategyKind s : {cr::StrategyKind::zeroshot, cr::StrategyKind::random, cr::StrategyKind::knn,
                               cr::StrategyKind::pattern, cr::StrategyKind::knn_pattern}) {
      cr::ExperimentConfig cfg;
      cfg.task = task;
      cfg.strategy = s;
      cfg.retrieval.k = 4;
      cfg.retrieval.seed = kSeed;
      cfg.model_id = model;
      cfg.backend = cr::Backend::record;
      cfg.transcript = "transcript.jsonl";
      cfg.concurrency = 1;
      const auto preds = cr::run_predictions(instances, cfg, svc);
      const auto summary = cr::score_predictions(instances, preds, cfg);
      nlohmann::ordered_json entry = summary.metrics;
      entry["parse_failures"] = summary.parse_failures;
      entry["examples_max"] = summary.max_example_count;
      entry["fallback_count"] = summary.fallback_count;
      pinned[std::string(cr::to_string(task))][std::string(cr::to_string(s))] = entry;
    }
  }
  std::ofstream(dir / "pinned_metrics.json") << pinned.dump(2) << '\n';
  std::cout << "transcript entries: " << transcript.size() << '\n' << pinned.dump(2) << '\n';
  return 0;
}
