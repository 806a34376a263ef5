#include "causal_rag/repository.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <unistd.h>

#include <json.hpp>

#include "causal_rag/error.hpp"
#include "causal_rag/llm_gateway.hpp"
#include "causal_rag/parallel.hpp"
#include "causal_rag/prompting.hpp"
#include "causal_rag/rng.hpp"
#include "causal_rag/text.hpp"

namespace causal_rag {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void corrupt(const std::filesystem::path& path, std::size_t line_no, const std::string& what) {
  throw Error(ErrorKind::CorruptRecord, path.string() + " line " + std::to_string(line_no) + ": " + what);
}

bool is_string_array(const ojson& j) {
  return j.is_array() && std::all_of(j.begin(), j.end(), [](const ojson& v) { return v.is_string(); });
}

}  // namespace

const ExampleRecord* Repository::find(const std::string& id) const {
  auto it = std::lower_bound(records.begin(), records.end(), id,
                             [](const ExampleRecord& r, const std::string& key) { return r.id < key; });
  if (it == records.end() || it->id != id) return nullptr;
  return &*it;
}

std::string normalize_connective(std::string_view connective) { return text::normalize(connective); }

std::vector<std::string> extract_connectives(const TaggedSentence& sentence, LlmGateway& llm,
                                             const PromptCatalog& catalog, const std::string& model_id) {
  const CompletionRequest req = connective_prompt(sentence.raw_text, catalog).to_request(model_id);
  std::string reply;
  try {
    reply = llm.complete(req).text;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyCompletion) throw;
  }
  auto connectives = parse_connective_response(reply);
  if (connectives.empty()) {
    throw Error(ErrorKind::UnparseableResponse, "no connective in reply for " + sentence.id);
  }
  return connectives;
}

ConnectiveIndex build_index(const std::vector<ExampleRecord>& records, std::size_t cap, std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> candidates;
  for (const auto& r : records) {
    for (const auto& c : r.connectives) {
      auto& ids = candidates[c];
      if (ids.empty() || ids.back() != r.id) ids.push_back(r.id);
    }
  }
  ConnectiveIndex index;
  for (auto& [key, ids] : candidates) {
    std::sort(ids.begin(), ids.end());
    SeededRng rng(seed, key);
    auto chosen = rng.sample(ids, cap);
    // Lists are kept in id order so that rebuilding from a saved repository,
    // whose candidates are exactly the chosen ids, gives the same lists.
    std::sort(chosen.begin(), chosen.end());
    if (!chosen.empty()) index.emplace(key, std::move(chosen));
  }
  return index;
}

Repository assemble_repository(std::vector<ExampleRecord> records, std::size_t cap, std::uint64_t seed) {
  if (cap == 0) throw Error(ErrorKind::InvalidConfig, "cap must be at least 1");
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].id == records[i - 1].id) throw Error(ErrorKind::InvalidConfig, "duplicate record id " + records[i].id);
  }
  const ConnectiveIndex sampled = build_index(records, cap, seed);

  // Keep, per record, only the keys it was sampled under; records sampled
  // under no key are not stored. Every stored record is then reachable from
  // the index, and the index can be rebuilt from the stored connectives.
  std::map<std::string, std::set<std::string>> kept_keys;
  for (const auto& [key, ids] : sampled) {
    for (const auto& id : ids) kept_keys[id].insert(key);
  }
  Repository repo;
  repo.cap = cap;
  repo.seed = seed;
  for (auto& r : records) {
    auto it = kept_keys.find(r.id);
    if (it == kept_keys.end()) continue;
    std::erase_if(r.connectives, [&](const std::string& c) { return !it->second.count(c); });
    repo.records.push_back(std::move(r));
  }
  repo.index = build_index(repo.records, cap, seed);
  return repo;
}

Repository build_repository(const std::vector<TaggedSentence>& corpus, LlmGateway& llm, const PromptCatalog& catalog,
                            const BuildOptions& options, BuildReport* report) {
  if (corpus.empty()) throw Error(ErrorKind::EmptyInput, "cannot build a repository from an empty corpus");
  for (const auto& s : corpus) {
    if (!s.causal()) throw Error(ErrorKind::InvalidConfig, "repository input " + s.id + " is not causal");
  }
  std::vector<std::optional<std::vector<std::string>>> extracted(corpus.size());
  parallel_for(corpus.size(), options.concurrency, [&](std::size_t i) {
    try {
      extracted[i] = extract_connectives(corpus[i], llm, catalog, options.model_id);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::UnparseableResponse) throw;
    }
  });

  BuildReport local;
  std::vector<ExampleRecord> records;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const TaggedSentence& s = corpus[i];
    if (!extracted[i]) {
      local.skipped_ids.push_back(s.id);
      continue;
    }
    ExampleRecord r{s.id, s.raw_text, s.tagged_text, s.pairs, std::move(*extracted[i]), s.source, false};
    records.push_back(std::move(r));
  }
  std::sort(local.skipped_ids.begin(), local.skipped_ids.end());
  for (const auto& id : local.skipped_ids) std::cerr << "warning: no connective extracted for " << id << ", skipped\n";

  Repository repo = assemble_repository(std::move(records), options.cap, options.seed);
  for (auto& r : repo.records) {
    r.connective_unverified = std::any_of(r.connectives.begin(), r.connectives.end(),
                                          [&](const std::string& c) { return !text::contains_normalized(r.raw_text, c); });
    if (r.connective_unverified) ++local.unverified;
  }
  if (report) *report = std::move(local);
  return repo;
}

RepositoryStats repository_stats(const Repository& repo) {
  RepositoryStats s;
  s.total_records = repo.records.size();
  s.unique_connectives = repo.index.size();
  for (const auto& [key, ids] : repo.index) {
    s.frequency_histogram[ids.size()]++;
    s.index_entries += ids.size();
    if (ids.size() >= 5) ++s.connectives_with_at_least_5;
  }
  return s;
}

void save_repository(const Repository& repo, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    ojson header;
    header["schema_version"] = kRepositorySchemaVersion;
    header["cap"] = repo.cap;
    header["seed"] = repo.seed;
    out << header.dump() << '\n';
    for (const auto& r : repo.records) {
      ojson j;
      j["id"] = r.id;
      j["text"] = r.raw_text;
      j["tagged_text"] = r.tagged_text;
      j["pairs"] = ojson::array();
      for (const auto& p : r.pairs) j["pairs"].push_back({{"cause", p.cause}, {"effect", p.effect}});
      j["connectives"] = r.connectives;
      j["source"] = r.source;
      if (r.connective_unverified) j["connective_unverified"] = true;
      out << j.dump() << '\n';
    }
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error(ErrorKind::IoError, "failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorKind::IoError, "cannot move repository into place at " + path.string() + ": " + ec.message());
  }
}

Repository load_repository(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open repository " + path.string());
  std::string line;
  if (!std::getline(in, line)) corrupt(path, 1, "missing header");
  const ojson header = ojson::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object() || !header.contains("schema_version") ||
      !header["schema_version"].is_number_integer()) {
    corrupt(path, 1, "header lacks schema_version");
  }
  if (header["schema_version"].get<int>() != kRepositorySchemaVersion) {
    throw Error(ErrorKind::SchemaVersionMismatch, path.string() + ": schema_version " +
                                                      std::to_string(header["schema_version"].get<long long>()) +
                                                      ", expected " + std::to_string(kRepositorySchemaVersion));
  }
  if (!header.contains("cap") || !header["cap"].is_number_unsigned() || header["cap"].get<std::size_t>() == 0 ||
      !header.contains("seed") || !header["seed"].is_number_integer()) {
    corrupt(path, 1, "header needs positive `cap` and integer `seed`");
  }
  const auto cap = header["cap"].get<std::size_t>();
  const auto seed = header["seed"].get<std::uint64_t>();

  std::vector<ExampleRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) corrupt(path, line_no, "not a JSON object");
    for (const char* field : {"id", "text", "tagged_text", "source"}) {
      if (!j.contains(field) || !j[field].is_string()) corrupt(path, line_no, std::string("missing string field `") + field + "`");
    }
    if (!j.contains("connectives") || !is_string_array(j["connectives"]) || j["connectives"].empty()) {
      corrupt(path, line_no, "`connectives` must be a non-empty string array");
    }
    if (!j.contains("pairs") || !j["pairs"].is_array() || j["pairs"].empty()) corrupt(path, line_no, "`pairs` must be a non-empty array");
    ExampleRecord r;
    r.id = j["id"].get<std::string>();
    r.raw_text = j["text"].get<std::string>();
    r.tagged_text = j["tagged_text"].get<std::string>();
    r.source = j["source"].get<std::string>();
    r.connectives = j["connectives"].get<std::vector<std::string>>();
    for (const auto& p : j["pairs"]) {
      if (!p.is_object() || !p.contains("cause") || !p.contains("effect") || !p["cause"].is_string() || !p["effect"].is_string()) {
        corrupt(path, line_no, "malformed pair");
      }
      r.pairs.push_back({p["cause"].get<std::string>(), p["effect"].get<std::string>()});
    }
    if (j.contains("connective_unverified")) {
      if (!j["connective_unverified"].is_boolean()) corrupt(path, line_no, "`connective_unverified` must be boolean");
      r.connective_unverified = j["connective_unverified"].get<bool>();
    }
    if (!records.empty() && records.back().id >= r.id) corrupt(path, line_no, "record ids must be strictly increasing");
    records.push_back(std::move(r));
  }

  Repository repo;
  repo.cap = cap;
  repo.seed = seed;
  repo.records = std::move(records);
  repo.index = build_index(repo.records, cap, seed);
  return repo;
}

}  // namespace causal_rag
