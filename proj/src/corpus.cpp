#include "causal_rag/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <regex>
#include <set>
#include <utility>

#include <json.hpp>

#include "causal_rag/error.hpp"
#include "causal_rag/text.hpp"

namespace causal_rag {

namespace {

using json = nlohmann::json;

enum class Role { cause, effect };

struct TagToken {
  std::string_view literal;
  Role role;
  bool open;
};

constexpr TagToken kTags[] = {
    {"<cause>", Role::cause, true},
    {"</cause>", Role::cause, false},
    {"<effect>", Role::effect, true},
    {"</effect>", Role::effect, false},
};

const TagToken* tag_at(std::string_view s, std::size_t pos) {
  for (const auto& t : kTags) {
    if (s.substr(pos, t.literal.size()) == t.literal) return &t;
  }
  return nullptr;
}

struct Span {
  Role role;
  std::string phrase;
};

std::vector<Span> scan_spans(std::string_view line) {
  std::vector<Span> spans;
  std::optional<Role> open;
  std::string content;
  std::size_t i = 0;
  while (i < line.size()) {
    const TagToken* tag = line[i] == '<' ? tag_at(line, i) : nullptr;
    if (!tag) {
      if (open) content.push_back(line[i]);
      ++i;
      continue;
    }
    if (tag->open) {
      if (open) throw Error(ErrorKind::NestedTags, "tag opened inside another tag at byte " + std::to_string(i));
      open = tag->role;
      content.clear();
    } else {
      if (!open || *open != tag->role) {
        throw Error(ErrorKind::UnbalancedTags, "unexpected " + std::string(tag->literal) + " at byte " + std::to_string(i));
      }
      std::string phrase = text::collapse_whitespace(content);
      if (phrase.empty()) {
        throw Error(ErrorKind::EmptyPhrase, std::string(tag->literal) + " encloses only whitespace");
      }
      spans.push_back({tag->role, std::move(phrase)});
      open.reset();
    }
    i += tag->literal.size();
  }
  if (open) throw Error(ErrorKind::UnbalancedTags, "tag opened but never closed");
  return spans;
}

void push_unique(std::vector<CauseEffectPair>& pairs, CauseEffectPair p) {
  if (p.cause == p.effect) {
    throw Error(ErrorKind::UnpairedTags, "cause and effect are the same phrase: \"" + p.cause + "\"");
  }
  if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) pairs.push_back(std::move(p));
}

std::vector<CauseEffectPair> pair_spans(const std::vector<Span>& spans) {
  std::vector<std::string> causes;
  std::vector<std::string> effects;
  for (const auto& s : spans) (s.role == Role::cause ? causes : effects).push_back(s.phrase);

  std::vector<CauseEffectPair> pairs;
  if (causes.empty() && effects.empty()) return pairs;
  if (causes.empty() || effects.empty()) {
    throw Error(ErrorKind::UnpairedTags, "sentence tags only " + std::string(causes.empty() ? "effects" : "causes"));
  }
  if (causes.size() == 1) {
    for (const auto& e : effects) push_unique(pairs, {causes.front(), e});
  } else if (effects.size() == 1) {
    for (const auto& c : causes) push_unique(pairs, {c, effects.front()});
  } else {
    throw Error(ErrorKind::UnpairedTags,
                "several causes and several effects cannot be paired from inline tags; use explicit pairs");
  }
  return pairs;
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& what) {
  throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no) + ": " + what);
}

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

// Leftmost occurrence of `needle` in `hay` not overlapping `taken`, preferring
// word-bounded occurrences.
std::optional<std::size_t> find_free(std::string_view hay, std::string_view needle,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& taken) {
  std::optional<std::size_t> fallback;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) {
    const std::size_t end = pos + needle.size();
    const bool overlaps = std::any_of(taken.begin(), taken.end(),
                                      [&](const auto& r) { return pos < r.second && r.first < end; });
    if (overlaps) continue;
    const bool left_ok = pos == 0 || !is_word_char(static_cast<unsigned char>(hay[pos - 1]));
    const bool right_ok = end == hay.size() || !is_word_char(static_cast<unsigned char>(hay[end]));
    if (left_ok && right_ok) return pos;
    if (!fallback) fallback = pos;
  }
  return fallback;
}

LabeledInstance instance_from(TaggedSentence s) {
  LabeledInstance inst;
  inst.label = s.causal() ? 1 : 0;
  inst.sentence = std::move(s);
  return inst;
}

// ---- SemEval-2010 Task 8 -------------------------------------------------

struct SemevalSentence {
  std::string plain;
  std::string e1;
  std::string e2;
};

SemevalSentence split_semeval_entities(std::string_view s, std::size_t line_no) {
  SemevalSentence out;
  std::string plain;
  std::size_t i = 0;
  std::string* target = nullptr;
  while (i < s.size()) {
    if (s.substr(i, 4) == "<e1>" || s.substr(i, 4) == "<e2>") {
      target = s[i + 2] == '1' ? &out.e1 : &out.e2;
      i += 4;
      continue;
    }
    if (s.substr(i, 5) == "</e1>" || s.substr(i, 5) == "</e2>") {
      target = nullptr;
      i += 5;
      continue;
    }
    plain.push_back(s[i]);
    if (target) target->push_back(s[i]);
    ++i;
  }
  out.plain = text::collapse_whitespace(plain);
  out.e1 = text::collapse_whitespace(out.e1);
  out.e2 = text::collapse_whitespace(out.e2);
  if (out.e1.empty() || out.e2.empty()) malformed(line_no, "SemEval sentence lacks <e1>/<e2> markup");
  return out;
}

std::vector<LabeledInstance> read_semeval(std::istream& in, const std::string& source) {
  static const std::regex kHeader(R"(^\s*\d+\s+\"(.*)\"\s*$)");
  static const std::regex kRelation(R"(^\s*([A-Za-z-]+)(\((e[12]),(e[12])\))?\s*$)");
  std::vector<LabeledInstance> out;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::pair<SemevalSentence, std::size_t>> pending;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = text::trim(line);
    if (t.empty() || t.rfind("Comment", 0) == 0) continue;
    std::smatch m;
    if (!pending) {
      if (!std::regex_match(t, m, kHeader)) malformed(line_no, "expected `<id>\\t\"sentence\"`");
      pending.emplace(split_semeval_entities(m[1].str(), line_no), line_no);
      continue;
    }
    if (!std::regex_match(t, m, kRelation)) malformed(line_no, "expected relation label");
    const auto& ent = pending->first;
    std::vector<CauseEffectPair> pairs;
    if (m[1].str() == "Cause-Effect") {
      if (!m[2].matched) malformed(line_no, "Cause-Effect without direction");
      const bool forward = m[3].str() == "e1";
      pairs.push_back(forward ? CauseEffectPair{ent.e1, ent.e2} : CauseEffectPair{ent.e2, ent.e1});
    }
    try {
      out.push_back(instance_from(make_sentence(make_sentence_id(source, out.size()), ent.plain, std::move(pairs), source)));
    } catch (const Error& e) {
      malformed(pending->second, e.what());
    }
    pending.reset();
  }
  if (pending) malformed(pending->second, "sentence without relation line");
  return out;
}

// ---- ADE corpus (DRUG-AE.rel / ADE-NEG.txt) ------------------------------

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<LabeledInstance> read_ade(std::istream& in, const std::string& source) {
  static const std::regex kNeg(R"(^\s*(\d+)\s+NEG\s+(.*\S)\s*$)");
  struct Pending {
    std::string text;
    std::vector<CauseEffectPair> pairs;
    std::size_t line_no;
  };
  std::vector<Pending> records;
  std::map<std::pair<std::string, std::string>, std::size_t> by_key;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    std::smatch m;
    if (std::regex_match(line, m, kNeg)) {
      records.push_back({text::collapse_whitespace(m[2].str()), {}, line_no});
      continue;
    }
    auto fields = split_on(line, '|');
    if (fields.size() < 8) malformed(line_no, "expected 8 '|' separated fields");
    // Sentence may itself contain '|': everything between the id and the last six fields.
    std::string sentence;
    for (std::size_t i = 1; i + 6 < fields.size(); ++i) sentence += (i > 1 ? "|" : "") + fields[i];
    const std::string& effect = fields[fields.size() - 6];
    const std::string& drug = fields[fields.size() - 3];
    const auto key = std::make_pair(fields[0], text::collapse_whitespace(sentence));
    auto [it, inserted] = by_key.emplace(key, records.size());
    if (inserted) records.push_back({key.second, {}, line_no});
    CauseEffectPair p{text::collapse_whitespace(drug), text::collapse_whitespace(effect)};
    auto& pairs = records[it->second].pairs;
    if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) pairs.push_back(std::move(p));
  }
  std::vector<LabeledInstance> out;
  for (auto& r : records) {
    try {
      out.push_back(instance_from(make_sentence(make_sentence_id(source, out.size()), r.text, std::move(r.pairs), source)));
    } catch (const Error& e) {
      malformed(r.line_no, e.what());
    }
  }
  return out;
}

// ---- li format: inline tags, optional explicit pair list -----------------
//   tagged sentence [TAB cause => effect || cause => effect ...]

std::vector<LabeledInstance> read_li(std::istream& in, const std::string& source) {
  std::vector<LabeledInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::size_t tab = line.find('\t');
    try {
      const std::string id = make_sentence_id(source, out.size());
      if (tab == std::string::npos) {
        out.push_back(instance_from(parse_tagged_sentence(line, source, out.size())));
        continue;
      }
      const std::string tagged = line.substr(0, tab);
      scan_spans(tagged);  // markup must still be well formed
      std::vector<CauseEffectPair> pairs;
      for (const auto& item : split_on(std::string_view(line).substr(tab + 1), '|')) {
        if (text::trim(item).empty()) continue;
        const std::size_t arrow = item.find("=>");
        if (arrow == std::string::npos) malformed(line_no, "pair without '=>': " + item);
        push_unique(pairs, {text::collapse_whitespace(item.substr(0, arrow)),
                            text::collapse_whitespace(item.substr(arrow + 2))});
      }
      TaggedSentence s = make_sentence(id, strip_tags(tagged), std::move(pairs), source);
      s.tagged_text = text::collapse_whitespace(tagged);
      out.push_back(instance_from(std::move(s)));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::MalformedRecord) throw;
      malformed(line_no, e.what());
    }
  }
  return out;
}

// ---- canonical JSONL -----------------------------------------------------

std::vector<LabeledInstance> read_jsonl(std::istream& in, const std::string& default_source) {
  std::vector<LabeledInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) malformed(line_no, "not a JSON object");
    if (!j.contains("text") || !j["text"].is_string()) malformed(line_no, "missing string field `text`");
    if (!j.contains("label") || !j["label"].is_number_integer()) malformed(line_no, "missing integer field `label`");
    const int label = j["label"].get<int>();
    if (label != 0 && label != 1) malformed(line_no, "label must be 0 or 1");
    const std::string source = j.contains("source") && j["source"].is_string() ? j["source"].get<std::string>() : default_source;
    std::string id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : make_sentence_id(source, out.size());
    std::vector<CauseEffectPair> pairs;
    if (j.contains("pairs")) {
      if (!j["pairs"].is_array()) malformed(line_no, "`pairs` must be an array");
      for (const auto& p : j["pairs"]) {
        if (!p.is_object() || !p.contains("cause") || !p.contains("effect") || !p["cause"].is_string() ||
            !p["effect"].is_string()) {
          malformed(line_no, "pair must be {\"cause\": string, \"effect\": string}");
        }
        try {
          push_unique(pairs, {text::collapse_whitespace(p["cause"].get<std::string>()),
                              text::collapse_whitespace(p["effect"].get<std::string>())});
        } catch (const Error& e) {
          malformed(line_no, e.what());
        }
      }
    }
    if (label == 1 && pairs.empty()) malformed(line_no, "causal record needs at least one pair");
    if (label == 0 && !pairs.empty()) malformed(line_no, "non-causal record must not carry pairs");
    try {
      out.push_back(instance_from(make_sentence(std::move(id), j["text"].get<std::string>(), std::move(pairs), source)));
    } catch (const Error& e) {
      malformed(line_no, e.what());
    }
  }
  return out;
}

}  // namespace

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "semeval") return DatasetFormat::semeval;
  if (name == "ade") return DatasetFormat::ade;
  if (name == "li") return DatasetFormat::li;
  if (name == "jsonl") return DatasetFormat::jsonl;
  throw Error(ErrorKind::UnknownFormat, "unknown dataset format `" + std::string(name) + "`");
}

std::string_view to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::semeval: return "semeval";
    case DatasetFormat::ade: return "ade";
    case DatasetFormat::li: return "li";
    case DatasetFormat::jsonl: return "jsonl";
  }
  return "?";
}

std::string make_sentence_id(std::string_view source, std::size_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-%06zu", ordinal);
  return std::string(source) + buf;
}

std::string strip_tags(std::string_view tagged_text) {
  std::string out;
  out.reserve(tagged_text.size());
  std::size_t i = 0;
  while (i < tagged_text.size()) {
    if (tagged_text[i] == '<') {
      if (const TagToken* t = tag_at(tagged_text, i)) {
        i += t->literal.size();
        continue;
      }
    }
    out.push_back(tagged_text[i++]);
  }
  return text::collapse_whitespace(out);
}

TaggedSentence parse_tagged_sentence(std::string_view line, std::string_view source, std::size_t ordinal) {
  TaggedSentence s;
  s.id = make_sentence_id(source, ordinal);
  s.source = std::string(source);
  s.pairs = pair_spans(scan_spans(line));
  s.raw_text = strip_tags(line);
  s.tagged_text = text::collapse_whitespace(line);
  return s;
}

std::string render_tagged(std::string_view raw_text, const std::vector<CauseEffectPair>& pairs) {
  struct Insert {
    std::size_t begin;
    std::size_t end;
    Role role;
  };
  std::vector<Insert> inserts;
  std::vector<std::pair<std::size_t, std::size_t>> taken;
  std::set<std::pair<Role, std::string>> done;
  auto place = [&](const std::string& phrase, Role role) {
    if (phrase.empty() || !done.emplace(role, phrase).second) return;
    if (auto pos = find_free(raw_text, phrase, taken)) {
      inserts.push_back({*pos, *pos + phrase.size(), role});
      taken.emplace_back(*pos, *pos + phrase.size());
    }
  };
  for (const auto& p : pairs) {
    place(p.cause, Role::cause);
    place(p.effect, Role::effect);
  }
  std::sort(inserts.begin(), inserts.end(), [](const Insert& a, const Insert& b) { return a.begin < b.begin; });
  std::string out;
  std::size_t cursor = 0;
  for (const auto& ins : inserts) {
    const char* name = ins.role == Role::cause ? "cause" : "effect";
    out.append(raw_text.substr(cursor, ins.begin - cursor));
    out.append("<").append(name).append(">");
    out.append(raw_text.substr(ins.begin, ins.end - ins.begin));
    out.append("</").append(name).append(">");
    cursor = ins.end;
  }
  out.append(raw_text.substr(cursor));
  return out;
}

TaggedSentence make_sentence(std::string id, std::string_view text_in, std::vector<CauseEffectPair> pairs,
                             std::string source) {
  TaggedSentence s;
  s.id = std::move(id);
  s.source = std::move(source);
  s.raw_text = text::collapse_whitespace(text_in);
  if (s.raw_text.empty()) throw Error(ErrorKind::MalformedRecord, "empty sentence text");
  for (auto& p : pairs) {
    p.cause = text::collapse_whitespace(p.cause);
    p.effect = text::collapse_whitespace(p.effect);
    if (p.cause.empty() || p.effect.empty()) throw Error(ErrorKind::MalformedRecord, "empty cause or effect phrase");
    if (p.cause == p.effect) throw Error(ErrorKind::MalformedRecord, "cause equals effect: \"" + p.cause + "\"");
    for (const auto* phrase : {&p.cause, &p.effect}) {
      if (s.raw_text.find(*phrase) == std::string::npos) {
        throw Error(ErrorKind::MalformedRecord, "phrase \"" + *phrase + "\" does not occur in the sentence");
      }
    }
  }
  s.pairs = std::move(pairs);
  s.tagged_text = render_tagged(s.raw_text, s.pairs);
  return s;
}

SplitCounts count_instances(const std::vector<LabeledInstance>& instances) {
  SplitCounts c;
  c.total = instances.size();
  for (const auto& i : instances) (i.label == 1 ? c.causal : c.non_causal)++;
  return c;
}

DatasetSplit read_dataset(std::istream& in, DatasetFormat format, std::string_view name) {
  const std::string source(name);
  DatasetSplit split;
  split.name = source;
  switch (format) {
    case DatasetFormat::semeval: split.instances = read_semeval(in, source); break;
    case DatasetFormat::ade: split.instances = read_ade(in, source); break;
    case DatasetFormat::li: split.instances = read_li(in, source); break;
    case DatasetFormat::jsonl: split.instances = read_jsonl(in, source); break;
  }
  if (split.instances.empty()) throw Error(ErrorKind::EmptyDataset, "dataset `" + source + "` has no records");
  std::set<std::string_view> ids;
  for (const auto& inst : split.instances) {
    if (!ids.insert(inst.sentence.id).second) {
      throw Error(ErrorKind::MalformedRecord, "duplicate sentence id `" + inst.sentence.id + "`");
    }
  }
  split.counts = count_instances(split.instances);
  return split;
}

DatasetSplit load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return read_dataset(in, format, path.stem().string());
}

void write_canonical_jsonl(const DatasetSplit& split, std::ostream& out) {
  for (const auto& inst : split.instances) {
    json pairs = json::array();
    for (const auto& p : inst.sentence.pairs) pairs.push_back({{"cause", p.cause}, {"effect", p.effect}});
    json j = {{"id", inst.sentence.id},
              {"text", inst.sentence.raw_text},
              {"label", inst.label},
              {"pairs", std::move(pairs)},
              {"source", inst.sentence.source}};
    out << j.dump() << '\n';
  }
}

DatasetSummary dataset_stats(const DatasetSplit& split) {
  DatasetSummary s;
  s.counts = count_instances(split.instances);
  for (const auto& inst : split.instances) {
    if (!inst.sentence.causal()) continue;
    s.pairs_histogram[inst.sentence.pairs.size()]++;
    s.triplet_count += inst.sentence.pairs.size();
  }
  return s;
}

std::vector<Triplet> gold_triplets(const DatasetSplit& split) {
  std::vector<Triplet> out;
  for (const auto& inst : split.instances) {
    for (const auto& p : inst.sentence.pairs) out.push_back({inst.sentence.id, p.cause, p.effect});
  }
  return out;
}

}  // namespace causal_rag
