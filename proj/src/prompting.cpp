#include "causal_rag/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "causal_rag/error.hpp"
#include "causal_rag/text.hpp"

namespace causal_rag {

namespace detail {
extern const std::string_view kBuiltinCatalog;
}

namespace {

std::string substitute(std::string_view tmpl, std::string_view key, std::string_view value) {
  std::string out;
  const std::string needle = "{" + std::string(key) + "}";
  std::size_t cursor = 0;
  for (std::size_t pos = tmpl.find(needle); pos != std::string_view::npos; pos = tmpl.find(needle, cursor)) {
    out.append(tmpl.substr(cursor, pos - cursor));
    out.append(value);
    cursor = pos + needle.size();
  }
  out.append(tmpl.substr(cursor));
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

std::string example_block(const PromptCatalog& catalog, const RetrievalResult& examples, bool extraction) {
  std::vector<std::string> lines;
  lines.push_back(substitute(catalog.block("examples.lead_in"), "count", std::to_string(examples.size())));
  for (const auto& ex : examples.examples) {
    lines.push_back(extraction ? render_extraction_example(ex) : render_detection_example(ex));
  }
  return join(lines, "\n");
}

// Position of the first case-insensitive occurrence of `needle` in tagged
// text that lies outside cause/effect markup, or npos.
std::size_t find_outside_tags(const std::string& tagged, const std::string& needle) {
  if (needle.empty()) return std::string::npos;
  const std::string lower = text::to_lower(tagged);
  const std::string n = text::to_lower(needle);
  for (std::size_t pos = lower.find(n); pos != std::string::npos; pos = lower.find(n, pos + 1)) {
    if (n.find_first_of("<>") != std::string::npos) return std::string::npos;
    if (lower.substr(pos, n.size()).find_first_of("<>") != std::string::npos) continue;
    // Inside a tag iff the last marker before pos opens one.
    auto last = [&](std::string_view a, std::string_view b) {
      const std::size_t x = lower.rfind(a, pos);
      const std::size_t y = lower.rfind(b, pos);
      if (x == std::string::npos) return y == std::string::npos ? -1L : static_cast<long>(y);
      if (y == std::string::npos) return static_cast<long>(x);
      return static_cast<long>(std::max(x, y));
    };
    if (last("<cause>", "<effect>") <= last("</cause>", "</effect>")) return pos;
  }
  return std::string::npos;
}

bool strip_prefix(std::string& s, std::string_view prefix) {
  if (s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0) {
    s.erase(0, prefix.size());
    return true;
  }
  return false;
}

bool strip_suffix(std::string& s, std::string_view suffix) {
  if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
    s.erase(s.size() - suffix.size());
    return true;
  }
  return false;
}

std::string clean_connective_item(std::string item) {
  item = text::trim(item);
  // List bullets: "- x", "* x", "• x", "1. x", "2) x".
  for (std::string_view bullet : {"- ", "* ", "\xE2\x80\xA2 "}) {
    if (strip_prefix(item, bullet)) break;
  }
  std::size_t digits = 0;
  while (digits < item.size() && std::isdigit(static_cast<unsigned char>(item[digits]))) ++digits;
  if (digits > 0 && digits + 1 < item.size() && (item[digits] == '.' || item[digits] == ')') &&
      text::is_space(item[digits + 1])) {
    item.erase(0, digits + 1);
  }
  static constexpr std::string_view kEdge[] = {"\"", "'", "`", ".", ";", ":", "!", "?", "(", ")", "[", "]",
                                               "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99"};
  bool changed = true;
  while (changed) {
    changed = false;
    item = text::trim(item);
    for (auto edge : kEdge) {
      changed |= strip_prefix(item, edge);
      changed |= strip_suffix(item, edge);
    }
  }
  return item;
}

}  // namespace

// ---- catalog -------------------------------------------------------------

PromptCatalog PromptCatalog::parse(std::string_view content) {
  PromptCatalog catalog;
  std::istringstream in{std::string(content)};
  std::string line;
  std::string current;
  std::vector<std::string> body;
  auto flush = [&] {
    if (current.empty()) return;
    while (!body.empty() && text::trim(body.back()).empty()) body.pop_back();
    catalog.blocks_[current] = join(body, "\n");
    body.clear();
  };
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = text::trim(line);
    if (t.size() > 2 && t.front() == '[' && t.back() == ']' && t.find(' ') == std::string::npos) {
      flush();
      current = t.substr(1, t.size() - 2);
      if (catalog.blocks_.count(current)) {
        throw Error(ErrorKind::InvalidConfig, "prompt catalog: duplicate block [" + current + "]");
      }
      continue;
    }
    if (!current.empty()) {
      if (!body.empty() || !t.empty()) body.push_back(line);
      continue;
    }
    if (t.empty() || t.front() == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos || text::trim(t.substr(0, eq)) != "catalog_version") {
      throw Error(ErrorKind::InvalidConfig, "prompt catalog line " + std::to_string(line_no) + ": expected catalog_version");
    }
    catalog.version_ = text::trim(t.substr(eq + 1));
  }
  flush();
  if (catalog.version_.empty()) throw Error(ErrorKind::InvalidConfig, "prompt catalog lacks catalog_version");
  for (std::string_view required : {"connective.system", "connective.user", "detection.system", "detection.task",
                                    "detection.input", "extraction.system", "extraction.task",
                                    "extraction.single_pair", "extraction.input", "examples.lead_in"}) {
    if (!catalog.has(required)) {
      throw Error(ErrorKind::InvalidConfig, "prompt catalog lacks block [" + std::string(required) + "]");
    }
  }
  return catalog;
}

PromptCatalog PromptCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open prompt catalog " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

PromptCatalog PromptCatalog::builtin() { return parse(detail::kBuiltinCatalog); }

std::string_view builtin_catalog_text() { return detail::kBuiltinCatalog; }

const std::string& PromptCatalog::block(std::string_view name) const {
  auto it = blocks_.find(name);
  if (it == blocks_.end()) throw Error(ErrorKind::InvalidConfig, "prompt catalog has no block [" + std::string(name) + "]");
  return it->second;
}

bool PromptCatalog::has(std::string_view name) const { return blocks_.find(name) != blocks_.end(); }

// ---- assembly ------------------------------------------------------------

CompletionRequest AssembledPrompt::to_request(const std::string& model_id, double temperature,
                                              int max_output_tokens) const {
  CompletionRequest req;
  req.system_text = system_text;
  req.user_text = user_text;
  req.model_id = model_id;
  req.temperature = temperature;
  req.max_output_tokens = max_output_tokens;
  req.catalog_version = catalog_version;
  return req;
}

AssembledPrompt connective_prompt(std::string_view sentence, const PromptCatalog& catalog) {
  AssembledPrompt p;
  p.system_text = catalog.block("connective.system");
  p.user_text = substitute(catalog.block("connective.user"), "sentence", text::collapse_whitespace(sentence));
  p.catalog_version = catalog.version();
  return p;
}

AssembledPrompt detection_prompt(std::string_view sentence, const RetrievalResult& examples,
                                 const PromptCatalog& catalog) {
  std::vector<std::string> sections{catalog.block("detection.task")};
  if (!examples.empty()) sections.push_back(example_block(catalog, examples, false));
  sections.push_back(substitute(catalog.block("detection.input"), "sentence", text::collapse_whitespace(sentence)));

  AssembledPrompt p;
  p.system_text = catalog.block("detection.system");
  p.user_text = join(sections, "\n\n");
  p.example_count = examples.size();
  p.strategy = examples.strategy;
  p.catalog_version = catalog.version();
  return p;
}

AssembledPrompt extraction_prompt(std::string_view sentence, const RetrievalResult& examples, bool single_pair,
                                  const PromptCatalog& catalog) {
  std::vector<std::string> sections{catalog.block("extraction.task")};
  if (single_pair) sections.push_back(catalog.block("extraction.single_pair"));
  if (!examples.empty()) sections.push_back(example_block(catalog, examples, true));
  sections.push_back(substitute(catalog.block("extraction.input"), "sentence", text::collapse_whitespace(sentence)));

  AssembledPrompt p;
  p.system_text = catalog.block("extraction.system");
  p.user_text = join(sections, "\n\n");
  p.example_count = examples.size();
  p.strategy = examples.strategy;
  p.catalog_version = catalog.version();
  return p;
}

std::string render_detection_example(const RetrievedExample& example) { return example.record->tagged_text; }

std::string render_answer(const std::vector<CauseEffectPair>& pairs) {
  std::vector<std::string> parts;
  for (const auto& p : pairs) parts.push_back("<cause>" + p.cause + "</cause> <effect>" + p.effect + "</effect>");
  return join(parts, " ");
}

std::string render_extraction_example(const RetrievedExample& example) {
  const ExampleRecord& rec = *example.record;
  std::string connective = example.connective.value_or(rec.connectives.empty() ? "" : rec.connectives.front());
  std::string sentence = rec.tagged_text;
  if (!connective.empty()) {
    const std::size_t pos = find_outside_tags(sentence, connective);
    if (pos != std::string::npos) {
      const std::string original = sentence.substr(pos, connective.size());
      sentence = sentence.substr(0, pos) + "<connective>" + original + "</connective>" +
                 sentence.substr(pos + connective.size());
    } else {
      sentence += " <connective>" + connective + "</connective>";
    }
  }
  return sentence + " => " + render_answer(rec.pairs);
}

// ---- response parsing ----------------------------------------------------

std::vector<std::string> parse_connective_response(std::string_view response) {
  std::vector<std::string> out;
  std::string item;
  auto take = [&] {
    std::string c = normalize_connective(clean_connective_item(item));
    item.clear();
    if (c.empty() || c == "none" || c == "n/a") return;
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(std::move(c));
  };
  for (char ch : response) {
    if (ch == '\n' || ch == ',') {
      take();
    } else {
      item.push_back(ch);
    }
  }
  take();
  return out;
}

DetectionPrediction parse_detection(std::string_view response) {
  const std::string t = text::trim(response);
  auto word = [&](std::size_t i) { return i < t.size() && std::isalnum(static_cast<unsigned char>(t[i])); };
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != '0' && t[i] != '1') continue;
    if ((i > 0 && word(i - 1)) || word(i + 1)) continue;
    return {t[i] == '1' ? 1 : 0, std::string(response)};
  }
  throw Error(ErrorKind::UnparseableResponse, "no standalone 0/1 in detection reply: \"" + t.substr(0, 80) + "\"");
}

bool phrases_overlap(std::string_view a, std::string_view b) {
  const auto ta = text::phrase_tokens(a);
  const auto tb = text::phrase_tokens(b);
  if (ta.empty() || tb.empty()) return false;
  auto contains = [](const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
  };
  if (contains(ta, tb) || contains(tb, ta)) return true;
  // suffix of x equals prefix of y
  auto chained = [](const std::vector<std::string>& x, const std::vector<std::string>& y) {
    for (std::size_t len = 1; len <= std::min(x.size(), y.size()); ++len) {
      if (std::equal(x.end() - static_cast<std::ptrdiff_t>(len), x.end(), y.begin())) return true;
    }
    return false;
  };
  return chained(ta, tb) || chained(tb, ta);
}

ExtractionPrediction parse_extraction(std::string_view response) {
  static const std::regex kSpan(R"(<(cause|effect)>([\s\S]*?)</\1>)", std::regex::icase);
  ExtractionPrediction pred;
  pred.raw_response = std::string(response);
  std::vector<std::string> causes;
  std::vector<std::string> effects;
  const std::string body(response);
  for (auto it = std::sregex_iterator(body.begin(), body.end(), kSpan); it != std::sregex_iterator(); ++it) {
    std::string phrase = text::collapse_whitespace((*it)[2].str());
    if (phrase.empty()) {
      ++pred.unmatched_spans;
      continue;
    }
    (text::to_lower((*it)[1].str()) == "cause" ? causes : effects).push_back(std::move(phrase));
  }
  const std::size_t n = std::min(causes.size(), effects.size());
  for (std::size_t i = 0; i < n; ++i) pred.pairs.push_back({causes[i], effects[i]});
  pred.unmatched_spans += causes.size() + effects.size() - 2 * n;
  if (pred.pairs.empty()) {
    throw Error(ErrorKind::UnparseableResponse, "no complete <cause>/<effect> pair in extraction reply");
  }
  pred.overlap_flag = std::any_of(pred.pairs.begin(), pred.pairs.end(),
                                  [](const CauseEffectPair& p) { return phrases_overlap(p.cause, p.effect); });
  return pred;
}

}  // namespace causal_rag
