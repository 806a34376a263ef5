#include "causal_rag/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "causal_rag/error.hpp"
#include "causal_rag/text.hpp"

namespace causal_rag {

namespace {

using ojson = nlohmann::ordered_json;

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

bool compatible(const Triplet& g, const Triplet& p) {
  return g.sentence_id == p.sentence_id && containment_match(g.cause, p.cause) && containment_match(g.effect, p.effect);
}

// Kuhn's augmenting paths on one sentence's compatibility graph.
std::size_t max_matching(const std::vector<std::vector<std::size_t>>& adj, std::size_t right_size) {
  std::vector<std::ptrdiff_t> owner(right_size, -1);
  std::function<bool(std::size_t, std::vector<bool>&)> augment = [&](std::size_t g, std::vector<bool>& seen) {
    for (std::size_t p : adj[g]) {
      if (seen[p]) continue;
      seen[p] = true;
      if (owner[p] < 0 || augment(static_cast<std::size_t>(owner[p]), seen)) {
        owner[p] = static_cast<std::ptrdiff_t>(g);
        return true;
      }
    }
    return false;
  };
  std::size_t matched = 0;
  for (std::size_t g = 0; g < adj.size(); ++g) {
    std::vector<bool> seen(right_size, false);
    if (augment(g, seen)) ++matched;
  }
  return matched;
}

void flatten(const ojson& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& rows) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten(v, key, rows);
    } else if (v.is_number_float()) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
      rows.emplace_back(key, buf);
    } else if (v.is_string()) {
      rows.emplace_back(key, v.get<std::string>());
    } else if (!v.is_array()) {
      rows.emplace_back(key, v.dump());
    }
  }
}

}  // namespace

bool containment_match(std::string_view gold_phrase, std::string_view predicted_phrase) {
  const auto gold = text::phrase_tokens(gold_phrase);
  if (gold.empty()) return false;
  const auto pred = text::phrase_tokens(predicted_phrase);
  return std::search(pred.begin(), pred.end(), gold.begin(), gold.end()) != pred.end();
}

double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

DetectionMetrics detection_metrics(const std::vector<DetectionCase>& cases) {
  if (cases.empty()) throw Error(ErrorKind::EmptyInput, "detection metrics over zero predictions");
  DetectionMetrics m;
  for (const auto& c : cases) {
    if (c.gold != 0 && c.gold != 1) throw Error(ErrorKind::InvalidConfig, "gold label must be 0 or 1");
    int predicted;
    if (c.predicted) {
      if (*c.predicted != 0 && *c.predicted != 1) throw Error(ErrorKind::InvalidConfig, "predicted label must be 0 or 1");
      predicted = *c.predicted;
    } else {
      ++m.unparseable;
      predicted = 1 - c.gold;
    }
    if (predicted == 1) {
      (c.gold == 1 ? m.counts.tp : m.counts.fp)++;
    } else {
      (c.gold == 1 ? m.counts.fn : m.counts.tn)++;
    }
  }
  m.accuracy = ratio(m.counts.tp + m.counts.tn, m.counts.total());
  m.precision = ratio(m.counts.tp, m.counts.tp + m.counts.fp);
  m.recall = ratio(m.counts.tp, m.counts.tp + m.counts.fn);
  m.f1 = ratio(2 * m.counts.tp, 2 * m.counts.tp + m.counts.fp + m.counts.fn);  // 2PR/(P+R)
  return m;
}

DetectionMetrics detection_metrics(const std::vector<std::pair<int, int>>& predicted_gold) {
  std::vector<DetectionCase> cases;
  cases.reserve(predicted_gold.size());
  for (const auto& [p, g] : predicted_gold) cases.push_back({p, g});
  return detection_metrics(cases);
}

SinglePairResult single_pair_accuracy(const std::vector<SinglePairCase>& cases) {
  if (cases.empty()) throw Error(ErrorKind::EmptyInput, "single-pair accuracy over zero sentences");
  SinglePairResult r;
  for (const auto& c : cases) {
    ExtractionOutcome o;
    o.sentence_id = c.sentence_id;
    o.overlap_flag = c.overlap_flag;
    if (c.predicted) {
      o.cause_matched = containment_match(c.gold.cause, c.predicted->cause);
      o.effect_matched = containment_match(c.gold.effect, c.predicted->effect);
    }
    o.success = o.cause_matched && o.effect_matched;
    if (o.success) ++r.successes;
    r.outcomes.push_back(std::move(o));
  }
  r.accuracy = ratio(r.successes, cases.size());
  return r;
}

std::size_t match_triplets(const std::vector<Triplet>& gold, const std::vector<Triplet>& predicted,
                           TripletMatching mode) {
  if (mode == TripletMatching::greedy) {
    std::vector<bool> used(predicted.size(), false);
    std::size_t matched = 0;
    for (const auto& g : gold) {
      for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (!used[i] && compatible(g, predicted[i])) {
          used[i] = true;
          ++matched;
          break;
        }
      }
    }
    return matched;
  }
  std::map<std::string, std::pair<std::vector<const Triplet*>, std::vector<const Triplet*>>> by_sentence;
  for (const auto& g : gold) by_sentence[g.sentence_id].first.push_back(&g);
  for (const auto& p : predicted) by_sentence[p.sentence_id].second.push_back(&p);
  std::size_t matched = 0;
  for (const auto& [id, sides] : by_sentence) {
    const auto& [gs, ps] = sides;
    std::vector<std::vector<std::size_t>> adj(gs.size());
    for (std::size_t i = 0; i < gs.size(); ++i) {
      for (std::size_t j = 0; j < ps.size(); ++j) {
        if (compatible(*gs[i], *ps[j])) adj[i].push_back(j);
      }
    }
    matched += max_matching(adj, ps.size());
  }
  return matched;
}

TripletMetrics triplet_metrics(const std::vector<Triplet>& gold, const std::vector<Triplet>& predicted,
                               TripletMatching mode) {
  TripletMetrics m;
  m.gold_total = gold.size();
  m.predicted_total = predicted.size();
  m.matched = match_triplets(gold, predicted, mode);
  m.precision = ratio(m.matched, m.predicted_total);
  m.recall = ratio(m.matched, m.gold_total);
  m.f1 = ratio(2 * m.matched, m.predicted_total + m.gold_total);
  return m;
}

ojson to_json(const DetectionMetrics& m) {
  ojson j;
  j["accuracy"] = m.accuracy;
  j["f1"] = m.f1;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["tp"] = m.counts.tp;
  j["fp"] = m.counts.fp;
  j["tn"] = m.counts.tn;
  j["fn"] = m.counts.fn;
  j["unparseable"] = m.unparseable;
  return j;
}

ojson to_json(const SinglePairResult& r) {
  ojson j;
  j["accuracy"] = r.accuracy;
  j["successes"] = r.successes;
  j["total"] = r.outcomes.size();
  std::size_t cause = 0;
  std::size_t effect = 0;
  std::size_t overlap = 0;
  for (const auto& o : r.outcomes) {
    cause += o.cause_matched;
    effect += o.effect_matched;
    overlap += o.overlap_flag;
  }
  j["cause_matched"] = cause;
  j["effect_matched"] = effect;
  j["overlap_flagged"] = overlap;
  return j;
}

ojson to_json(const TripletMetrics& m) {
  ojson j;
  j["f1"] = m.f1;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["matched"] = m.matched;
  j["predicted_total"] = m.predicted_total;
  j["gold_total"] = m.gold_total;
  return j;
}

std::string render_table(const ojson& report) {
  std::vector<std::pair<std::string, std::string>> rows;
  flatten(report, "", rows);
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.first.size());
  std::ostringstream out;
  for (const auto& [k, v] : rows) out << k << std::string(width - k.size() + 2, ' ') << v << '\n';
  return out.str();
}

}  // namespace causal_rag
