#include "nmar/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "nmar/random.hpp"

namespace nmar {

using nlohmann::json;

std::vector<SentenceEncoding<double>> encode_bag(const Bag& bag, const EncoderParams<double>& params,
                                                 const std::vector<Vector<double>>* fixed) {
  std::vector<SentenceEncoding<double>> out;
  out.reserve(bag.sentences.size());
  if (fixed) {
    if (fixed->size() != bag.sentences.size())
      throw std::invalid_argument("fixed vectors do not cover bag " + bag.pair_id);
    for (const auto& v : *fixed) out.push_back({v, {}});
    return out;
  }
  for (const auto& s : bag.sentences) out.push_back(encode(s, params));
  return out;
}

MentionPrediction predict_from_scores(const Eigen::Ref<const Vector<double>>& scores, int bag, int sentence) {
  const int na = static_cast<int>(scores.size()) - 1;
  int best = na;
  for (int r = 0; r < na; ++r)
    if (scores[r] > scores[best]) best = r;
  return {bag, sentence, best, scores[best] - scores[na]};
}

std::vector<MentionPrediction> predict_mentions(const Corpus& corpus, const EncoderParams<double>& params,
                                                const FixedVectors* fixed) {
  if (params.theta.rows() != corpus.num_relations() + 1)
    throw std::invalid_argument("model has " + std::to_string(params.theta.rows() - 1) + " relations, corpus has " +
                                std::to_string(corpus.num_relations()));
  std::vector<MentionPrediction> preds;
  for (int b = 0; b < static_cast<int>(corpus.bags.size()); ++b) {
    const auto& bag = corpus.bags[b];
    const auto enc = encode_bag(bag, params, fixed ? &fixed->vectors.at(b) : nullptr);
    const ScoreTable s = score_table<double>(enc, params.theta);
    for (int i = 0; i < bag.size(); ++i) preds.push_back(predict_from_scores(s.row(i).transpose(), b, i));
  }
  return preds;
}

double pr_auc(std::span<const PRPoint> points) {
  if (points.empty()) return 0.0;
  double area = points.front().recall * points.front().precision;
  for (std::size_t k = 1; k < points.size(); ++k)
    area += (points[k].recall - points[k - 1].recall) * (points[k].precision + points[k - 1].precision) / 2;
  return area;
}

PRCurve rank_curve(std::vector<RankedItem> items, int positives) {
  std::stable_sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.bag != b.bag) return a.bag < b.bag;
    return a.index < b.index;
  });
  PRCurve curve;
  curve.positives = positives;
  int tp = 0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    tp += items[k].correct;
    curve.points.push_back({items[k].confidence, static_cast<double>(tp) / static_cast<double>(k + 1),
                            positives > 0 ? static_cast<double>(tp) / positives : 0.0});
  }
  curve.auc = pr_auc(curve.points);
  return curve;
}

namespace {

const std::optional<int>* gold_label(const Corpus& c, const MentionPrediction& p) {
  const auto& bag = c.bags.at(p.bag);
  if (bag.gold.empty()) return nullptr;
  const auto& g = bag.gold.at(p.sentence);
  return g ? &g : nullptr;
}

int gold_positives(const Corpus& c) {
  int n = 0;
  for (const auto& b : c.bags)
    for (const auto& g : b.gold) n += g && *g != c.na();
  return n;
}

void require_gold(const Corpus& c) {
  if (!c.has_gold()) throw std::invalid_argument("no gold mention labels available");
}

}  // namespace

PRCurve sentential_pr(std::span<const MentionPrediction> preds, const Corpus& gold) {
  require_gold(gold);
  std::vector<RankedItem> items;
  for (const auto& p : preds) {
    if (p.relation == gold.na()) continue;
    const auto* g = gold_label(gold, p);
    if (!g) continue;
    items.push_back({p.confidence, **g == p.relation, p.bag, p.sentence});
  }
  return rank_curve(std::move(items), gold_positives(gold));
}

PrecisionAtN p_at_n(std::span<const MentionPrediction> preds, const Corpus& gold, int relation, int n) {
  require_gold(gold);
  std::vector<RankedItem> items;
  for (const auto& p : preds) {
    if (p.relation != relation) continue;
    const auto* g = gold_label(gold, p);
    if (!g) continue;
    items.push_back({p.confidence, **g == p.relation, p.bag, p.sentence});
  }
  const PRCurve curve = rank_curve(std::move(items), 0);
  PrecisionAtN out;
  out.considered = std::min<int>(n, static_cast<int>(curve.points.size()));
  out.truncated = static_cast<int>(curve.points.size()) < n;
  out.precision = out.considered > 0 ? curve.points[out.considered - 1].precision : 0.0;
  return out;
}

PRCurve heldout_pr(std::span<const MentionPrediction> preds, const Corpus& kb) {
  std::unordered_map<long long, RankedItem> props;
  const long long L = kb.num_relations() + 1;
  for (const auto& p : preds) {
    if (p.relation == kb.na()) continue;
    const long long key = p.bag * L + p.relation;
    auto [it, inserted] = props.try_emplace(key, RankedItem{p.confidence, false, p.bag, p.relation});
    if (!inserted) it->second.confidence = std::max(it->second.confidence, p.confidence);
  }
  std::vector<RankedItem> items;
  items.reserve(props.size());
  for (auto& [key, item] : props) {
    item.correct = kb.bags.at(item.bag).observed.at(item.index) != 0;
    items.push_back(item);
  }
  int facts = 0;
  for (const auto& b : kb.bags)
    for (auto d : b.observed) facts += d;
  return rank_curve(std::move(items), facts);
}

KbSplit in_out_kb_split(std::span<const MentionPrediction> preds, const Corpus& gold) {
  require_gold(gold);
  KbSplit split;
  for (const auto& b : gold.bags)
    for (const auto& g : b.gold)
      if (g && *g != gold.na()) (b.observed[*g] ? split.in_gold : split.out_gold)++;

  std::vector<RankedItem> in, out;
  for (const auto& p : preds) {
    if (p.relation == gold.na()) continue;
    const auto* g = gold_label(gold, p);
    if (!g) continue;
    const bool in_kb = gold.bags[p.bag].observed[p.relation] != 0;
    (in_kb ? in : out).push_back({p.confidence, **g == p.relation, p.bag, p.sentence});
  }
  if (split.in_gold > 0) split.in_kb = rank_curve(std::move(in), split.in_gold);
  if (split.out_gold > 0) split.out_kb = rank_curve(std::move(out), split.out_gold);
  return split;
}

namespace {

struct Unit {
  int relation = 0;
  double confidence = 0;
  bool correct = false;
};

// AUC over a multiset of units; a unit drawn c times contributes c ranked entries.
double weighted_auc(const std::vector<Unit>& units, const std::vector<int>& order, const std::vector<int>& weight,
                    int positives) {
  if (positives == 0) return 0.0;
  double area = 0, prev_r = 0, prev_p = 0;
  long k = 0, tp = 0;
  bool first = true;
  for (int u : order) {
    for (int c = 0; c < weight[u]; ++c) {
      ++k;
      tp += units[u].correct;
      const double r = static_cast<double>(tp) / positives;
      const double p = static_cast<double>(tp) / static_cast<double>(k);
      area += first ? r * p : (r - prev_r) * (p + prev_p) / 2;
      first = false;
      prev_r = r;
      prev_p = p;
    }
  }
  return area;
}

struct System {
  std::vector<Unit> units;
  std::vector<int> order;  // ranked non-NA units
};

System make_system(std::span<const MentionPrediction> preds, const Corpus& gold,
                   const std::vector<std::pair<int, int>>& keys, const std::vector<int>& gold_labels) {
  std::unordered_map<long long, const MentionPrediction*> lookup;
  for (const auto& p : preds) lookup[(static_cast<long long>(p.bag) << 32) | p.sentence] = &p;
  System s;
  std::vector<RankedItem> ranked;
  for (std::size_t u = 0; u < keys.size(); ++u) {
    auto it = lookup.find((static_cast<long long>(keys[u].first) << 32) | keys[u].second);
    if (it == lookup.end())
      throw std::invalid_argument("prediction missing for bag " + gold.bags[keys[u].first].pair_id + " sentence " +
                                  std::to_string(keys[u].second));
    const auto& p = *it->second;
    s.units.push_back({p.relation, p.confidence, p.relation != gold.na() && p.relation == gold_labels[u]});
    if (p.relation != gold.na()) ranked.push_back({p.confidence, false, keys[u].first, static_cast<int>(u)});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.index < b.index;  // unit order is (bag, sentence) order
  });
  for (const auto& r : ranked) s.order.push_back(r.index);
  return s;
}

}  // namespace

BootstrapResult paired_bootstrap(std::span<const MentionPrediction> preds_a,
                                 std::span<const MentionPrediction> preds_b, const Corpus& gold, int iterations,
                                 std::uint64_t seed) {
  require_gold(gold);
  if (iterations < 1) throw std::invalid_argument("bootstrap needs at least one iteration");
  std::vector<std::pair<int, int>> keys;
  std::vector<int> labels;
  for (int b = 0; b < static_cast<int>(gold.bags.size()); ++b) {
    const auto& bag = gold.bags[b];
    for (int i = 0; i < static_cast<int>(bag.gold.size()); ++i)
      if (bag.gold[i]) {
        keys.push_back({b, i});
        labels.push_back(*bag.gold[i]);
      }
  }
  const System a = make_system(preds_a, gold, keys, labels);
  const System b = make_system(preds_b, gold, keys, labels);
  const int U = static_cast<int>(keys.size());

  BootstrapResult res;
  res.iterations = iterations;
  {
    std::vector<int> ones(U, 1);
    int pos = 0;
    for (int l : labels) pos += l != gold.na();
    res.auc_a = weighted_auc(a.units, a.order, ones, pos);
    res.auc_b = weighted_auc(b.units, b.order, ones, pos);
  }

  Pcg32 rng(seed);
  std::uniform_int_distribution<int> pick(0, U - 1);
  std::vector<int> weight(U);
  double b_wins = 0;
  for (int it = 0; it < iterations; ++it) {
    std::fill(weight.begin(), weight.end(), 0);
    int pos = 0;
    for (int k = 0; k < U; ++k) {
      const int u = pick(rng);
      ++weight[u];
      pos += labels[u] != gold.na();
    }
    const double auc_a = weighted_auc(a.units, a.order, weight, pos);
    const double auc_b = weighted_auc(b.units, b.order, weight, pos);
    if (auc_b > auc_a) b_wins += 1;
    else if (auc_b == auc_a) b_wins += 0.5;
  }
  res.p_value = b_wins / iterations;
  return res;
}

void write_pr_csv(const PRCurve& curve, const std::filesystem::path& path) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "rank,confidence,precision,recall\n";
  for (std::size_t k = 0; k < curve.points.size(); ++k) {
    const auto& p = curve.points[k];
    ss << k + 1 << ',' << p.confidence << ',' << p.precision << ',' << p.recall << '\n';
  }
  write_file(path, ss.str());
}

void write_predictions(std::span<const MentionPrediction> preds, const Corpus& corpus,
                       const std::filesystem::path& path) {
  std::ostringstream ss;
  for (const auto& p : preds)
    ss << json{{"pair_id", corpus.bags.at(p.bag).pair_id},
               {"sentence", p.sentence},
               {"relation", corpus.relation_name(p.relation)},
               {"confidence", p.confidence}}
              .dump()
       << '\n';
  write_file(path, ss.str());
}

std::vector<MentionPrediction> read_predictions(const std::filesystem::path& path, const Corpus& corpus) {
  std::unordered_map<std::string, int> bag_index;
  std::size_t total = 0;
  for (int b = 0; b < static_cast<int>(corpus.bags.size()); ++b) {
    bag_index[corpus.bags[b].pair_id] = b;
    total += corpus.bags[b].sentences.size();
  }
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions " + path.string());
  std::vector<MentionPrediction> preds;
  std::vector<std::vector<char>> seen(corpus.bags.size());
  for (std::size_t b = 0; b < corpus.bags.size(); ++b) seen[b].assign(corpus.bags[b].sentences.size(), 0);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    try {
      const json j = json::parse(line);
      const auto pair = j.at("pair_id").get<std::string>();
      auto it = bag_index.find(pair);
      if (it == bag_index.end()) throw DataError(where + "pair '" + pair + "' not in the gold corpus");
      MentionPrediction p;
      p.bag = it->second;
      p.sentence = j.at("sentence").get<int>();
      if (p.sentence < 0 || p.sentence >= corpus.bags[p.bag].size())
        throw DataError(where + "sentence index out of range for pair '" + pair + "'");
      if (seen[p.bag][p.sentence]++) throw DataError(where + "duplicate prediction");
      const auto rel = j.at("relation").get<std::string>();
      if (rel == "NA") p.relation = corpus.na();
      else if (auto id = corpus.relation_id(rel)) p.relation = *id;
      else throw DataError(where + "unknown relation '" + rel + "'");
      p.confidence = j.at("confidence").get<double>();
      preds.push_back(p);
    } catch (const json::exception& e) {
      throw DataError(where + e.what());
    }
  }
  if (preds.size() != total)
    throw DataError(path.string() + ": predictions cover " + std::to_string(preds.size()) + " of " +
                    std::to_string(total) + " sentences");
  return preds;
}

}  // namespace nmar
