#include "nmar/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "nmar/random.hpp"

namespace nmar {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Vocabulary / Corpus

Vocabulary::Vocabulary() { add(kUnkToken); }

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  if (words.empty() || words.front() != kUnkToken)
    throw DataError("vocabulary must start with the UNK token");
  for (const auto& w : words)
    if (index_.count(w)) throw DataError("duplicate vocabulary entry '" + w + "'");
    else add(w);
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.emplace(token, size());
  if (inserted) words_.push_back(token);
  return it->second;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::optional<int> Corpus::relation_id(const std::string& name) const {
  auto it = std::find(relation_names.begin(), relation_names.end(), name);
  if (it == relation_names.end()) return std::nullopt;
  return static_cast<int>(it - relation_names.begin());
}

std::string Corpus::relation_name(int id) const {
  if (id == na()) return "NA";
  return relation_names.at(id);
}

bool Corpus::has_gold() const {
  return std::any_of(bags.begin(), bags.end(), [](const Bag& b) { return b.has_gold(); });
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << contents;
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

class CorpusReader {
 public:
  CorpusReader(const CorpusSchema* schema, std::string source) : source_(std::move(source)) {
    if (schema) {
      corpus_.relation_names = schema->relation_names;
      corpus_.vocab = schema->vocab;
      fixed_relations_ = true;
      fixed_vocab_ = true;
    }
  }

  void line(const std::string& text, int lineno) {
    lineno_ = lineno;
    if (text.find_first_not_of(" \t\r") == std::string::npos) return;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      fail(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) fail("record is not a JSON object");
    if (j.contains("relation_names") && !j.contains("pair_id")) {
      header(j);
      return;
    }
    try {
      bag(j);
    } catch (const json::exception& e) {
      fail(std::string("malformed record: ") + e.what());
    }
  }

  Corpus finish() {
    if (corpus_.bags.empty()) throw DataError(source_ + ": empty corpus");
    const int R = corpus_.num_relations();
    for (auto& b : corpus_.bags) b.observed.resize(R, 0);
    // Labels were recorded with provisional ids where NA = -1.
    for (auto& b : corpus_.bags)
      for (auto& g : b.gold)
        if (g && *g < 0) g = R;
    return std::move(corpus_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(source_ + ":" + std::to_string(lineno_) + ": " + msg);
  }

  void header(const json& j) {
    if (!corpus_.bags.empty()) fail("relation_names header must precede all bags");
    auto names = j.at("relation_names").get<std::vector<std::string>>();
    if (fixed_relations_ && names != corpus_.relation_names)
      fail("relation_names header disagrees with the model's relations");
    std::set<std::string> uniq(names.begin(), names.end());
    if (uniq.size() != names.size() || uniq.count("NA")) fail("invalid relation_names header");
    corpus_.relation_names = std::move(names);
    fixed_relations_ = true;
  }

  int relation(const std::string& name) {
    if (name == "NA") fail("NA cannot be a KB relation");
    if (auto id = corpus_.relation_id(name)) return *id;
    if (fixed_relations_) fail("unknown relation name '" + name + "'");
    corpus_.relation_names.push_back(name);
    return corpus_.num_relations() - 1;
  }

  void bag(const json& j) {
    Bag b;
    b.pair_id = j.at("pair_id").get<std::string>();
    if (!pair_ids_.insert(b.pair_id).second) fail("duplicate pair_id '" + b.pair_id + "'");
    b.head = j.value("head", std::string());
    b.tail = j.value("tail", std::string());
    b.head_freq = j.value("head_freq", 0L);
    b.tail_freq = j.value("tail_freq", 0L);
    if (b.head_freq < 0 || b.tail_freq < 0) fail("entity frequencies must be non-negative");

    std::vector<int> rels;
    for (const auto& r : j.at("relations")) rels.push_back(relation(r.get<std::string>()));

    const auto& sents = j.at("sentences");
    if (!sents.is_array() || sents.empty()) fail("bag has no sentences");
    bool any_gold = false;
    for (const auto& s : sents) {
      SentenceExample ex;
      for (const auto& tok : s.at("tokens")) {
        const auto word = tok.get<std::string>();
        ex.tokens.push_back(fixed_vocab_ ? corpus_.vocab.id(word) : corpus_.vocab.add(word));
      }
      ex.head_pos = s.at("head_pos").get<int>();
      ex.tail_pos = s.at("tail_pos").get<int>();
      const int m = ex.length();
      if (m == 0) fail("sentence has no tokens");
      if (ex.head_pos < 0 || ex.head_pos >= m) fail("head_pos " + std::to_string(ex.head_pos) + " out of range for sentence of length " + std::to_string(m));
      if (ex.tail_pos < 0 || ex.tail_pos >= m) fail("tail_pos " + std::to_string(ex.tail_pos) + " out of range for sentence of length " + std::to_string(m));
      std::optional<int> gold;
      if (s.contains("gold") && !s.at("gold").is_null()) {
        const auto g = s.at("gold").get<std::string>();
        gold = g == "NA" ? -1 : relation(g);
        any_gold = true;
      }
      b.sentences.push_back(std::move(ex));
      b.gold.push_back(gold);
    }
    if (!any_gold) b.gold.clear();
    b.observed.assign(corpus_.num_relations(), 0);
    for (int r : rels) {
      if (static_cast<int>(b.observed.size()) <= r) b.observed.resize(r + 1, 0);
      b.observed[r] = 1;
    }
    corpus_.bags.push_back(std::move(b));
  }

  Corpus corpus_;
  std::string source_;
  std::set<std::string> pair_ids_;
  bool fixed_relations_ = false;
  bool fixed_vocab_ = false;
  int lineno_ = 0;
};

}  // namespace

Corpus parse_corpus(std::istream& in, const CorpusSchema* schema, const std::string& source) {
  CorpusReader reader(schema, source);
  std::string text;
  int lineno = 0;
  while (std::getline(in, text)) reader.line(text, ++lineno);
  return reader.finish();
}

Corpus load_corpus(const std::filesystem::path& path, const CorpusSchema* schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  return parse_corpus(in, schema, path.string());
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  out << json{{"relation_names", corpus.relation_names}}.dump() << '\n';
  for (const auto& b : corpus.bags) {
    json rels = json::array();
    for (int r = 0; r < b.num_relations(); ++r)
      if (b.observed[r]) rels.push_back(corpus.relation_names[r]);
    json sents = json::array();
    for (int i = 0; i < b.size(); ++i) {
      const auto& s = b.sentences[i];
      json toks = json::array();
      for (int t : s.tokens) toks.push_back(corpus.vocab.word(t));
      json js = {{"tokens", toks}, {"head_pos", s.head_pos}, {"tail_pos", s.tail_pos}};
      if (!b.gold.empty() && b.gold[i]) js["gold"] = corpus.relation_name(*b.gold[i]);
      else js["gold"] = nullptr;
      sents.push_back(std::move(js));
    }
    json jb = {{"pair_id", b.pair_id}, {"head", b.head},           {"tail", b.tail},
               {"head_freq", b.head_freq}, {"tail_freq", b.tail_freq}, {"relations", rels},
               {"sentences", sents}};
    out << jb.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ostringstream ss;
  write_corpus(corpus, ss);
  write_file(path, ss.str());
}

// ---------------------------------------------------------------------------
// Synthetic corpora

double MissingnessModel::operator()(long freq) const {
  const double g = std::clamp(std::log1p(static_cast<double>(std::max(0L, freq))) / std::log1p(freq_ref), 0.0, 1.0);
  return std::clamp(base - popularity_slope * g, 0.0, 1.0);
}

void SynthSpec::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
  };
  if (num_bags < 1) throw std::invalid_argument("bags must be positive");
  if (num_relations < 1) throw std::invalid_argument("relations must be positive");
  if (num_entities < 2) throw std::invalid_argument("need at least two entities");
  if (static_cast<double>(num_entities) * (num_entities - 1) < 2.0 * num_bags)
    throw std::invalid_argument("too few entities for the requested number of distinct pairs");
  if (vocab_size < 1) throw std::invalid_argument("vocab_size must be positive");
  if (min_sentence_length < 3 || max_sentence_length < min_sentence_length)
    throw std::invalid_argument("sentence lengths must satisfy 3 <= min <= max");
  if (max_bag_size < 1 || large_bag_size < 1) throw std::invalid_argument("bag sizes must be positive");
  if (zipf_exponent < 0) throw std::invalid_argument("zipf_exponent must be non-negative");
  if (!(geometric_p > 0 && geometric_p <= 1)) throw std::invalid_argument("geometric_p must lie in (0, 1]");
  prob(na_bag_fraction, "na_bag_fraction");
  prob(overlap_prob, "overlap_prob");
  prob(large_bag_fraction, "large_bag_fraction");
  prob(express_prob, "express_prob");
  prob(p_signal, "p_signal");
  prob(missingness.base, "missingness");
  if (!(missingness.freq_ref > 0)) throw std::invalid_argument("missingness freq_ref must be positive");
}

Vocabulary synthetic_vocabulary(const SynthSpec& spec) {
  Vocabulary v;
  for (int i = 0; i < spec.vocab_size; ++i) v.add("w" + std::to_string(i));
  for (int r = 0; r < spec.num_relations; ++r) v.add("sig_" + std::to_string(r));
  for (int e = 0; e < spec.num_entities; ++e) v.add("e" + std::to_string(e));
  return v;
}

// Stream order: per bag (pair, NA-or-relations, size, per-sentence content),
// then entity frequencies (deterministic), then one Bernoulli draw per true
// fact in bag order for KB drops.
SyntheticCorpus generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  Pcg32 rng(spec.seed);
  const int R = spec.num_relations;

  std::vector<double> zipf(spec.num_entities);
  for (int e = 0; e < spec.num_entities; ++e) zipf[e] = 1.0 / std::pow(e + 1.0, spec.zipf_exponent);
  std::discrete_distribution<int> entity(zipf.begin(), zipf.end());
  std::uniform_int_distribution<int> relation(0, R - 1);
  std::uniform_int_distribution<int> filler(0, spec.vocab_size - 1);
  std::uniform_int_distribution<int> length(spec.min_sentence_length, spec.max_sentence_length);
  std::geometric_distribution<int> extra(spec.geometric_p);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticCorpus out;
  Corpus& c = out.corpus;
  for (int r = 0; r < R; ++r) c.relation_names.push_back("rel_" + std::to_string(r));
  c.vocab = synthetic_vocabulary(spec);
  const int sig0 = c.vocab.id("sig_0");
  const int ent0 = c.vocab.id("e0");

  std::set<std::pair<int, int>> pairs;
  std::vector<std::pair<int, int>> bag_pairs;
  for (int b = 0; b < spec.num_bags; ++b) {
    int h = 0, t = 0;
    do {
      h = entity(rng);
      t = entity(rng);
    } while (h == t || pairs.count({h, t}));
    pairs.insert({h, t});
    bag_pairs.push_back({h, t});

    BitVector truth(R, 0);
    std::vector<int> true_rels;
    if (unit(rng) >= spec.na_bag_fraction) {
      const int k = (R > 1 && unit(rng) < spec.overlap_prob) ? 2 : 1;
      while (static_cast<int>(true_rels.size()) < k) {
        const int r = relation(rng);
        if (!truth[r]) {
          truth[r] = 1;
          true_rels.push_back(r);
        }
      }
    }

    int n = 0;
    if (unit(rng) < spec.large_bag_fraction) n = spec.large_bag_size;
    else n = std::min(spec.max_bag_size, 1 + extra(rng));

    // Each true relation is anchored on one sentence when the bag is large enough.
    std::vector<int> labels(n, R);
    for (std::size_t k = 0; k < true_rels.size() && static_cast<int>(k) < n; ++k) labels[k] = true_rels[k];
    for (int i = static_cast<int>(true_rels.size()); i < n; ++i)
      if (!true_rels.empty() && unit(rng) < spec.express_prob)
        labels[i] = true_rels[std::uniform_int_distribution<int>(0, static_cast<int>(true_rels.size()) - 1)(rng)];
    std::shuffle(labels.begin(), labels.end(), rng);

    Bag bag;
    bag.pair_id = "e" + std::to_string(h) + "|e" + std::to_string(t);
    bag.head = "e" + std::to_string(h);
    bag.tail = "e" + std::to_string(t);
    for (int i = 0; i < n; ++i) {
      SentenceExample s;
      const int m = length(rng);
      s.tokens.resize(m);
      for (int k = 0; k < m; ++k) s.tokens[k] = filler(rng);
      std::uniform_int_distribution<int> pos(0, m - 1);
      s.head_pos = pos(rng);
      do s.tail_pos = pos(rng); while (s.tail_pos == s.head_pos);
      s.tokens[s.head_pos] = ent0 + h;
      s.tokens[s.tail_pos] = ent0 + t;
      if (labels[i] < R && unit(rng) < spec.p_signal) {
        int k = 0;
        do k = pos(rng); while (k == s.head_pos || k == s.tail_pos);
        s.tokens[k] = sig0 + labels[i];
      }
      bag.sentences.push_back(std::move(s));
      bag.gold.push_back(labels[i]);
    }
    bag.observed = truth;
    out.true_facts.push_back(std::move(truth));
    c.bags.push_back(std::move(bag));
  }

  std::vector<long> freq(spec.num_entities, 0);
  for (auto [h, t] : bag_pairs) {
    ++freq[h];
    ++freq[t];
  }
  for (std::size_t b = 0; b < c.bags.size(); ++b) {
    auto& bag = c.bags[b];
    bag.head_freq = freq[bag_pairs[b].first];
    bag.tail_freq = freq[bag_pairs[b].second];
    const double drop = spec.missingness(std::min(bag.head_freq, bag.tail_freq));
    for (int r = 0; r < R; ++r)
      if (bag.observed[r] && unit(rng) < drop) bag.observed[r] = 0;
  }
  return out;
}

void save_true_facts(const SyntheticCorpus& sc, const std::filesystem::path& path) {
  const Corpus& c = sc.corpus;
  std::ostringstream ss;
  for (std::size_t b = 0; b < c.bags.size(); ++b) {
    json truth = json::array(), observed = json::array();
    for (int r = 0; r < c.num_relations(); ++r) {
      if (sc.true_facts[b][r]) truth.push_back(c.relation_names[r]);
      if (c.bags[b].observed[r]) observed.push_back(c.relation_names[r]);
    }
    ss << json{{"pair_id", c.bags[b].pair_id}, {"true_relations", truth}, {"observed_relations", observed}}.dump()
       << '\n';
  }
  write_file(path, ss.str());
}

// ---------------------------------------------------------------------------
// JSON conversions

std::string_view to_string(Representation r) {
  return r == Representation::learned_pcnn ? "learned_pcnn" : "fixed_vectors";
}

Representation parse_representation(std::string_view name) {
  if (name == "learned_pcnn") return Representation::learned_pcnn;
  if (name == "fixed_vectors") return Representation::fixed_vectors;
  throw std::invalid_argument("unknown representation '" + std::string(name) + "'");
}

void to_json(json& j, const Hyperparams& hp) {
  j = json{{"mu", hp.mu},
           {"alpha_t", hp.alpha_t},
           {"alpha_d", hp.alpha_d},
           {"beta1", hp.beta1},
           {"beta2", hp.beta2},
           {"loss_variant", std::string(to_string(hp.loss_variant))},
           {"freq_scaling", hp.freq_scaling},
           {"freq_ref", hp.freq_ref},
           {"restarts", hp.restarts},
           {"learning_rate", hp.learning_rate},
           {"mira_cap", hp.mira_cap}};
}

void from_json(const json& j, Hyperparams& hp) {
  hp.mu = j.value("mu", hp.mu);
  hp.alpha_t = j.value("alpha_t", hp.alpha_t);
  hp.alpha_d = j.value("alpha_d", hp.alpha_d);
  hp.beta1 = j.value("beta1", hp.beta1);
  hp.beta2 = j.value("beta2", hp.beta2);
  if (j.contains("loss_variant")) hp.loss_variant = parse_loss_variant(j.at("loss_variant").get<std::string>());
  hp.freq_scaling = j.value("freq_scaling", hp.freq_scaling);
  hp.freq_ref = j.value("freq_ref", hp.freq_ref);
  hp.restarts = j.value("restarts", hp.restarts);
  hp.learning_rate = j.value("learning_rate", hp.learning_rate);
  hp.mira_cap = j.value("mira_cap", hp.mira_cap);
}

void to_json(json& j, const SynthSpec& s) {
  j = json{{"num_entities", s.num_entities},
           {"zipf_exponent", s.zipf_exponent},
           {"num_relations", s.num_relations},
           {"num_bags", s.num_bags},
           {"na_bag_fraction", s.na_bag_fraction},
           {"overlap_prob", s.overlap_prob},
           {"geometric_p", s.geometric_p},
           {"max_bag_size", s.max_bag_size},
           {"large_bag_fraction", s.large_bag_fraction},
           {"large_bag_size", s.large_bag_size},
           {"express_prob", s.express_prob},
           {"vocab_size", s.vocab_size},
           {"p_signal", s.p_signal},
           {"min_sentence_length", s.min_sentence_length},
           {"max_sentence_length", s.max_sentence_length},
           {"missingness", s.missingness.base},
           {"missingness_popularity_slope", s.missingness.popularity_slope},
           {"missingness_freq_ref", s.missingness.freq_ref},
           {"seed", s.seed}};
}

void from_json(const json& j, SynthSpec& s) {
  s.num_entities = j.value("num_entities", s.num_entities);
  s.zipf_exponent = j.value("zipf_exponent", s.zipf_exponent);
  s.num_relations = j.value("num_relations", s.num_relations);
  s.num_bags = j.value("num_bags", s.num_bags);
  s.na_bag_fraction = j.value("na_bag_fraction", s.na_bag_fraction);
  s.overlap_prob = j.value("overlap_prob", s.overlap_prob);
  s.geometric_p = j.value("geometric_p", s.geometric_p);
  s.max_bag_size = j.value("max_bag_size", s.max_bag_size);
  s.large_bag_fraction = j.value("large_bag_fraction", s.large_bag_fraction);
  s.large_bag_size = j.value("large_bag_size", s.large_bag_size);
  s.express_prob = j.value("express_prob", s.express_prob);
  s.vocab_size = j.value("vocab_size", s.vocab_size);
  s.p_signal = j.value("p_signal", s.p_signal);
  s.min_sentence_length = j.value("min_sentence_length", s.min_sentence_length);
  s.max_sentence_length = j.value("max_sentence_length", s.max_sentence_length);
  s.missingness.base = j.value("missingness", s.missingness.base);
  s.missingness.popularity_slope = j.value("missingness_popularity_slope", s.missingness.popularity_slope);
  s.missingness.freq_ref = j.value("missingness_freq_ref", s.missingness.freq_ref);
  s.seed = j.value("seed", s.seed);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

template <typename M>
json tensor_json(const M& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()},
              {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

template <typename M>
void read_tensor(const json& j, const char* name, M& m, Eigen::Index rows, Eigen::Index cols) {
  const auto& t = j.at(name);
  const auto r = t.at("rows").get<Eigen::Index>();
  const auto c = t.at("cols").get<Eigen::Index>();
  if (r != rows || c != cols)
    throw DataError(std::string("checkpoint tensor '") + name + "' has shape " + std::to_string(r) + "x" +
                    std::to_string(c) + ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  const auto data = t.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw DataError(std::string("checkpoint tensor '") + name + "' declares " + std::to_string(rows * cols) +
                    " values but holds " + std::to_string(data.size()));
  m.resize(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
}

}  // namespace

json checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  const auto& d = p.dims;
  json dims = {{"vocab_size", d.vocab_size},   {"word_dim", d.word_dim}, {"pos_dim", d.pos_dim},
               {"num_filters", d.num_filters}, {"window", d.window},     {"max_offset", d.max_offset},
               {"num_relations", d.num_relations}, {"feature_dim", p.feature_dim()}};
  json tensors = {{"theta", tensor_json(p.theta)}};
  if (ckpt.representation == Representation::learned_pcnn) {
    tensors["word_emb"] = tensor_json(p.word_emb);
    tensors["pos_head"] = tensor_json(p.pos_head);
    tensors["pos_tail"] = tensor_json(p.pos_tail);
    tensors["filters"] = tensor_json(p.filters);
    tensors["bias"] = tensor_json(p.bias);
  }
  return json{{"format_version", Checkpoint::kFormatVersion},
              {"representation", std::string(to_string(ckpt.representation))},
              {"dims", dims},
              {"relation_names", ckpt.relation_names},
              {"vocab", ckpt.vocab},
              {"hyperparams", ckpt.hp},
              {"tensors", tensors}};
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != Checkpoint::kFormatVersion)
      throw DataError("checkpoint format_version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(Checkpoint::kFormatVersion) + ")");
    Checkpoint ck;
    ck.representation = parse_representation(j.at("representation").get<std::string>());
    ck.relation_names = j.at("relation_names").get<std::vector<std::string>>();
    ck.vocab = j.at("vocab").get<std::vector<std::string>>();
    ck.hp = j.at("hyperparams").get<Hyperparams>();
    const auto& jd = j.at("dims");
    EncoderDims d;
    d.vocab_size = jd.at("vocab_size");
    d.word_dim = jd.at("word_dim");
    d.pos_dim = jd.at("pos_dim");
    d.num_filters = jd.at("num_filters");
    d.window = jd.at("window");
    d.max_offset = jd.at("max_offset");
    d.num_relations = jd.at("num_relations");
    const int feature_dim = jd.at("feature_dim");
    if (d.num_relations != static_cast<int>(ck.relation_names.size()))
      throw DataError("checkpoint num_relations does not match relation_names");
    auto& p = ck.params;
    p.dims = d;
    const auto& t = j.at("tensors");
    read_tensor(t, "theta", p.theta, d.num_relations + 1, feature_dim);
    if (ck.representation == Representation::learned_pcnn) {
      if (feature_dim != d.feature_dim()) throw DataError("checkpoint feature_dim does not match num_filters");
      if (d.vocab_size != static_cast<int>(ck.vocab.size()))
        throw DataError("checkpoint vocab_size does not match vocabulary");
      read_tensor(t, "word_emb", p.word_emb, d.vocab_size, d.word_dim);
      read_tensor(t, "pos_head", p.pos_head, d.position_rows(), d.pos_dim);
      read_tensor(t, "pos_tail", p.pos_tail, d.position_rows(), d.pos_dim);
      read_tensor(t, "filters", p.filters, d.num_filters, d.window * d.input_dim());
      read_tensor(t, "bias", p.bias, d.num_filters, 1);
    }
    if (!all_finite(p)) throw DataError("checkpoint contains non-finite values");
    return ck;
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, checkpoint_to_json(ckpt).dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

// ---------------------------------------------------------------------------
// Fixed vectors

bool FixedVectors::operator==(const FixedVectors& o) const {
  if (dim != o.dim || vectors.size() != o.vectors.size()) return false;
  for (std::size_t b = 0; b < vectors.size(); ++b) {
    if (vectors[b].size() != o.vectors[b].size()) return false;
    for (std::size_t i = 0; i < vectors[b].size(); ++i)
      if (vectors[b][i].size() != o.vectors[b][i].size() || vectors[b][i] != o.vectors[b][i]) return false;
  }
  return true;
}

FixedVectors parse_fixed_vectors(const json& j, const Corpus& corpus) {
  FixedVectors fv;
  try {
    fv.dim = j.at("dim").get<int>();
    if (fv.dim < 1) throw DataError("fixed vectors: dim must be positive");
    const auto& table = j.at("vectors");
    for (const auto& bag : corpus.bags) {
      auto& row = fv.vectors.emplace_back();
      for (int i = 0; i < bag.size(); ++i) {
        const std::string key = bag.pair_id + "/" + std::to_string(i);
        auto it = table.find(key);
        if (it == table.end()) throw DataError("fixed vectors: missing sentence key '" + key + "'");
        const auto v = it->get<std::vector<double>>();
        if (static_cast<int>(v.size()) != fv.dim)
          throw DataError("fixed vectors: '" + key + "' has dimension " + std::to_string(v.size()) +
                          ", expected " + std::to_string(fv.dim));
        row.push_back(Eigen::Map<const Vector<double>>(v.data(), fv.dim));
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("fixed vectors: malformed file: ") + e.what());
  }
  return fv;
}

FixedVectors load_fixed_vectors(const std::filesystem::path& path, const Corpus& corpus) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError("fixed vectors " + path.string() + ": " + e.what());
  }
  return parse_fixed_vectors(j, corpus);
}

void save_fixed_vectors(const FixedVectors& fv, const Corpus& corpus, const std::filesystem::path& path) {
  json table = json::object();
  for (std::size_t b = 0; b < corpus.bags.size(); ++b)
    for (std::size_t i = 0; i < fv.vectors[b].size(); ++i) {
      const auto& v = fv.vectors[b][i];
      table[corpus.bags[b].pair_id + "/" + std::to_string(i)] = std::vector<double>(v.data(), v.data() + v.size());
    }
  write_file(path, json{{"dim", fv.dim}, {"vectors", table}}.dump() + "\n");
}

}  // namespace nmar
