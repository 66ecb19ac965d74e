// Corpus ingestion, synthetic distant-supervision data, checkpoints and
// externally supplied sentence vectors.
#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "nmar/encoder.hpp"
#include "nmar/model.hpp"

namespace nmar {

/// Raised for malformed input files; the message carries the location.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& words);

  int add(const std::string& token);
  /// Id of token, or kUnk when absent.
  int id(const std::string& token) const;
  const std::string& word(int id) const { return words_.at(id); }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }
  bool operator==(const Vocabulary& o) const { return words_ == o.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

struct Corpus {
  std::vector<std::string> relation_names;
  Vocabulary vocab;
  std::vector<Bag> bags;

  int num_relations() const { return static_cast<int>(relation_names.size()); }
  int na() const { return num_relations(); }
  std::optional<int> relation_id(const std::string& name) const;
  /// Relation name for ids 0..R, with "NA" for R.
  std::string relation_name(int id) const;
  bool has_gold() const;
  bool operator==(const Corpus&) const = default;
};

/// Relation inventory and vocabulary a corpus must be read against.
struct CorpusSchema {
  std::vector<std::string> relation_names;
  Vocabulary vocab;
};

/// Reads line-delimited JSON, one bag per line. An optional first line
/// {"relation_names": [...]} fixes relation ids; otherwise they are assigned in
/// order of first appearance. With a schema, unknown relations are errors and
/// unknown tokens map to the UNK id.
Corpus load_corpus(const std::filesystem::path& path, const CorpusSchema* schema = nullptr);
Corpus parse_corpus(std::istream& in, const CorpusSchema* schema = nullptr,
                    const std::string& source = "<stream>");
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
void write_corpus(const Corpus& corpus, std::ostream& out);

// ---------------------------------------------------------------------------
// Synthetic data

struct MissingnessModel {
  double base = 0.3;
  double popularity_slope = 0.0;  // drop rate decreases by this much for the most popular entities
  double freq_ref = 1000;

  /// Drop probability for a fact whose rarer entity occurs freq times.
  double operator()(long freq) const;
};

struct SynthSpec {
  int num_entities = 2000;
  double zipf_exponent = 1.0;
  int num_relations = 6;
  int num_bags = 1000;
  double na_bag_fraction = 0.3;
  double overlap_prob = 0.15;      // positive bags with two true relations
  double geometric_p = 0.45;       // bag size = 1 + Geometric(p), capped
  int max_bag_size = 12;
  double large_bag_fraction = 0.0;
  int large_bag_size = 50;
  double express_prob = 0.6;       // non-anchor sentences of positive bags
  int vocab_size = 200;
  double p_signal = 0.9;
  int min_sentence_length = 6;
  int max_sentence_length = 14;
  MissingnessModel missingness;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticCorpus {
  Corpus corpus;                     // gold mention labels included
  std::vector<BitVector> true_facts;  // per bag, before KB drops
};

/// Vocabulary shared by every corpus generated from specs with equal sizes.
Vocabulary synthetic_vocabulary(const SynthSpec& spec);
SyntheticCorpus generate_synthetic(const SynthSpec& spec);
void save_true_facts(const SyntheticCorpus& sc, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Checkpoints

enum class Representation { learned_pcnn, fixed_vectors };
std::string_view to_string(Representation r);
Representation parse_representation(std::string_view name);

void to_json(nlohmann::json& j, const Hyperparams& hp);
void from_json(const nlohmann::json& j, Hyperparams& hp);
void to_json(nlohmann::json& j, const SynthSpec& spec);
void from_json(const nlohmann::json& j, SynthSpec& spec);

struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  Representation representation = Representation::learned_pcnn;
  EncoderParams<double> params;
  std::vector<std::string> relation_names;
  std::vector<std::string> vocab;
  Hyperparams hp;

  bool operator==(const Checkpoint&) const = default;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Fixed sentence vectors, keyed "<pair_id>/<sentence_index>"

struct FixedVectors {
  int dim = 0;
  std::vector<std::vector<Vector<double>>> vectors;  // [bag][sentence]
  bool operator==(const FixedVectors& o) const;
};

FixedVectors load_fixed_vectors(const std::filesystem::path& path, const Corpus& corpus);
FixedVectors parse_fixed_vectors(const nlohmann::json& j, const Corpus& corpus);
void save_fixed_vectors(const FixedVectors& fv, const Corpus& corpus,
                        const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace nmar
