// Factor-graph scoring for one bag: mention potentials, deterministic OR between
// mention labels and aggregate relation bits, and soft agreement with the KB.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nmar/encoder.hpp"

namespace nmar {

using BitVector = std::vector<std::uint8_t>;
using ScoreTable = RowMatrix<double>;

/// All sentences mentioning one entity pair plus the KB relations observed for it.
/// Relation ids are 0..R-1; NA is R and never appears in observed.
struct Bag {
  std::string pair_id;
  std::string head;
  std::string tail;
  std::vector<SentenceExample> sentences;
  BitVector observed;
  long head_freq = 0;
  long tail_freq = 0;
  std::vector<std::optional<int>> gold;  // per sentence; empty when unannotated

  int size() const { return static_cast<int>(sentences.size()); }
  int num_relations() const { return static_cast<int>(observed.size()); }
  bool has_gold() const;
  bool operator==(const Bag&) const = default;
};

enum class LossVariant { zero_one, relation_hamming, mention_hamming };

std::string_view to_string(LossVariant v);
LossVariant parse_loss_variant(std::string_view name);

struct Hyperparams {
  double mu = 100.0;
  double alpha_t = 0.02;
  double alpha_d = 0.02;
  double beta1 = 10;
  double beta2 = 40;
  LossVariant loss_variant = LossVariant::mention_hamming;
  bool freq_scaling = false;
  double freq_ref = 1000;
  int restarts = 30;
  double learning_rate = 0.01;
  double mira_cap = 1.0;

  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

/// Bag-specific disagreement penalties (after optional entity-frequency scaling).
struct Penalties {
  double alpha_t = 0;  // fact observed but not extracted
  double alpha_d = 0;  // extracted but not observed
};

/// Scale factor in [0.1, 1] that grows with the popularity of the rarer entity.
double frequency_scale(long head_freq, long tail_freq, double freq_ref);
Penalties bag_penalties(const Bag& bag, const Hyperparams& hp);

/// t_j = 1 iff some z_i = j. z values range over 0..R where R is NA.
BitVector implied_t(const std::vector<int>& z, int num_relations);

/// A joint configuration (z, t, d*). t is always the OR of z, so an
/// inconsistent (z, t) cannot be represented.
class Assignment {
 public:
  Assignment(std::vector<int> z, BitVector d_star);

  const std::vector<int>& z() const { return z_; }
  const BitVector& t() const { return t_; }
  const BitVector& d_star() const { return d_star_; }
  int num_relations() const { return static_cast<int>(t_.size()); }
  bool operator==(const Assignment&) const = default;

 private:
  std::vector<int> z_;
  BitVector t_;
  BitVector d_star_;
};

/// log phi_A without the mu exponent: 0 on agreement, -alpha_t when an
/// observed fact is not extracted, -alpha_d when an extraction is unobserved.
double agreement_logpenalty(bool t, bool d, const Penalties& pen);
double agreement_logpenalty(bool t, bool d, const Hyperparams& hp, const Bag& bag);

/// sum_i S[i][z_i] + mu * sum_j log phi_A(t_j, d*_j), with t = implied_t(z).
double joint_logscore(const ScoreTable& scores, const Assignment& a, double mu,
                      const Penalties& pen);
double joint_logscore(const Bag& bag, std::span<const SentenceEncoding<double>> encodings,
                      const EncoderParams<double>& params, const Assignment& a,
                      const Hyperparams& hp);

/// Task loss of Assignment a against the bag's observed relations.
/// The mention variant counts mentions labeled with an unobserved relation.
double loss(const Assignment& a, const BitVector& observed, LossVariant variant);

/// 1 below beta1, beta1/n up to beta2, (beta1/n)^2 beyond.
double bag_weight(int n, double beta1, double beta2);
inline double bag_weight(int n, const Hyperparams& hp) { return bag_weight(n, hp.beta1, hp.beta2); }

}  // namespace nmar
