#include "nmar/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nmar {

bool Bag::has_gold() const {
  return std::any_of(gold.begin(), gold.end(), [](const auto& g) { return g.has_value(); });
}

std::string_view to_string(LossVariant v) {
  switch (v) {
    case LossVariant::zero_one: return "zero_one";
    case LossVariant::relation_hamming: return "relation_hamming";
    case LossVariant::mention_hamming: return "mention_hamming";
  }
  return "?";
}

LossVariant parse_loss_variant(std::string_view name) {
  if (name == "zero_one") return LossVariant::zero_one;
  if (name == "relation_hamming") return LossVariant::relation_hamming;
  if (name == "mention_hamming") return LossVariant::mention_hamming;
  throw std::invalid_argument("unknown loss variant '" + std::string(name) + "'");
}

void Hyperparams::validate() const {
  if (mu < 0 || alpha_t < 0 || alpha_d < 0)
    throw std::invalid_argument("penalties mu, alpha_t, alpha_d must be non-negative");
  if (beta1 > beta2) throw std::invalid_argument("beta1 must not exceed beta2");
  if (restarts < 1) throw std::invalid_argument("restarts must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be positive");
  if (mira_cap < 0) throw std::invalid_argument("mira_cap must be non-negative");
  if (!(freq_ref > 0)) throw std::invalid_argument("freq_ref must be positive");
}

double frequency_scale(long head_freq, long tail_freq, double freq_ref) {
  const double f = static_cast<double>(std::max(0L, std::min(head_freq, tail_freq)));
  return std::clamp(std::log1p(f) / std::log1p(freq_ref), 0.1, 1.0);
}

Penalties bag_penalties(const Bag& bag, const Hyperparams& hp) {
  const double g = hp.freq_scaling ? frequency_scale(bag.head_freq, bag.tail_freq, hp.freq_ref) : 1.0;
  return {hp.alpha_t * g, hp.alpha_d * g};
}

BitVector implied_t(const std::vector<int>& z, int num_relations) {
  BitVector t(num_relations, 0);
  for (int r : z) {
    if (r < 0 || r > num_relations)
      throw std::out_of_range("mention label " + std::to_string(r) + " out of range");
    if (r < num_relations) t[r] = 1;
  }
  return t;
}

Assignment::Assignment(std::vector<int> z, BitVector d_star)
    : z_(std::move(z)), t_(implied_t(z_, static_cast<int>(d_star.size()))), d_star_(std::move(d_star)) {}

double agreement_logpenalty(bool t, bool d, const Penalties& pen) {
  if (t == d) return 0.0;
  return d ? -pen.alpha_t : -pen.alpha_d;
}

double agreement_logpenalty(bool t, bool d, const Hyperparams& hp, const Bag& bag) {
  return agreement_logpenalty(t, d, bag_penalties(bag, hp));
}

double joint_logscore(const ScoreTable& scores, const Assignment& a, double mu,
                      const Penalties& pen) {
  const auto& z = a.z();
  if (static_cast<Eigen::Index>(z.size()) != scores.rows() ||
      scores.cols() != a.num_relations() + 1)
    throw std::invalid_argument("joint_logscore: assignment does not match score table shape");
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += scores(static_cast<Eigen::Index>(i), z[i]);
  double agree = 0;
  for (int j = 0; j < a.num_relations(); ++j)
    agree += agreement_logpenalty(a.t()[j], a.d_star()[j], pen);
  return s + mu * agree;
}

double joint_logscore(const Bag& bag, std::span<const SentenceEncoding<double>> encodings,
                      const EncoderParams<double>& params, const Assignment& a,
                      const Hyperparams& hp) {
  if (static_cast<int>(encodings.size()) != bag.size())
    throw std::invalid_argument("joint_logscore: one encoding per sentence required");
  return joint_logscore(score_table(encodings, params.theta), a, hp.mu, bag_penalties(bag, hp));
}

double loss(const Assignment& a, const BitVector& observed, LossVariant variant) {
  const int R = static_cast<int>(observed.size());
  switch (variant) {
    case LossVariant::zero_one:
      return a.d_star() == observed ? 0.0 : 1.0;
    case LossVariant::relation_hamming: {
      double h = 0;
      for (int j = 0; j < R; ++j) h += a.d_star()[j] != observed[j];
      return h;
    }
    case LossVariant::mention_hamming: {
      double h = 0;
      for (int r : a.z()) h += (r < R && !observed[r]);
      return h;
    }
  }
  return 0;
}

double bag_weight(int n, double beta1, double beta2) {
  if (n < beta1) return 1.0;
  if (n <= beta2) return beta1 / n;
  // One rounding instead of squaring an already rounded ratio.
  return (beta1 * beta1) / (static_cast<double>(n) * n);
}

}  // namespace nmar
