#include "nmar/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nmar/eval.hpp"

namespace nmar {

std::string_view to_string(TrainerKind k) {
  switch (k) {
    case TrainerKind::sgd_hinge: return "sgd_hinge";
    case TrainerKind::perceptron: return "perceptron";
    case TrainerKind::mira: return "mira";
  }
  return "?";
}

TrainerKind parse_trainer(std::string_view name) {
  if (name == "sgd_hinge") return TrainerKind::sgd_hinge;
  if (name == "perceptron") return TrainerKind::perceptron;
  if (name == "mira") return TrainerKind::mira;
  throw std::invalid_argument("unknown trainer '" + std::string(name) + "'");
}

std::string_view to_string(ModelMode m) { return m == ModelMode::nmar ? "nmar" : "hard_constraint"; }

ModelMode parse_model_mode(std::string_view name) {
  if (name == "nmar") return ModelMode::nmar;
  if (name == "hard_constraint") return ModelMode::hard_constraint;
  throw std::invalid_argument("unknown model mode '" + std::string(name) + "'");
}

void TrainerConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (trainer != TrainerKind::sgd_hinge && representation != Representation::fixed_vectors)
    throw std::invalid_argument("perceptron and mira trainers require fixed_vectors representations");
  if (representation == Representation::learned_pcnn) {
    if (dims.word_dim < 1 || dims.pos_dim < 0 || dims.num_filters < 1 || dims.window < 1 || dims.max_offset < 0)
      throw std::invalid_argument("invalid encoder dimensions");
  }
  if (solver.restarts < 1) throw std::invalid_argument("solver restarts must be positive");
}

Hyperparams effective_hyperparams(const Hyperparams& hp, ModelMode mode) {
  Hyperparams out = hp;
  if (mode == ModelMode::hard_constraint) {
    out.alpha_t = kHardConstraintPenalty;
    out.alpha_d = kHardConstraintPenalty;
  }
  return out;
}

namespace {

ScoreTable bag_scores(const Bag& bag, const EncoderParams<double>& params,
                      const std::vector<SentenceEncoding<double>>& enc) {
  ScoreTable scores = score_table<double>(enc, params.theta);
  if (!scores.allFinite()) {
    std::ostringstream ss;
    ss << "non-finite mention scores for bag '" << bag.pair_id << "' (size " << bag.size()
       << "), theta max |.|=" << params.theta.cwiseAbs().maxCoeff();
    throw NonFiniteError(ss.str());
  }
  return scores;
}

}  // namespace

HingeResult hinge_gradient(const Bag& bag, const EncoderParams<double>& params, const Hyperparams& hp,
                           const SolverConfig& solver, bool weighting, Pcg32& rng,
                           const std::vector<Vector<double>>* fixed) {
  const auto enc = encode_bag(bag, params, fixed);
  const ScoreTable scores = bag_scores(bag, params, enc);

  HingeResult res;
  res.gold = solve_map(make_map_problem(bag, scores, hp, MapMode::constrained), solver, rng);
  res.violator = solve_map(make_map_problem(bag, scores, hp, MapMode::loss_augmented), solver, rng);
  res.hinge = res.violator.objective - res.gold.objective;
  res.weight = weighting ? bag_weight(bag.size(), hp) : 1.0;
  res.grads = zeros_like(params);
  if (!(res.hinge > 0)) return res;

  for (int i = 0; i < bag.size(); ++i) {
    const int e = res.violator.z[i];
    const int g = res.gold.z[i];
    if (e == g) continue;
    const GradPair<double> pairs[] = {{e, res.weight}, {g, -res.weight}};
    encode_backward<double>(bag.sentences[i], params, enc[i], pairs, res.grads);
  }
  return res;
}

HingeResult hinge_step(const Bag& bag, TrainState& state, const Hyperparams& hp, const SolverConfig& solver,
                       bool weighting, const std::vector<Vector<double>>* fixed) {
  HingeResult res = hinge_gradient(bag, state.params, hp, solver, weighting, state.rng, fixed);
  if (res.hinge > 0) add_scaled(state.params, res.grads, -hp.learning_rate);
  return res;
}

namespace {

PerceptronResult perceptron_labels(const Bag& bag, TrainState& state, const Hyperparams& hp,
                                   const SolverConfig& solver, const std::vector<Vector<double>>& vectors) {
  const auto enc = encode_bag(bag, state.params, &vectors);
  const ScoreTable scores = bag_scores(bag, state.params, enc);
  PerceptronResult r;
  r.z_kb = solve_map(make_map_problem(bag, scores, hp, MapMode::constrained), solver, state.rng).z;
  for (int i = 0; i < bag.size(); ++i) {
    r.z_hat.push_back(predict_from_scores(scores.row(i).transpose(), 0, i).relation);
    r.mistakes += r.z_hat[i] != r.z_kb[i];
  }
  return r;
}

}  // namespace

PerceptronResult perceptron_step(const Bag& bag, TrainState& state, const Hyperparams& hp,
                                 const SolverConfig& solver, const std::vector<Vector<double>>& vectors) {
  PerceptronResult r = perceptron_labels(bag, state, hp, solver, vectors);
  auto& theta = state.params.theta;
  for (int i = 0; i < bag.size(); ++i) {
    if (r.z_kb[i] == r.z_hat[i]) continue;
    theta.row(r.z_kb[i]) += vectors[i].transpose();
    theta.row(r.z_hat[i]) -= vectors[i].transpose();
  }
  return r;
}

double mira_tau(double margin, double x_sq_norm, double cap, bool* capped) {
  if (capped) *capped = false;
  const double numerator = 1.0 - margin;
  if (numerator <= 0 || x_sq_norm <= 0) return 0.0;
  const double tau = numerator / (2.0 * x_sq_norm);
  if (tau > cap) {
    if (capped) *capped = true;
    return cap;
  }
  return tau;
}

MiraResult mira_step(const Bag& bag, TrainState& state, const Hyperparams& hp, const SolverConfig& solver,
                     const std::vector<Vector<double>>& vectors) {
  MiraResult m;
  m.labels = perceptron_labels(bag, state, hp, solver, vectors);
  m.taus.assign(bag.size(), 0.0);
  m.capped.assign(bag.size(), false);
  auto& theta = state.params.theta;
  for (int i = 0; i < bag.size(); ++i) {
    const int a = m.labels.z_kb[i];
    const int b = m.labels.z_hat[i];
    if (a == b) continue;
    const auto& x = vectors[i];
    // theta . (F(x, a) - F(x, b)) with F placing x in the block of the label.
    const double margin = theta.row(a).dot(x) - theta.row(b).dot(x);
    bool capped = false;
    const double tau = mira_tau(margin, x.squaredNorm(), hp.mira_cap, &capped);
    if (tau == 0.0) continue;
    theta.row(a) += tau * x.transpose();
    theta.row(b) -= tau * x.transpose();
    m.taus[i] = tau;
    m.capped[i] = capped;
  }
  return m;
}

EncoderParams<double> initial_params(const Corpus& corpus, const TrainerConfig& cfg, int fixed_dim) {
  EncoderDims dims = cfg.dims;
  dims.num_relations = corpus.num_relations();
  if (cfg.representation == Representation::fixed_vectors) {
    if (fixed_dim < 1) throw std::invalid_argument("fixed-vector training needs the vector dimension");
    dims.vocab_size = 0;
    dims.word_dim = 0;
    dims.pos_dim = 0;
    dims.num_filters = 0;
    auto p = zero_params<double>(dims);
    p.theta = RowMatrix<double>::Zero(dims.num_relations + 1, fixed_dim);
    return p;
  }
  dims.vocab_size = corpus.vocab.size();
  Pcg32 rng(cfg.seed, 1);
  return glorot_init<double>(dims, rng);
}

std::string format_epoch_line(const EpochMetrics& m) {
  std::ostringstream ss;
  ss.precision(6);
  ss << "epoch=" << m.epoch << " mean_loss=" << m.mean_loss << " dev_auc=";
  if (m.dev_auc) ss << *m.dev_auc;
  else ss << "na";
  return ss.str();
}

namespace {

std::optional<double> dev_auc(const TrainInputs& in, const EncoderParams<double>& params) {
  if (!in.dev || !in.dev->has_gold()) return std::nullopt;
  const auto preds = predict_mentions(*in.dev, params, in.dev_vectors);
  return sentential_pr(preds, *in.dev).auc;
}

}  // namespace

TrainResult train(const TrainInputs& in, const TrainerConfig& cfg, const Hyperparams& hp,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  hp.validate();
  if (!in.train || in.train->bags.empty()) throw std::invalid_argument("empty corpus");
  const Corpus& corpus = *in.train;
  const bool fixed = cfg.representation == Representation::fixed_vectors;
  if (fixed && !in.train_vectors) throw std::invalid_argument("fixed_vectors representation needs a vector table");
  if (in.dev && in.dev->num_relations() != corpus.num_relations())
    throw std::invalid_argument("dev corpus relations differ from training corpus");

  const Hyperparams eff = effective_hyperparams(hp, cfg.model_mode);
  TrainState state{initial_params(corpus, cfg, fixed ? in.train_vectors->dim : 0), 0, 0.0, Pcg32(cfg.seed, 2)};

  TrainResult result;
  result.params = state.params;
  result.initial_dev_auc = dev_auc(in, state.params);
  std::optional<double> best_auc;

  std::vector<int> order(corpus.bags.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), state.rng);
    double total = 0;
    for (int b : order) {
      const Bag& bag = corpus.bags[b];
      const auto* vecs = fixed ? &in.train_vectors->vectors.at(b) : nullptr;
      auto step = [&]() -> double {
        switch (cfg.trainer) {
          case TrainerKind::sgd_hinge: return hinge_step(bag, state, eff, cfg.solver, cfg.weighting, vecs).hinge;
          case TrainerKind::perceptron: return perceptron_step(bag, state, eff, cfg.solver, *vecs).mistakes;
          case TrainerKind::mira: return mira_step(bag, state, eff, cfg.solver, *vecs).labels.mistakes;
        }
        return 0.0;
      };
      double loss_value = 0;
      try {
        loss_value = step();
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(loss_value) || !all_finite(state.params)) {
        std::ostringstream ss;
        ss << "non-finite training state at epoch " << epoch << ", bag '" << bag.pair_id << "' (size "
           << bag.size() << "), loss=" << loss_value << ", theta max |.|=" << state.params.theta.cwiseAbs().maxCoeff();
        throw NonFiniteError(ss.str());
      }
      total += loss_value;
    }
    state.epoch = epoch;
    state.running_loss = total / static_cast<double>(corpus.bags.size());

    EpochMetrics m{epoch, state.running_loss, dev_auc(in, state.params)};
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m);

    const bool better = m.dev_auc && (!best_auc || *m.dev_auc > *best_auc);
    if (better || (!m.dev_auc && !best_auc)) {
      if (m.dev_auc) best_auc = m.dev_auc;
      result.params = state.params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace nmar
