#include <random>

#include "doctest.h"
#include "nmar/eval.hpp"
#include "nmar/training.hpp"
#include "oracles.hpp"

using namespace nmar;

namespace {

EncoderDims tiny_dims(int vocab, int relations) {
  EncoderDims d;
  d.vocab_size = vocab;
  d.word_dim = 4;
  d.pos_dim = 2;
  d.num_filters = 3;
  d.window = 3;
  d.max_offset = 5;
  d.num_relations = relations;
  return d;
}

Bag random_bag(Pcg32& rng, int vocab, int relations, int max_n) {
  std::uniform_int_distribution<int> nd(1, max_n), len(2, 8), tok(0, vocab - 1), bit(0, 1);
  Bag b;
  b.pair_id = "p" + std::to_string(rng());
  const int n = nd(rng);
  for (int i = 0; i < n; ++i) {
    SentenceExample s;
    s.tokens.resize(len(rng));
    for (auto& t : s.tokens) t = tok(rng);
    std::uniform_int_distribution<int> pos(0, s.length() - 1);
    s.head_pos = pos(rng);
    s.tail_pos = pos(rng);
    b.sentences.push_back(s);
  }
  b.observed.resize(relations);
  for (auto& v : b.observed) v = bit(rng);
  return b;
}

SolverConfig exact_solver() {
  SolverConfig s;
  s.kind = SolverKind::exhaustive;
  return s;
}

/// Linearly separable fixed-vector corpus: sentence vectors are noisy one-hot
/// codes of their relation, every bag has one sentence and the KB is complete.
struct Separable {
  Corpus corpus;
  FixedVectors vectors;
};

Separable separable_corpus(int bags, int relations, std::uint64_t seed) {
  Pcg32 rng(seed);
  std::uniform_int_distribution<int> label(0, relations);
  std::normal_distribution<double> noise(0.0, 0.1);
  Separable s;
  for (int r = 0; r < relations; ++r) s.corpus.relation_names.push_back("r" + std::to_string(r));
  s.vectors.dim = relations + 2;
  for (int b = 0; b < bags; ++b) {
    const int y = label(rng);
    Bag bag;
    bag.pair_id = "b" + std::to_string(b);
    bag.sentences.push_back({{0, 0}, 0, 1});
    bag.observed.assign(relations, 0);
    if (y < relations) bag.observed[y] = 1;
    bag.gold.push_back(y);
    s.corpus.bags.push_back(bag);
    Vector<double> x(s.vectors.dim);
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = noise(rng);
    x[y] += 1.0;
    x[relations + 1] = 1.0;  // bias feature
    s.vectors.vectors.push_back({x});
  }
  return s;
}

}  // namespace

TEST_CASE("hinge is zero and the update vanishes when gold and violator coincide") {
  // One mention, relation 0 observed and strongly preferred: both problems
  // pick z = [0] with d* = observed.
  EncoderDims d;
  d.num_relations = 2;
  d.vocab_size = 0;
  d.word_dim = d.pos_dim = d.num_filters = 0;
  auto params = zero_params<double>(d);
  params.theta = RowMatrix<double>::Zero(3, 2);
  params.theta(0, 0) = 10;
  Bag bag;
  bag.pair_id = "x";
  bag.sentences.push_back({{0}, 0, 0});
  bag.observed = {1, 0};
  const std::vector<Vector<double>> vecs = {(Vector<double>(2) << 1.0, 0.0).finished()};
  Hyperparams hp;
  hp.mu = 1;
  hp.alpha_t = hp.alpha_d = 5;
  hp.loss_variant = LossVariant::relation_hamming;
  Pcg32 rng(1);
  const auto res = hinge_gradient(bag, params, hp, exact_solver(), true, rng, &vecs);
  CHECK(res.gold.z == res.violator.z);
  CHECK(res.violator.d_star == bag.observed);
  CHECK(res.hinge == 0.0);
  CHECK(res.grads.theta.isZero());

  TrainState state{params, 0, 0, Pcg32(1)};
  hinge_step(bag, state, hp, exact_solver(), true, &vecs);
  CHECK(state.params.theta == params.theta);
}

TEST_CASE("hinge is non-negative under exact inference") {
  Pcg32 rng(2);
  for (int trial = 0; trial < 150; ++trial) {
    const int R = 1 + trial % 3;
    const auto params = glorot_init<double>(tiny_dims(12, R), rng);
    const Bag bag = random_bag(rng, 12, R, 4);
    Hyperparams hp;
    hp.mu = 0.5 + (trial % 5);
    hp.alpha_t = 0.3 * (1 + trial % 4);
    hp.alpha_d = 0.2 * (1 + trial % 3);
    hp.loss_variant = static_cast<LossVariant>(trial % 3);
    Pcg32 solver_rng(trial);
    const auto res = hinge_gradient(bag, params, hp, exact_solver(), true, solver_rng);
    CHECK(res.hinge >= -1e-9);
  }
}

TEST_CASE("hinge gradient matches the subgradient of the two fixed configurations") {
  Pcg32 rng(3);
  int nonzero = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int R = 2;
    auto params = glorot_init<double>(tiny_dims(10, R), rng);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index i = 0; i < params.theta.size(); ++i) params.theta.data()[i] = g(rng);
    const Bag bag = random_bag(rng, 10, R, 4);
    Hyperparams hp;
    hp.mu = 1;
    hp.alpha_t = 0.7;
    hp.alpha_d = 0.4;
    hp.beta1 = 2;
    hp.beta2 = 3;
    Pcg32 solver_rng(trial);
    const auto res = hinge_gradient(bag, params, hp, exact_solver(), true, solver_rng);
    if (!(res.hinge > 0)) continue;
    ++nonzero;
    CHECK(res.weight == bag_weight(bag.size(), hp));

    // weight * (S(z_e) - S(z_g)) differentiated numerically with z held fixed.
    auto fixed_objective = [&] {
      double v = 0;
      for (int i = 0; i < bag.size(); ++i) {
        const auto x = encode(bag.sentences[i], params).x;
        v += x.dot(params.theta.row(res.violator.z[i])) - x.dot(params.theta.row(res.gold.z[i]));
      }
      return res.weight * v;
    };
    CHECK(oracle::relative_error(res.grads.theta, oracle::finite_difference(params.theta, fixed_objective)) <= 1e-5);
    CHECK(oracle::relative_error(res.grads.filters, oracle::finite_difference(params.filters, fixed_objective)) <= 1e-5);
    CHECK(oracle::relative_error(res.grads.word_emb, oracle::finite_difference(params.word_emb, fixed_objective)) <= 1e-5);
  }
  CHECK(nonzero > 5);
}

TEST_CASE("hinge_step moves parameters against the gradient") {
  Pcg32 rng(4);
  const auto params = glorot_init<double>(tiny_dims(10, 2), rng);
  Bag bag = random_bag(rng, 10, 2, 4);
  Hyperparams hp;
  hp.learning_rate = 0.25;
  hp.mu = 1;
  hp.alpha_t = hp.alpha_d = 1;
  bag.observed = {1, 1};
  Pcg32 a(7), b(7);
  const auto res = hinge_gradient(bag, params, hp, exact_solver(), false, a);
  TrainState state{params, 0, 0, b};
  hinge_step(bag, state, hp, exact_solver(), false, nullptr);
  if (res.hinge > 0) {
    CHECK(state.params.theta.isApprox(params.theta - 0.25 * res.grads.theta));
    CHECK(state.params.filters.isApprox(params.filters - 0.25 * res.grads.filters));
  } else {
    CHECK(state.params == params);
  }
}

TEST_CASE("bag-size weighting scales the gradient") {
  Pcg32 rng(5);
  auto params = glorot_init<double>(tiny_dims(10, 1), rng);
  Bag bag;
  bag.pair_id = "big";
  for (int i = 0; i < 20; ++i) bag.sentences.push_back({{1, 2, 3}, 0, 2});
  bag.observed = {1};
  Hyperparams hp;
  hp.mu = 1;
  hp.alpha_t = hp.alpha_d = 1;
  hp.loss_variant = LossVariant::relation_hamming;
  hp.beta1 = 10;
  hp.beta2 = 40;
  // NA dominates, so the constrained solution pays for one relation mention.
  params.theta.row(1).setConstant(1.0);
  params.theta.row(0).setConstant(-1.0);
  SolverConfig local;
  Pcg32 a(1), b(1);
  const auto weighted = hinge_gradient(bag, params, hp, local, true, a);
  const auto plain = hinge_gradient(bag, params, hp, local, false, b);
  REQUIRE(plain.hinge > 0);
  CHECK(weighted.weight == 0.5);
  CHECK(plain.weight == 1.0);
  CHECK(weighted.grads.theta.isApprox(0.5 * plain.grads.theta));
}

TEST_CASE("hard_constraint mode raises both penalties") {
  Hyperparams hp;
  const auto h = effective_hyperparams(hp, ModelMode::hard_constraint);
  CHECK(h.alpha_t == kHardConstraintPenalty);
  CHECK(h.alpha_d == kHardConstraintPenalty);
  CHECK(effective_hyperparams(hp, ModelMode::nmar) == hp);
  CHECK(parse_model_mode("hard_constraint") == ModelMode::hard_constraint);
  CHECK_THROWS_AS(parse_model_mode("soft"), std::invalid_argument);
}

TEST_CASE("mira_tau") {
  SUBCASE("uncapped updates land exactly on unit margin") {
    Pcg32 rng(6);
    std::normal_distribution<double> g;
    int checked = 0;
    while (checked < 100) {
      RowMatrix<double> theta(3, 5);
      for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] = g(rng);
      Vector<double> x(5);
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = g(rng);
      const double margin = theta.row(0).dot(x) - theta.row(1).dot(x);
      bool capped = true;
      const double tau = mira_tau(margin, x.squaredNorm(), 1e9, &capped);
      if (tau == 0) continue;
      CHECK_FALSE(capped);
      theta.row(0) += tau * x.transpose();
      theta.row(1) -= tau * x.transpose();
      CHECK(std::abs(theta.row(0).dot(x) - theta.row(1).dot(x) - 1.0) <= 1e-9);
      ++checked;
    }
  }
  SUBCASE("capped updates use the cap exactly") {
    bool capped = false;
    CHECK(mira_tau(-100, 0.5, 0.75, &capped) == 0.75);
    CHECK(capped);
  }
  SUBCASE("satisfied margins and zero vectors skip the update") {
    CHECK(mira_tau(1.0, 2.0, 1.0) == 0.0);
    CHECK(mira_tau(3.0, 2.0, 1.0) == 0.0);
    CHECK(mira_tau(-1.0, 0.0, 1.0) == 0.0);
  }
}

TEST_CASE("mira_step applies the per-mention update") {
  auto data = separable_corpus(1, 3, 8);
  TrainerConfig cfg;
  cfg.trainer = TrainerKind::mira;
  cfg.representation = Representation::fixed_vectors;
  auto params = initial_params(data.corpus, cfg, data.vectors.dim);
  // Make the argmax wrong so an update happens.
  const int y = *data.corpus.bags[0].gold[0];
  const int wrong = (y + 1) % 4;
  params.theta.row(wrong).setConstant(0.5);
  TrainState state{params, 0, 0, Pcg32(1)};
  Hyperparams hp;
  hp.mira_cap = 100;
  const auto res = mira_step(data.corpus.bags[0], state, hp, exact_solver(), data.vectors.vectors[0]);
  REQUIRE(res.labels.mistakes == 1);
  const auto& x = data.vectors.vectors[0][0];
  const int a = res.labels.z_kb[0], b = res.labels.z_hat[0];
  CHECK(std::abs(state.params.theta.row(a).dot(x) - state.params.theta.row(b).dot(x) - 1.0) <= 1e-9);
}

TEST_CASE("perceptron converges on separable data") {
  auto data = separable_corpus(200, 3, 9);
  TrainerConfig cfg;
  cfg.trainer = TrainerKind::perceptron;
  cfg.representation = Representation::fixed_vectors;
  cfg.epochs = 30;
  cfg.solver = exact_solver();
  Hyperparams hp;
  hp.mu = 1;
  hp.alpha_t = hp.alpha_d = 100;
  TrainInputs in{&data.corpus, nullptr, &data.vectors, nullptr};
  const auto res = train(in, cfg, hp);
  REQUIRE(!res.epochs.empty());
  CHECK(res.epochs.back().mean_loss == 0.0);
  const auto preds = predict_mentions(data.corpus, res.params, &data.vectors);
  int correct = 0;
  for (const auto& p : preds) correct += p.relation == *data.corpus.bags[p.bag].gold[p.sentence];
  CHECK(correct == 200);
}

TEST_CASE("trainer configuration checks") {
  TrainerConfig cfg;
  cfg.trainer = TrainerKind::perceptron;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.representation = Representation::fixed_vectors;
  CHECK_NOTHROW(cfg.validate());
  cfg.epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK(parse_trainer("mira") == TrainerKind::mira);
  CHECK_THROWS_AS(parse_trainer("adam"), std::invalid_argument);
}

TEST_CASE("train") {
  SynthSpec spec;
  spec.num_bags = 60;
  spec.num_entities = 100;
  spec.vocab_size = 30;
  spec.num_relations = 3;
  spec.seed = 4;
  const auto train_set = generate_synthetic(spec);
  spec.seed = 5;
  spec.num_bags = 30;
  const auto dev_set = generate_synthetic(spec);
  TrainerConfig cfg;
  cfg.dims.word_dim = 4;
  cfg.dims.pos_dim = 2;
  cfg.dims.num_filters = 4;
  cfg.epochs = 2;
  Hyperparams hp;
  TrainInputs in{&train_set.corpus, &dev_set.corpus};

  SUBCASE("zero epochs returns the initialization") {
    cfg.epochs = 0;
    const auto res = train(in, cfg, hp);
    CHECK(res.params == initial_params(train_set.corpus, cfg));
    CHECK(res.epochs.empty());
    CHECK(res.best_epoch == 0);
  }
  SUBCASE("same seed gives identical parameters and one metric per epoch") {
    std::vector<std::string> lines;
    const auto a = train(in, cfg, hp, [&](const EpochMetrics& m) { lines.push_back(format_epoch_line(m)); });
    const auto b = train(in, cfg, hp);
    CHECK(a.params == b.params);
    CHECK(lines.size() == 2);
    CHECK(lines[0].rfind("epoch=1 mean_loss=", 0) == 0);
    CHECK(a.best_epoch >= 1);
    cfg.seed = 2;
    CHECK_FALSE(train(in, cfg, hp).params == a.params);
  }
  SUBCASE("the returned parameters belong to the best dev epoch") {
    cfg.epochs = 3;
    const auto res = train(in, cfg, hp);
    double best = -1;
    for (const auto& m : res.epochs) best = std::max(best, *m.dev_auc);
    CHECK(*res.epochs[res.best_epoch - 1].dev_auc == best);
    const auto preds = predict_mentions(dev_set.corpus, res.params);
    CHECK(sentential_pr(preds, dev_set.corpus).auc == doctest::Approx(best).epsilon(1e-12));
  }
  SUBCASE("non-finite values abort with a diagnostic") {
    auto data = separable_corpus(5, 2, 10);
    for (auto& bag_vecs : data.vectors.vectors) bag_vecs[0] *= 1e300;
    TrainerConfig pc;
    pc.trainer = TrainerKind::perceptron;
    pc.representation = Representation::fixed_vectors;
    pc.epochs = 5;
    TrainInputs pin{&data.corpus, nullptr, &data.vectors, nullptr};
    CHECK_THROWS_AS(train(pin, pc, hp), NonFiniteError);
  }
  SUBCASE("empty corpus is rejected") {
    Corpus empty = train_set.corpus;
    empty.bags.clear();
    TrainInputs ein{&empty};
    CHECK_THROWS_AS(train(ein, cfg, hp), std::invalid_argument);
  }
}
