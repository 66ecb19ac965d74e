#include <random>

#include "doctest.h"
#include "nmar/model.hpp"
#include "nmar/random.hpp"

using namespace nmar;

namespace {

Bag bag_with(int n, BitVector observed, long head_freq = 0, long tail_freq = 0) {
  Bag b;
  b.pair_id = "a|b";
  for (int i = 0; i < n; ++i) b.sentences.push_back({{0, 1}, 0, 1});
  b.observed = std::move(observed);
  b.head_freq = head_freq;
  b.tail_freq = tail_freq;
  return b;
}

}  // namespace

TEST_CASE("Pcg32 matches the reference output stream") {
  Pcg32 rng(42, 54);
  const std::uint32_t expected[] = {0xa15c02b7, 0x7b47f409, 0xba1d3330, 0x83d2f293, 0xbfa4784b, 0xcbed606e};
  for (auto e : expected) CHECK(rng() == e);
}

TEST_CASE("implied_t") {
  CHECK(implied_t({4, 4}, 4) == BitVector{0, 0, 0, 0});
  CHECK(implied_t({2, 4, 2}, 4) == BitVector{0, 0, 1, 0});
  CHECK_THROWS_AS(implied_t({5}, 4), std::out_of_range);

  SUBCASE("the OR indicator is 1 only at the implied vector") {
    Pcg32 rng(1);
    for (int trial = 0; trial < 50; ++trial) {
      const int R = 1 + trial % 4;
      std::uniform_int_distribution<int> label(0, R);
      std::vector<int> z(1 + trial % 5);
      for (auto& v : z) v = label(rng);
      const BitVector t = implied_t(z, R);
      int satisfied = 0;
      for (int mask = 0; mask < (1 << R); ++mask) {
        bool ok = true;
        for (int j = 0; j < R; ++j) {
          const bool any = std::find(z.begin(), z.end(), j) != z.end();
          ok = ok && (((mask >> j) & 1) == static_cast<int>(any));
        }
        if (ok) {
          ++satisfied;
          for (int j = 0; j < R; ++j) CHECK(t[j] == ((mask >> j) & 1));
        }
      }
      CHECK(satisfied == 1);
    }
  }
}

TEST_CASE("Assignment derives t from z") {
  const Assignment a({1, 3, 1}, {0, 1, 0});
  CHECK(a.t() == BitVector{0, 1, 0});
  CHECK(a.num_relations() == 3);
  CHECK_THROWS_AS(Assignment({3}, {0, 0}), std::out_of_range);
}

TEST_CASE("agreement_logpenalty") {
  const Penalties p{5, 3};
  CHECK(agreement_logpenalty(true, true, p) == 0.0);
  CHECK(agreement_logpenalty(false, false, p) == 0.0);
  CHECK(agreement_logpenalty(false, true, p) == -5.0);
  CHECK(agreement_logpenalty(true, false, p) == -3.0);

  Hyperparams hp;
  hp.alpha_t = 5;
  hp.alpha_d = 3;
  const Bag b = bag_with(1, {1});
  CHECK(agreement_logpenalty(false, true, hp, b) == -5.0);
  CHECK(agreement_logpenalty(true, false, hp, b) == -3.0);
}

TEST_CASE("frequency scaling of penalties") {
  CHECK(frequency_scale(0, 0, 1000) == doctest::Approx(0.1));
  CHECK(frequency_scale(1000, 5000, 1000) == doctest::Approx(1.0));
  CHECK(frequency_scale(1e6, 1e6, 1000) == 1.0);
  CHECK(frequency_scale(30, 900, 1000) == doctest::Approx(std::log(31.0) / std::log(1001.0)));

  Hyperparams hp;
  hp.alpha_t = 4;
  hp.alpha_d = 2;
  hp.freq_scaling = true;
  const Bag b = bag_with(1, {1}, 30, 900);
  const double g = std::log(31.0) / std::log(1001.0);
  const Penalties pen = bag_penalties(b, hp);
  CHECK(pen.alpha_t == doctest::Approx(4 * g));
  CHECK(pen.alpha_d == doctest::Approx(2 * g));
  hp.freq_scaling = false;
  CHECK(bag_penalties(b, hp).alpha_t == 4.0);

  SUBCASE("more popular entities never lower the penalty") {
    double prev = 0;
    for (long f : {0L, 1L, 5L, 50L, 500L, 5000L}) {
      const double s = frequency_scale(f, f, 1000);
      CHECK(s >= prev);
      prev = s;
    }
  }
}

TEST_CASE("joint_logscore") {
  SUBCASE("zero scores with d* = t give zero") {
    const ScoreTable s = ScoreTable::Zero(3, 4);
    const Assignment a({0, 3, 2}, {1, 0, 1});
    CHECK(joint_logscore(s, a, 10, {1, 1}) == 0.0);
  }
  SUBCASE("hand-computed two-mention example") {
    ScoreTable s(2, 3);
    s << 1.5, -0.5, 0.25,
         0.75, 2.0, -1.0;
    // z = [0, NA], d* = [0, 1]: t = [1, 0]; relation 0 extracted but unobserved
    // (-alpha_d), relation 1 observed but not extracted (-alpha_t).
    const Assignment a({0, 2}, {0, 1});
    CHECK(joint_logscore(s, a, 10, {1, 1}) == doctest::Approx(1.5 + (-1.0) - 10 - 10));
    const Assignment b({1, 1}, {0, 1});
    CHECK(joint_logscore(s, b, 10, {1, 1}) == doctest::Approx(-0.5 + 2.0));
  }
  SUBCASE("raising one selected score raises the total by the same amount") {
    Pcg32 rng(3);
    std::normal_distribution<double> g;
    ScoreTable s(4, 4);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = g(rng);
    const Assignment a({2, 0, 3, 2}, {1, 1, 0});
    const double before = joint_logscore(s, a, 2.5, {0.7, 1.3});
    s(2, 3) += 0.375;
    CHECK(joint_logscore(s, a, 2.5, {0.7, 1.3}) == doctest::Approx(before + 0.375).epsilon(1e-14));
  }
  SUBCASE("relabeling one mention changes only the affected penalty terms") {
    Pcg32 rng(4);
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> label(0, 3);
    for (int trial = 0; trial < 100; ++trial) {
      ScoreTable s(4, 4);
      for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = g(rng);
      std::vector<int> z(4);
      for (auto& v : z) v = label(rng);
      const BitVector d{static_cast<uint8_t>(trial & 1), static_cast<uint8_t>((trial >> 1) & 1), 1};
      const Penalties pen{0.8, 1.7};
      const double mu = 1.5;
      const double before = joint_logscore(s, Assignment(z, d), mu, pen);
      const int i = label(rng) % 4;
      const int r = label(rng);
      auto z2 = z;
      z2[i] = r;
      const BitVector t1 = implied_t(z, 3), t2 = implied_t(z2, 3);
      double delta = s(i, r) - s(i, z[i]);
      for (int j = 0; j < 3; ++j)
        if (t1[j] != t2[j]) delta += mu * (agreement_logpenalty(t2[j], d[j], pen) - agreement_logpenalty(t1[j], d[j], pen));
      CHECK(joint_logscore(s, Assignment(z2, d), mu, pen) == doctest::Approx(before + delta).epsilon(1e-12));
    }
  }
  SUBCASE("bag overload scores encodings against theta") {
    EncoderDims dims;
    dims.vocab_size = 3;
    dims.word_dim = 2;
    dims.pos_dim = 1;
    dims.num_filters = 2;
    dims.max_offset = 3;
    dims.num_relations = 2;
    Pcg32 rng(5);
    const auto params = glorot_init<double>(dims, rng);
    Bag b = bag_with(2, {1, 0});
    std::vector<SentenceEncoding<double>> enc;
    for (const auto& s : b.sentences) enc.push_back(encode(s, params));
    Hyperparams hp;
    hp.mu = 3;
    hp.alpha_t = 0.5;
    hp.alpha_d = 0.25;
    const Assignment a({1, 2}, b.observed);
    const double expected = enc[0].x.dot(params.theta.row(1)) + enc[1].x.dot(params.theta.row(2)) - 3 * 0.5 - 3 * 0.25;
    CHECK(joint_logscore(b, enc, params, a, hp) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("loss variants") {
  const BitVector d{1, 0, 0};
  SUBCASE("zero when d* matches and every extraction is observed") {
    const Assignment a({0, 3}, d);
    CHECK(loss(a, d, LossVariant::zero_one) == 0.0);
    CHECK(loss(a, d, LossVariant::relation_hamming) == 0.0);
    CHECK(loss(a, d, LossVariant::mention_hamming) == 0.0);
  }
  SUBCASE("relation hamming counts differing bits") {
    const Assignment a({3}, {1, 0, 1});
    CHECK(loss(a, {0, 0, 1}, LossVariant::relation_hamming) == 1.0);
    CHECK(loss(a, {0, 1, 0}, LossVariant::relation_hamming) == 3.0);
    CHECK(loss(a, {0, 1, 0}, LossVariant::zero_one) == 1.0);
  }
  SUBCASE("mention hamming counts mentions with unobserved relations") {
    const Assignment a({2, 3, 0}, {0, 0, 0});
    CHECK(loss(a, d, LossVariant::mention_hamming) == 1.0);
    const Assignment b({2, 2, 1, 3}, {0, 0, 0});
    CHECK(loss(b, d, LossVariant::mention_hamming) == 3.0);
  }
  SUBCASE("never negative") {
    Pcg32 rng(6);
    std::uniform_int_distribution<int> label(0, 3), bit(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<int> z(3);
      for (auto& v : z) v = label(rng);
      BitVector ds(3), obs(3);
      for (int j = 0; j < 3; ++j) {
        ds[j] = bit(rng);
        obs[j] = bit(rng);
      }
      for (auto v : {LossVariant::zero_one, LossVariant::relation_hamming, LossVariant::mention_hamming})
        CHECK(loss(Assignment(z, ds), obs, v) >= 0.0);
    }
  }
  CHECK(parse_loss_variant("zero_one") == LossVariant::zero_one);
  CHECK(to_string(LossVariant::relation_hamming) == "relation_hamming");
  CHECK_THROWS_AS(parse_loss_variant("hinge"), std::invalid_argument);
}

TEST_CASE("bag_weight") {
  CHECK(bag_weight(5, 10, 40) == 1.0);
  CHECK(bag_weight(20, 10, 40) == 0.5);
  CHECK(bag_weight(50, 10, 40) == 0.04);
  CHECK(bag_weight(10, 10, 40) == 1.0);
  CHECK(bag_weight(40, 10, 40) == 0.25);
  CHECK(bag_weight(1, 10, 40) == 1.0);

  SUBCASE("non-increasing in n") {
    for (double b1 : {10.0, 15.0, 25.0})
      for (double b2 : {b1, 30.0, 40.0}) {
        if (b2 < b1) continue;
        double prev = 1.0;
        for (int n = 1; n <= 200; ++n) {
          const double w = bag_weight(n, b1, b2);
          CHECK(w <= prev);
          CHECK(w > 0.0);
          prev = w;
        }
      }
  }
}

TEST_CASE("Hyperparams validation") {
  Hyperparams hp;
  CHECK_NOTHROW(hp.validate());
  hp.beta1 = 50;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = Hyperparams{};
  hp.alpha_t = -1;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
  hp = Hyperparams{};
  hp.restarts = 0;
  CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
}
