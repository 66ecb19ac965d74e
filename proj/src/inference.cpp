#include "nmar/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <unordered_map>

namespace nmar {

namespace {

constexpr double kImproveEps = 1e-12;

double flip_cost(const MapProblem& p, bool t) {
  // Penalty for d*_j != t_j: an extraction without a fact, or a fact without one.
  return t ? p.penalties.alpha_d : p.penalties.alpha_t;
}

// Separable per-relation contribution to G, with the chosen d*_j.
double relation_term(const MapProblem& p, int j, bool t, std::uint8_t* d_out = nullptr) {
  const bool d = p.observed[j];
  if (p.mode == MapMode::constrained) {
    if (d_out) *d_out = d;
    return p.mu * agreement_logpenalty(t, d, p.penalties);
  }
  const double loss_weight = p.loss_variant == LossVariant::relation_hamming ? 1.0 : 0.0;
  const double keep = p.mu * agreement_logpenalty(t, d, p.penalties);
  const double flip = p.mu * agreement_logpenalty(t, !d, p.penalties) + loss_weight;
  if (flip > keep) {
    if (d_out) *d_out = !d;
    return flip;
  }
  if (d_out) *d_out = d;
  return keep;
}

bool zero_one_augmented(const MapProblem& p) {
  return p.mode == MapMode::loss_augmented && p.loss_variant == LossVariant::zero_one;
}

// G for the 0/1 loss when t equals the observed facts: either keep d* = d, or
// pay the cheapest single disagreement to collect loss 1.
double zero_one_matched_value(const MapProblem& p, int* flip_index = nullptr) {
  double best = 0;
  int best_j = -1;
  for (int j = 0; j < p.relations(); ++j) {
    const double v = 1.0 - p.mu * flip_cost(p, p.observed[j]);
    if (v > best) {
      best = v;
      best_j = j;
    }
  }
  if (flip_index) *flip_index = best_j;
  return best;
}

int mismatches(const MapProblem& p, const BitVector& t) {
  int k = 0;
  for (int j = 0; j < p.relations(); ++j) k += t[j] != p.observed[j];
  return k;
}

}  // namespace

MapProblem make_map_problem(const ScoreTable& raw_scores, const BitVector& observed, double mu,
                            const Penalties& penalties, MapMode mode, LossVariant variant) {
  const int R = static_cast<int>(observed.size());
  if (raw_scores.cols() != R + 1)
    throw std::invalid_argument("score table needs R + 1 = " + std::to_string(R + 1) + " columns, got " +
                                std::to_string(raw_scores.cols()));
  if (!raw_scores.allFinite()) throw std::invalid_argument("score table has non-finite entries");
  MapProblem p{raw_scores, observed, mu, penalties, mode, variant};
  if (mode == MapMode::loss_augmented && variant == LossVariant::mention_hamming)
    for (int r = 0; r < R; ++r)
      if (!observed[r]) p.scores.col(r).array() += 1.0;
  return p;
}

MapProblem make_map_problem(const Bag& bag, const ScoreTable& raw_scores, const Hyperparams& hp,
                            MapMode mode) {
  return make_map_problem(raw_scores, bag.observed, hp.mu, bag_penalties(bag, hp), mode, hp.loss_variant);
}

BitVector solve_d_given_t(const BitVector& t, const MapProblem& p) {
  const int R = p.relations();
  if (p.mode == MapMode::constrained) return p.observed;
  if (!zero_one_augmented(p)) {
    BitVector d(R);
    for (int j = 0; j < R; ++j) relation_term(p, j, t[j], &d[j]);
    return d;
  }
  if (mismatches(p, t) == 0) {
    int j = -1;
    zero_one_matched_value(p, &j);
    BitVector d = p.observed;
    if (j >= 0) d[j] = !d[j];
    return d;
  }
  // Any d* != d earns loss 1; d* = t pays no penalty. Move back toward d where
  // that is free, keeping at least one disagreement.
  BitVector d = t;
  int remaining = mismatches(p, t);
  for (int j = 0; j < R && remaining > 1; ++j) {
    if (t[j] != p.observed[j] && p.mu * flip_cost(p, t[j]) == 0.0) {
      d[j] = p.observed[j];
      --remaining;
    }
  }
  return d;
}

double aggregate_value(const MapProblem& p, const BitVector& t) {
  if (zero_one_augmented(p)) return mismatches(p, t) > 0 ? 1.0 : zero_one_matched_value(p);
  double g = 0;
  for (int j = 0; j < p.relations(); ++j) g += relation_term(p, j, t[j]);
  return g;
}

double aggregate_bound(const MapProblem& p, const BitVector& on) {
  const int R = p.relations();
  if (zero_one_augmented(p)) {
    // G never exceeds 1, and 1 is reachable unless `on` already fixes t = d.
    const bool saturated = std::all_of(on.begin(), on.end(), [](auto b) { return b != 0; });
    return saturated ? aggregate_value(p, on) : 1.0;
  }
  double g = 0;
  for (int j = 0; j < R; ++j)
    g += on[j] ? relation_term(p, j, true) : std::max(relation_term(p, j, false), relation_term(p, j, true));
  return g;
}

double objective(const MapProblem& p, const std::vector<int>& z) {
  if (static_cast<int>(z.size()) != p.mentions()) throw std::invalid_argument("objective: labeling size mismatch");
  double s = 0;
  for (int i = 0; i < p.mentions(); ++i) s += p.scores(i, z[i]);
  return s + aggregate_value(p, implied_t(z, p.relations()));
}

MapSolution make_solution(const MapProblem& p, std::vector<int> z, bool optimal) {
  MapSolution sol;
  const BitVector t = implied_t(z, p.relations());
  sol.d_star = solve_d_given_t(t, p);
  sol.objective = objective(p, z);
  sol.z = std::move(z);
  sol.optimal = optimal;
  return sol;
}

// ---------------------------------------------------------------------------

MapSolution exhaustive_map(const MapProblem& p, const ExhaustiveOptions& opts) {
  const int n = p.mentions();
  const int L = p.relations() + 1;
  if (std::pow(static_cast<double>(L), n) > opts.budget)
    throw BudgetExceeded("exhaustive_map: " + std::to_string(L) + "^" + std::to_string(n) +
                         " configurations exceed the budget");
  std::vector<int> z(n, 0), best_z;
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    const double v = objective(p, z);
    if (v > best) {
      best = v;
      best_z = z;
    }
    int i = n - 1;
    while (i >= 0 && ++z[i] == L) z[i--] = 0;
    if (i < 0) break;
  }
  return make_solution(p, std::move(best_z), true);
}

// ---------------------------------------------------------------------------

namespace {

struct SearchNode {
  double g = 0;  // assigned unary scores
  double f = 0;
  int parent = -1;
  int label = -1;
  int depth = 0;
  std::string on;  // aggregate bits of the prefix, one byte per relation
};

}  // namespace

std::optional<MapSolution> astar_map(const MapProblem& p, const AStarOptions& opts, AStarStats* stats) {
  const int n = p.mentions();
  const int R = p.relations();
  const int L = R + 1;

  std::vector<double> suffix(n + 1, 0.0);
  for (int i = n - 1; i >= 0; --i) suffix[i] = suffix[i + 1] + p.scores.row(i).maxCoeff();

  auto bits = [R](const std::string& on) {
    BitVector b(R);
    for (int j = 0; j < R; ++j) b[j] = on[j] != 0;
    return b;
  };
  auto priority = [&](const SearchNode& node) {
    const BitVector t = bits(node.on);
    return node.g + suffix[node.depth] + (node.depth == n ? aggregate_value(p, t) : aggregate_bound(p, t));
  };

  std::vector<SearchNode> arena;
  // Prefixes reaching the same (depth, aggregate bits) share every completion,
  // so only the best-scoring one is kept.
  std::unordered_map<std::string, double> best_g;
  auto key = [](const SearchNode& node) { return std::to_string(node.depth) + ':' + node.on; };

  // Larger f first; deeper nodes first among ties; then creation order.
  auto worse = [&arena](int a, int b) {
    const auto& x = arena[a];
    const auto& y = arena[b];
    if (x.f != y.f) return x.f < y.f;
    if (x.depth != y.depth) return x.depth < y.depth;
    return a > b;
  };
  std::priority_queue<int, std::vector<int>, decltype(worse)> open(worse);

  SearchNode root;
  root.on.assign(R, 0);
  root.f = priority(root);
  arena.push_back(root);
  best_g[key(root)] = 0.0;
  open.push(0);

  AStarStats local;
  AStarStats& st = stats ? *stats : local;
  st = {};
  while (!open.empty()) {
    const int id = open.top();
    open.pop();
    const SearchNode node = arena[id];
    if (node.g < best_g[key(node)]) continue;  // superseded
    if (node.depth == n) {
      std::vector<int> z(n);
      for (int cur = id; arena[cur].parent >= 0; cur = arena[cur].parent) z[arena[cur].depth - 1] = arena[cur].label;
      return make_solution(p, std::move(z), true);
    }
    if (++st.expanded > opts.node_cap) return std::nullopt;
    for (int r = 0; r < L; ++r) {
      SearchNode child;
      child.parent = id;
      child.label = r;
      child.depth = node.depth + 1;
      child.g = node.g + p.scores(node.depth, r);
      child.on = node.on;
      if (r < R) child.on[r] = 1;
      const std::string k = key(child);
      auto it = best_g.find(k);
      if (it != best_g.end() && it->second >= child.g) continue;
      best_g[k] = child.g;
      child.f = priority(child);
      arena.push_back(std::move(child));
      open.push(static_cast<int>(arena.size()) - 1);
      ++st.generated;
    }
  }
  throw std::logic_error("astar_map: search space exhausted without a complete labeling");
}

// ---------------------------------------------------------------------------

namespace {

// Incremental state for hill climbing: label counts per relation plus the
// pieces G(t) is computed from.
class Climber {
 public:
  Climber(const MapProblem& p, std::vector<int> z) : p_(p), z_(std::move(z)), count_(p.relations() + 1, 0) {
    zero_one_ = zero_one_augmented(p);
    matched_value_ = zero_one_ ? zero_one_matched_value(p) : 0.0;
    for (int i = 0; i < p.mentions(); ++i) {
      unary_ += p.scores(i, z_[i]);
      ++count_[z_[i]];
    }
    for (int j = 0; j < p.relations(); ++j) {
      const bool t = count_[j] > 0;
      mismatch_ += t != p.observed[j];
      if (!zero_one_) separable_ += relation_term(p, j, t);
    }
  }

  double value() const { return unary_ + aggregate(separable_, mismatch_); }
  const std::vector<int>& z() const { return z_; }

  // Delta of G when relation j toggles from `was` to !was.
  void toggle_effect(int j, bool was, double& sep, int& mism) const {
    if (j >= p_.relations()) return;
    if (!zero_one_) sep += relation_term(p_, j, !was) - relation_term(p_, j, was);
    mism += (!was != static_cast<bool>(p_.observed[j])) - (was != static_cast<bool>(p_.observed[j]));
  }

  double aggregate(double sep, int mism) const {
    if (zero_one_) return mism > 0 ? 1.0 : matched_value_;
    return sep;
  }

  double relabel_delta(int i, int r) const {
    const int old = z_[i];
    double sep = separable_;
    int mism = mismatch_;
    if (old < p_.na() && count_[old] == 1) toggle_effect(old, true, sep, mism);
    if (r < p_.na() && count_[r] == 0) toggle_effect(r, false, sep, mism);
    return p_.scores(i, r) - p_.scores(i, old) + aggregate(sep, mism) - aggregate(separable_, mismatch_);
  }

  // Relabel every mention currently labeled j (j < R) as k.
  double merge_delta(int j, int k) const {
    double unary = 0;
    for (int i = 0; i < p_.mentions(); ++i)
      if (z_[i] == j) unary += p_.scores(i, k) - p_.scores(i, j);
    double sep = separable_;
    int mism = mismatch_;
    toggle_effect(j, true, sep, mism);
    if (k < p_.na() && count_[k] == 0) toggle_effect(k, false, sep, mism);
    return unary + aggregate(sep, mism) - aggregate(separable_, mismatch_);
  }

  void relabel(int i, int r) {
    const int old = z_[i];
    if (old < p_.na() && count_[old] == 1) toggle_effect(old, true, separable_, mismatch_);
    if (r < p_.na() && count_[r] == 0) toggle_effect(r, false, separable_, mismatch_);
    unary_ += p_.scores(i, r) - p_.scores(i, old);
    --count_[old];
    ++count_[r];
    z_[i] = r;
  }

  void merge(int j, int k) {
    for (int i = 0; i < p_.mentions(); ++i)
      if (z_[i] == j) relabel(i, k);
  }

  int count(int r) const { return count_[r]; }

 private:
  const MapProblem& p_;
  std::vector<int> z_;
  std::vector<int> count_;
  double unary_ = 0;
  double separable_ = 0;
  int mismatch_ = 0;
  bool zero_one_ = false;
  double matched_value_ = 0;
};

struct Move {
  enum Kind { none, relabel, merge } kind = none;
  int a = 0;
  int b = 0;
  double delta = kImproveEps;
};

std::vector<int> climb(const MapProblem& p, std::vector<int> z, const LocalSearchOptions& opts) {
  Climber c(p, std::move(z));
  const int n = p.mentions();
  const int R = p.relations();
  while (true) {
    Move best;
    for (int i = 0; i < n; ++i)
      for (int r = 0; r <= R; ++r) {
        if (r == c.z()[i]) continue;
        const double d = c.relabel_delta(i, r);
        if (d > best.delta) best = {Move::relabel, i, r, d};
      }
    for (int j = 0; j < R; ++j) {
      if (c.count(j) == 0) continue;
      for (int k = 0; k <= R; ++k) {
        if (k == j) continue;
        const double d = c.merge_delta(j, k);
        if (d > best.delta) best = {Move::merge, j, k, d};
      }
    }
    if (best.kind == Move::none) break;
    const double before = c.value();
    if (best.kind == Move::relabel) c.relabel(best.a, best.b);
    else c.merge(best.a, best.b);
    if (opts.on_move) opts.on_move(c.z(), before, best.delta);
  }
  return c.z();
}

}  // namespace

MapSolution local_search_map(const MapProblem& p, Pcg32& rng, const LocalSearchOptions& opts) {
  const int n = p.mentions();
  const int R = p.relations();
  std::uniform_int_distribution<int> label(0, R);
  std::vector<int> best_z;
  double best = -std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
    std::vector<int> z(n);
    if (restart == 0) {
      for (int i = 0; i < n; ++i) p.scores.row(i).maxCoeff(&z[i]);
    } else {
      for (int i = 0; i < n; ++i) z[i] = label(rng);
    }
    z = climb(p, std::move(z), opts);
    const double v = objective(p, z);
    if (v > best || (v == best && z < best_z)) {
      best = v;
      best_z = std::move(z);
    }
  }
  return make_solution(p, std::move(best_z), false);
}

std::string_view to_string(SolverKind k) {
  switch (k) {
    case SolverKind::exhaustive: return "exhaustive";
    case SolverKind::astar: return "astar";
    case SolverKind::local_search: return "local_search";
  }
  return "?";
}

SolverKind parse_solver(std::string_view name) {
  if (name == "exhaustive") return SolverKind::exhaustive;
  if (name == "astar") return SolverKind::astar;
  if (name == "local_search") return SolverKind::local_search;
  throw std::invalid_argument("unknown solver '" + std::string(name) + "'");
}

MapSolution solve_map(const MapProblem& p, const SolverConfig& cfg, Pcg32& rng) {
  switch (cfg.kind) {
    case SolverKind::exhaustive:
      return exhaustive_map(p, {cfg.exhaustive_budget});
    case SolverKind::astar:
      if (auto sol = astar_map(p, {cfg.astar_node_cap})) return *sol;
      break;
    case SolverKind::local_search:
      break;
  }
  LocalSearchOptions ls;
  ls.restarts = cfg.restarts;
  return local_search_map(p, rng, ls);
}

}  // namespace nmar
