// MAP inference for the two maximizations inside the structured hinge:
// the KB-constrained problem (d fixed to the observed facts) and the
// loss-augmented problem (d* free, task loss added).
//
// Every objective has the form  sum_i S[i][z_i] + G(t)  with t = OR(z), where
// G(t) already maximizes over d*. The mention-level loss is folded into S,
// which is exact because it decomposes over mentions.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "nmar/model.hpp"
#include "nmar/random.hpp"

namespace nmar {

enum class MapMode { constrained, loss_augmented };

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MapProblem {
  ScoreTable scores;  // n x (R + 1), NA last; mention loss folded in when applicable
  BitVector observed;
  double mu = 0;
  Penalties penalties;
  MapMode mode = MapMode::constrained;
  LossVariant loss_variant = LossVariant::mention_hamming;

  int mentions() const { return static_cast<int>(scores.rows()); }
  int relations() const { return static_cast<int>(observed.size()); }
  int na() const { return relations(); }
};

/// Builds a problem from raw mention scores (x_i . theta_r). In loss-augmented
/// mode with the mention variant, 1 is added to every unobserved relation column.
MapProblem make_map_problem(const ScoreTable& raw_scores, const BitVector& observed, double mu,
                            const Penalties& penalties, MapMode mode, LossVariant variant);
MapProblem make_map_problem(const Bag& bag, const ScoreTable& raw_scores, const Hyperparams& hp,
                            MapMode mode);

struct MapSolution {
  std::vector<int> z;
  BitVector d_star;
  double objective = 0;
  bool optimal = false;

  Assignment assignment() const { return Assignment(z, d_star); }
};

/// Best d* for an aggregate vector t: the observed d in constrained mode,
/// otherwise the maximizer of mu * sum log phi_A(t, d*) + loss(d*). Ties go to
/// the d* closest to the observed facts.
BitVector solve_d_given_t(const BitVector& t, const MapProblem& problem);

/// G(t): the KB-coupling part of the objective at the best d*.
double aggregate_value(const MapProblem& problem, const BitVector& t);

/// Upper bound of G over all t that contain `on` (relations already extracted).
double aggregate_bound(const MapProblem& problem, const BitVector& on);

/// Objective of a full mention labeling under the problem.
double objective(const MapProblem& problem, const std::vector<int>& z);

MapSolution make_solution(const MapProblem& problem, std::vector<int> z, bool optimal);

struct ExhaustiveOptions {
  double budget = 1e6;  // max (R+1)^n
};

/// Enumerates every z in lexicographic order; the first maximizer wins ties.
MapSolution exhaustive_map(const MapProblem& problem, const ExhaustiveOptions& opts = {});

struct AStarOptions {
  std::size_t node_cap = 200000;
};

struct AStarStats {
  std::size_t expanded = 0;
  std::size_t generated = 0;
};

/// Best-first search over left-to-right labelings. Returns nullopt when the
/// expansion cap is hit, so callers can fall back to local search.
std::optional<MapSolution> astar_map(const MapProblem& problem, const AStarOptions& opts = {},
                                     AStarStats* stats = nullptr);

struct LocalSearchOptions {
  int restarts = 30;
  /// Called after each accepted move with the new labeling, the objective
  /// before the move and the incrementally computed delta.
  std::function<void(const std::vector<int>&, double, double)> on_move;
};

/// Steepest-ascent hill climbing with random restarts. Restart 0 starts from
/// the per-mention argmax; the rest from uniform random labelings. Moves:
/// relabel one mention; relabel every mention of relation j to NA; relabel
/// every mention of relation j to another relation k.
MapSolution local_search_map(const MapProblem& problem, Pcg32& rng, const LocalSearchOptions& opts = {});

enum class SolverKind { exhaustive, astar, local_search };

std::string_view to_string(SolverKind k);
SolverKind parse_solver(std::string_view name);

struct SolverConfig {
  SolverKind kind = SolverKind::local_search;
  int restarts = 30;
  std::size_t astar_node_cap = 200000;
  double exhaustive_budget = 1e6;
};

/// Dispatches to a solver. A* falls back to local search on overflow.
MapSolution solve_map(const MapProblem& problem, const SolverConfig& cfg, Pcg32& rng);

}  // namespace nmar
