// Structured hinge training with subgradients through the encoder, plus the
// perceptron and MIRA trainers over fixed sentence vectors.
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmar/data.hpp"
#include "nmar/encoder.hpp"
#include "nmar/inference.hpp"
#include "nmar/model.hpp"
#include "nmar/random.hpp"

namespace nmar {

enum class TrainerKind { sgd_hinge, perceptron, mira };
/// nmar keeps finite KB-disagreement penalties; hard_constraint approximates
/// an infinite penalty (MultiR-style deterministic agreement).
enum class ModelMode { nmar, hard_constraint };

std::string_view to_string(TrainerKind k);
TrainerKind parse_trainer(std::string_view name);
std::string_view to_string(ModelMode m);
ModelMode parse_model_mode(std::string_view name);

inline constexpr double kHardConstraintPenalty = 1e6;

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainerConfig {
  TrainerKind trainer = TrainerKind::sgd_hinge;
  ModelMode model_mode = ModelMode::nmar;
  Representation representation = Representation::learned_pcnn;
  int epochs = 5;
  std::uint64_t seed = 1;
  bool weighting = true;
  SolverConfig solver;
  EncoderDims dims;  // vocab_size and num_relations are taken from the corpus

  void validate() const;
};

/// Hyperparameters with the model mode applied to the penalties.
Hyperparams effective_hyperparams(const Hyperparams& hp, ModelMode mode);

struct TrainState {
  EncoderParams<double> params;
  int epoch = 0;
  double running_loss = 0;
  Pcg32 rng;
};

struct HingeResult {
  double hinge = 0;   // L_SH before weighting
  double weight = 1;  // bag-size weight applied to the gradient
  MapSolution gold;      // best KB-consistent configuration
  MapSolution violator;  // loss-augmented maximizer
  EncoderParams<double> grads;  // gradient of weight * L_SH; all zero when hinge <= 0
};

/// Runs both MAP problems for a bag and returns the weighted subgradient of
/// the structured hinge. Mentions labeled identically in both solutions
/// contribute nothing.
HingeResult hinge_gradient(const Bag& bag, const EncoderParams<double>& params, const Hyperparams& hp,
                           const SolverConfig& solver, bool weighting, Pcg32& rng,
                           const std::vector<Vector<double>>* fixed = nullptr);

/// One SGD step on a bag: params -= learning_rate * weight * subgradient.
HingeResult hinge_step(const Bag& bag, TrainState& state, const Hyperparams& hp, const SolverConfig& solver,
                       bool weighting, const std::vector<Vector<double>>* fixed = nullptr);

struct PerceptronResult {
  std::vector<int> z_kb;   // constrained MAP
  std::vector<int> z_hat;  // per-mention argmax ignoring the KB
  int mistakes = 0;        // mentions where the two differ
};

/// theta_j += F_j(x, z_kb) - F_j(x, z_hat).
PerceptronResult perceptron_step(const Bag& bag, TrainState& state, const Hyperparams& hp,
                                 const SolverConfig& solver, const std::vector<Vector<double>>& vectors);

struct MiraResult {
  PerceptronResult labels;
  std::vector<double> taus;  // per mention; 0 where skipped
  std::vector<bool> capped;
};

/// Per-mention passive-aggressive update with step capped at hp.mira_cap.
MiraResult mira_step(const Bag& bag, TrainState& state, const Hyperparams& hp, const SolverConfig& solver,
                     const std::vector<Vector<double>>& vectors);

/// Step size for one mention: min(C, (1 - margin) / (2 |x|^2)), or 0 when the
/// margin is already met or x is zero. Sets capped when C binds.
double mira_tau(double margin, double x_sq_norm, double cap, bool* capped = nullptr);

struct EpochMetrics {
  int epoch = 0;
  double mean_loss = 0;
  std::optional<double> dev_auc;
};

struct TrainResult {
  EncoderParams<double> params;  // best epoch by dev AUC, else the last
  std::vector<EpochMetrics> epochs;
  std::optional<double> initial_dev_auc;
  int best_epoch = 0;
};

struct TrainInputs {
  const Corpus* train = nullptr;
  const Corpus* dev = nullptr;  // optional, needs gold labels for AUC
  const FixedVectors* train_vectors = nullptr;
  const FixedVectors* dev_vectors = nullptr;
};

/// Initial parameters: Glorot for the encoder, zero theta for the
/// perceptron-style trainers.
EncoderParams<double> initial_params(const Corpus& corpus, const TrainerConfig& cfg, int fixed_dim = 0);

std::string format_epoch_line(const EpochMetrics& m);

TrainResult train(const TrainInputs& in, const TrainerConfig& cfg, const Hyperparams& hp,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace nmar
