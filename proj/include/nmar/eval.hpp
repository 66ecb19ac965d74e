// Mention-level prediction and the evaluation protocols built on it:
// sentential PR/AUC against gold mention labels, P@N, held-out
// proposition-level PR against KB facts, the in-KB / out-of-KB breakdown and
// a paired bootstrap test.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "nmar/data.hpp"
#include "nmar/encoder.hpp"
#include "nmar/model.hpp"

namespace nmar {

struct MentionPrediction {
  int bag = 0;
  int sentence = 0;
  int relation = 0;  // NA = R
  double confidence = 0;  // margin of the predicted relation over NA
  bool operator==(const MentionPrediction&) const = default;
};

/// Sentence vectors for a bag: PCNN encodings, or fixed vectors when given.
std::vector<SentenceEncoding<double>> encode_bag(const Bag& bag, const EncoderParams<double>& params,
                                                 const std::vector<Vector<double>>* fixed = nullptr);

/// Argmax relation per sentence over all relations including NA. Ties go to
/// NA, then to the lowest relation id.
std::vector<MentionPrediction> predict_mentions(const Corpus& corpus, const EncoderParams<double>& params,
                                                const FixedVectors* fixed = nullptr);
MentionPrediction predict_from_scores(const Eigen::Ref<const Vector<double>>& scores, int bag, int sentence);

struct PRPoint {
  double confidence = 0;
  double precision = 0;
  double recall = 0;
};

struct PRCurve {
  std::vector<PRPoint> points;  // one per ranked prediction
  double auc = 0;
  int positives = 0;            // recall denominator
};

/// Trapezoidal area over the points, starting from recall 0 at the first
/// point's precision.
double pr_auc(std::span<const PRPoint> points);

struct RankedItem {
  double confidence = 0;
  bool correct = false;
  int bag = 0;
  int index = 0;  // sentence or relation id, for stable tie order
};

/// Sorts by descending confidence (ties by bag then index) and accumulates.
PRCurve rank_curve(std::vector<RankedItem> items, int positives);

/// Non-NA predictions on annotated sentences scored against gold labels.
/// Throws std::invalid_argument when the corpus carries no gold labels.
PRCurve sentential_pr(std::span<const MentionPrediction> preds, const Corpus& gold);

struct PrecisionAtN {
  double precision = 0;
  int considered = 0;
  bool truncated = false;  // fewer than N predictions were available
};

PrecisionAtN p_at_n(std::span<const MentionPrediction> preds, const Corpus& gold, int relation, int n);

/// Proposition-level curve: each (pair, relation) predicted by any mention is
/// scored by its best mention confidence and judged against observed KB facts.
PRCurve heldout_pr(std::span<const MentionPrediction> preds, const Corpus& kb);

struct KbSplit {
  std::optional<PRCurve> in_kb;   // nullopt when the partition has no gold mentions
  std::optional<PRCurve> out_kb;
  int in_gold = 0;
  int out_gold = 0;
};

/// Splits gold mentions (and predictions) by whether their (pair, relation)
/// is an observed KB fact, and computes a sentential curve for each side.
KbSplit in_out_kb_split(std::span<const MentionPrediction> preds, const Corpus& gold);

struct BootstrapResult {
  double p_value = 0;
  double auc_a = 0;
  double auc_b = 0;
  int iterations = 0;
};

/// Resamples annotated sentences with replacement. p is the fraction of
/// resamples in which system B's AUC matches or beats A's, ties counting half.
BootstrapResult paired_bootstrap(std::span<const MentionPrediction> preds_a,
                                 std::span<const MentionPrediction> preds_b, const Corpus& gold,
                                 int iterations = 10000, std::uint64_t seed = 1);

void write_pr_csv(const PRCurve& curve, const std::filesystem::path& path);
void write_predictions(std::span<const MentionPrediction> preds, const Corpus& corpus,
                       const std::filesystem::path& path);
/// Reads predictions written by write_predictions; every sentence of the corpus
/// must be covered exactly once.
std::vector<MentionPrediction> read_predictions(const std::filesystem::path& path, const Corpus& corpus);

}  // namespace nmar
