#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace labseq {

inline constexpr int kBootstrapResamples = 2000;
inline constexpr double kDecisionThreshold = 0.5;

struct ScoredSet {
  std::vector<std::string> patient_ids;
  std::vector<double> scores;
  std::vector<int> labels;

  std::size_t size() const { return scores.size(); }
  void validate() const;  // throws on ragged lists or labels outside {0,1}
};

/// Trapezoidal area under the ROC traced through distinct score thresholds.
/// Throws Error{"one_class"} if only one label is present.
double auc_trapezoid(const ScoredSet& s);

/// Mann-Whitney form: P(score_pos > score_neg) + 0.5 P(tie), by enumerating pairs.
double auc_pairwise(const ScoredSet& s);

/// Row indices of bootstrap resample `r`; the same draw is used for every
/// bootstrap statistic computed with the same seed.
std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, int resample);

/// Linear-interpolation quantile (Hyndman-Fan type 7) of unsorted values.
double quantile(std::vector<double> values, double q);

struct BootstrapCi {
  double lo = 0.0;
  double hi = 0.0;
  int drawn = 0;    // resamples attempted
  int skipped = 0;  // one-class resamples excluded from the percentiles
};

/// Percentile 95% CI of the AUC over unstratified patient resamples.
/// Throws Error{"bootstrap_degenerate"} if more than 10% of resamples are one-class.
BootstrapCi bootstrap_auc_ci(const ScoredSet& s, int resamples = kBootstrapResamples,
                             std::uint64_t seed = 0);

struct CellCi {
  long lo = 0;
  long hi = 0;
};

struct ConfusionMatrix {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  CellCi tp_ci, fp_ci, tn_ci, fn_ci;
  double threshold = kDecisionThreshold;
  int resamples = 0;

  long total() const { return tp + fp + tn + fn; }
};

/// Predicts positive iff score >= threshold. Cell CIs are the floor/ceil of the
/// 2.5th/97.5th percentiles of the cell counts over the bootstrap resamples.
ConfusionMatrix confusion_at(const ScoredSet& s, double threshold = kDecisionThreshold,
                             int resamples = kBootstrapResamples, std::uint64_t seed = 0);

struct RocPoint {
  double threshold;  // +inf for the (0,0) sentinel
  double fpr;
  double tpr;
};

/// Staircase through (0,0), one point per distinct score descending, ending at (1,1).
std::vector<RocPoint> roc_points(const ScoredSet& s);

/// Trapezoid area under an explicit list of ROC points.
double area_under(const std::vector<RocPoint>& curve);

}  // namespace labseq
