#include "labseq/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "labseq/common.hpp"

namespace labseq {

namespace {

struct Counts {
  long pos = 0;
  long neg = 0;
};

Counts count_labels(const std::vector<int>& labels) {
  Counts c;
  for (int y : labels) (y == 1 ? c.pos : c.neg)++;
  return c;
}

void require_both_classes(const Counts& c) {
  if (c.pos == 0 || c.neg == 0) throw Error("one_class", "AUC needs both positive and negative labels");
}

// Trapezoid AUC over (score, label) pairs; `order` is sorted by descending score.
double trapezoid(const std::vector<double>& scores, const std::vector<int>& labels,
                 const std::vector<std::size_t>& order, Counts c) {
  // Area is accumulated in doubled integer units, exact until the final division.
  double doubled_area = 0.0;
  long tp = 0;
  long fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    long dtp = 0;
    long dfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? dtp : dfp)++;
      ++i;
    }
    doubled_area += static_cast<double>(dfp) * static_cast<double>(2 * tp + dtp);
    tp += dtp;
    fp += dfp;
  }
  return doubled_area / (2.0 * static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

std::vector<std::size_t> descending_order(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

CellCi cell_ci(std::vector<double> values) {
  return CellCi{static_cast<long>(std::floor(quantile(values, 0.025))),
                static_cast<long>(std::ceil(quantile(std::move(values), 0.975)))};
}

}  // namespace

void ScoredSet::validate() const {
  if (scores.size() != labels.size() || (!patient_ids.empty() && patient_ids.size() != scores.size())) {
    throw Error("validation_error", "scored set lists have different lengths");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error("validation_error", "labels must be 0 or 1");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error("validation_error", "scores must be finite");
  }
}

double auc_trapezoid(const ScoredSet& s) {
  s.validate();
  const auto c = count_labels(s.labels);
  require_both_classes(c);
  return trapezoid(s.scores, s.labels, descending_order(s.scores), c);
}

double auc_pairwise(const ScoredSet& s) {
  s.validate();
  const auto c = count_labels(s.labels);
  require_both_classes(c);
  double doubled_wins = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.labels[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s.labels[j] != 0) continue;
      if (s.scores[i] > s.scores[j]) {
        doubled_wins += 2.0;
      } else if (s.scores[i] == s.scores[j]) {
        doubled_wins += 1.0;
      }
    }
  }
  return doubled_wins / (2.0 * static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, std::uint64_t seed, int resample) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(resample)));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("validation_error", "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapCi bootstrap_auc_ci(const ScoredSet& s, int resamples, std::uint64_t seed) {
  s.validate();
  require_both_classes(count_labels(s.labels));
  if (resamples < 1) throw Error("config_error", "resample count must be positive");

  BootstrapCi ci;
  std::vector<double> aucs;
  aucs.reserve(static_cast<std::size_t>(resamples));
  std::vector<double> scores(s.size());
  std::vector<int> labels(s.size());
  for (int r = 0; r < resamples; ++r) {
    ++ci.drawn;
    const auto idx = bootstrap_indices(s.size(), seed, r);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      scores[k] = s.scores[idx[k]];
      labels[k] = s.labels[idx[k]];
    }
    const auto c = count_labels(labels);
    if (c.pos == 0 || c.neg == 0) {
      ++ci.skipped;
      continue;
    }
    aucs.push_back(trapezoid(scores, labels, descending_order(scores), c));
  }
  if (ci.skipped * 10 > resamples) {
    throw Error("bootstrap_degenerate", std::to_string(ci.skipped) + " of " +
                                            std::to_string(resamples) +
                                            " bootstrap resamples had a single class");
  }
  ci.lo = quantile(aucs, 0.025);
  ci.hi = quantile(std::move(aucs), 0.975);
  return ci;
}

ConfusionMatrix confusion_at(const ScoredSet& s, double threshold, int resamples, std::uint64_t seed) {
  s.validate();
  if (s.size() == 0) throw Error("validation_error", "confusion matrix of an empty set");

  auto tally = [&](auto&& index_of, std::size_t n, ConfusionMatrix& m) {
    m.tp = m.fp = m.tn = m.fn = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = index_of(k);
      const bool predicted = s.scores[i] >= threshold;
      const bool actual = s.labels[i] == 1;
      if (predicted && actual) ++m.tp;
      else if (predicted) ++m.fp;
      else if (actual) ++m.fn;
      else ++m.tn;
    }
  };

  ConfusionMatrix out;
  out.threshold = threshold;
  out.resamples = resamples;
  tally([](std::size_t k) { return k; }, s.size(), out);

  if (resamples > 0) {
    std::vector<double> tp, fp, tn, fn;
    for (int r = 0; r < resamples; ++r) {
      const auto idx = bootstrap_indices(s.size(), seed, r);
      ConfusionMatrix m;
      tally([&](std::size_t k) { return idx[k]; }, idx.size(), m);
      tp.push_back(static_cast<double>(m.tp));
      fp.push_back(static_cast<double>(m.fp));
      tn.push_back(static_cast<double>(m.tn));
      fn.push_back(static_cast<double>(m.fn));
    }
    out.tp_ci = cell_ci(std::move(tp));
    out.fp_ci = cell_ci(std::move(fp));
    out.tn_ci = cell_ci(std::move(tn));
    out.fn_ci = cell_ci(std::move(fn));
  }
  return out;
}

std::vector<RocPoint> roc_points(const ScoredSet& s) {
  s.validate();
  const auto c = count_labels(s.labels);
  require_both_classes(c);
  const auto order = descending_order(s.scores);

  std::vector<RocPoint> curve{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  long tp = 0;
  long fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = s.scores[order[i]];
    while (i < order.size() && s.scores[order[i]] == threshold) {
      (s.labels[order[i]] == 1 ? tp : fp)++;
      ++i;
    }
    curve.push_back({threshold, static_cast<double>(fp) / static_cast<double>(c.neg),
                     static_cast<double>(tp) / static_cast<double>(c.pos)});
  }
  return curve;
}

double area_under(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    area += (curve[k].fpr - curve[k - 1].fpr) * (curve[k].tpr + curve[k - 1].tpr) / 2.0;
  }
  return area;
}

}  // namespace labseq
