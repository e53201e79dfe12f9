#include <doctest.h>

#include <cmath>
#include <random>

#include "labseq/eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace labseq;
using testing::error_code;

namespace {

ScoredSet make(std::vector<double> scores, std::vector<int> labels) {
  ScoredSet s;
  s.scores = std::move(scores);
  s.labels = std::move(labels);
  return s;
}

}  // namespace

TEST_CASE("AUC examples") {
  CHECK(auc_trapezoid(make({.9, .8, .2, .1}, {1, 1, 0, 0})) == 1.0);
  CHECK(auc_trapezoid(make({.4, .4, .4, .4}, {1, 0, 1, 0})) == 0.5);
  CHECK(auc_pairwise(make({.7, .7}, {1, 0})) == 0.5);
  CHECK(auc_pairwise(make({.9, .1}, {1, 0})) == 1.0);
  CHECK(error_code([] { auc_trapezoid(make({.1, .2}, {1, 1})); }) == "one_class");
  CHECK(error_code([] { auc_pairwise(make({.1, .2}, {0, 0})); }) == "one_class");
  CHECK(error_code([] { auc_trapezoid(make({.1, .2}, {1, 2})); }) == "validation_error");
}

TEST_CASE("trapezoid, pairwise and oracle agree on random sets with ties") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    auto s = oracles::random_set(rng);
    const double want = oracles::pairwise_auc(s.scores, s.labels);
    CHECK(std::abs(auc_trapezoid(s) - want) <= 1e-12);
    CHECK(std::abs(auc_pairwise(s) - want) <= 1e-12);
    CHECK(std::abs(area_under(roc_points(s)) - want) <= 1e-12);
  }
}

TEST_CASE("AUC is invariant under strictly increasing transforms") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = oracles::random_set(rng);
    auto t = s;
    for (auto& x : t.scores) x = std::exp(3 * x) - 7;
    CHECK(auc_trapezoid(t) == auc_trapezoid(s));
  }
}

TEST_CASE("ROC curve shape") {
  auto perfect = roc_points(make({.9, .8, .2, .1}, {1, 1, 0, 0}));
  CHECK(std::isinf(perfect.front().threshold));
  CHECK(perfect.front().fpr == 0.0);
  CHECK(perfect.back().fpr == 1.0);
  CHECK(perfect.back().tpr == 1.0);
  CHECK(std::any_of(perfect.begin(), perfect.end(), [](const RocPoint& p) { return p.fpr == 0 && p.tpr == 1; }));

  auto tied = roc_points(make({.3, .3, .3}, {1, 0, 1}));
  REQUIRE(tied.size() == 2);
  CHECK((tied[0].fpr == 0 && tied[0].tpr == 0));
  CHECK((tied[1].fpr == 1 && tied[1].tpr == 1));
}

TEST_CASE("quantile type 7") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({4, 1, 3, 2}, 0.0) == 1.0);
  CHECK(quantile({4, 1, 3, 2}, 1.0) == 4.0);
  CHECK(quantile({10, 20}, 0.025) == doctest::Approx(10.25));
}

TEST_CASE("bootstrap: determinism, resample count, perfect separation") {
  std::mt19937_64 rng(10);
  auto s = oracles::random_set(rng, 50);
  while (s.size() < 30) s = oracles::random_set(rng, 50);
  const auto a = bootstrap_auc_ci(s, 2000, 77);
  const auto b = bootstrap_auc_ci(s, 2000, 77);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);
  CHECK(a.drawn == 2000);
  CHECK(a.lo <= a.hi);
  CHECK(bootstrap_indices(10, 3, 5) == bootstrap_indices(10, 3, 5));
  CHECK(bootstrap_indices(10, 3, 5) != bootstrap_indices(10, 3, 6));

  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    scores.push_back(i);
    labels.push_back(i >= 100);
  }
  const auto perfect = bootstrap_auc_ci(make(scores, labels), 500, 1);
  CHECK(perfect.lo == 1.0);
  CHECK(perfect.hi == 1.0);

  CHECK(error_code([] { bootstrap_auc_ci(make({.1, .2, .3, .4, .5, .6}, {1, 0, 0, 0, 0, 0}), 200, 1); }) ==
        "bootstrap_degenerate");
}

TEST_CASE("bootstrap: n = 6 reference run recomputed from the shared draws") {
  const auto s = make({.9, .35, .6, .35, .2, .7}, {1, 0, 1, 1, 0, 0});
  const int R = 200;
  const std::uint64_t seed = 2024;
  std::vector<double> aucs;
  int skipped = 0;
  for (int r = 0; r < R; ++r) {
    const auto idx = bootstrap_indices(6, seed, r);
    REQUIRE(idx.size() == 6);
    std::vector<double> sc;
    std::vector<int> lb;
    for (auto i : idx) {
      REQUIRE(i < 6);
      sc.push_back(s.scores[i]);
      lb.push_back(s.labels[i]);
    }
    if (std::count(lb.begin(), lb.end(), 1) % 6 == 0) {
      ++skipped;
      continue;
    }
    aucs.push_back(oracles::pairwise_auc(sc, lb));
  }
  std::sort(aucs.begin(), aucs.end());
  auto pct = [&](double q) {
    const double h = (aucs.size() - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, aucs.size() - 1);
    return aucs[lo] + (h - lo) * (aucs[hi] - aucs[lo]);
  };
  const auto ci = bootstrap_auc_ci(s, R, seed);
  CHECK(ci.skipped == skipped);
  CHECK(ci.lo == doctest::Approx(pct(0.025)).epsilon(1e-14));
  CHECK(ci.hi == doctest::Approx(pct(0.975)).epsilon(1e-14));
}

TEST_CASE("confusion matrix") {
  auto all_pos = confusion_at(make({.9, .9, .9}, {1, 1, 1}), 0.5, 50, 1);
  CHECK(all_pos.tp == 3);
  CHECK(all_pos.fp + all_pos.tn + all_pos.fn == 0);
  CHECK(all_pos.tp_ci.lo == 3);

  auto boundary = confusion_at(make({.5, .49}, {0, 1}), 0.5, 10, 1);
  CHECK(boundary.fp == 1);
  CHECK(boundary.fn == 1);

  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    ScoredSet s;
    for (int i = 0; i < 10; ++i) {
      s.scores.push_back(static_cast<double>(rng() % 11) / 10.0);
      s.labels.push_back(static_cast<int>(rng() % 2));
    }
    const auto c = confusion_at(s, 0.5, 20, trial);
    const auto want = oracles::confusion(s.scores, s.labels, 0.5);
    CHECK(std::array<long, 4>{c.tp, c.fp, c.tn, c.fn} == want);
    CHECK(c.total() == 10);
    CHECK(c.tp_ci.lo <= c.tp_ci.hi);
  }
}

TEST_CASE("confusion CIs use the same resamples as the AUC CI") {
  const auto s = make({.9, .35, .6, .35, .2, .7, .55, .1}, {1, 0, 1, 1, 0, 0, 1, 0});
  const int R = 100;
  std::vector<double> tp;
  for (int r = 0; r < R; ++r) {
    long n = 0;
    for (auto i : bootstrap_indices(s.size(), 5, r)) n += s.scores[i] >= 0.5 && s.labels[i] == 1;
    tp.push_back(static_cast<double>(n));
  }
  const auto c = confusion_at(s, 0.5, R, 5);
  CHECK(c.tp_ci.lo == static_cast<long>(std::floor(quantile(tp, 0.025))));
  CHECK(c.tp_ci.hi == static_cast<long>(std::ceil(quantile(tp, 0.975))));
}
