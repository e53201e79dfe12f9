#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "labseq/gru.hpp"
#include "support.hpp"

using namespace labseq;
using testing::error_code;

namespace {

ModelParams random_params(int hidden, int input, std::uint64_t seed, double sd = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sd);
  auto p = ModelParams::zeros(hidden, input);
  Eigen::VectorXd flat = p.pack();
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = normal(rng);
  p.unpack(flat);
  return p;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar loops, no Eigen expressions.
std::vector<double> scalar_cell(const std::vector<double>& x, const std::vector<double>& h, const GruParams& p) {
  const std::size_t H = h.size(), D = x.size();
  std::vector<double> z(H), r(H), out(H);
  for (std::size_t i = 0; i < H; ++i) {
    double az = p.b_z(i), ar = p.b_r(i);
    for (std::size_t j = 0; j < D; ++j) {
      az += p.W_z(i, j) * x[j];
      ar += p.W_r(i, j) * x[j];
    }
    for (std::size_t j = 0; j < H; ++j) {
      az += p.U_z(i, j) * h[j];
      ar += p.U_r(i, j) * h[j];
    }
    z[i] = sig(az);
    r[i] = sig(ar);
  }
  for (std::size_t i = 0; i < H; ++i) {
    double a = p.b_h(i);
    for (std::size_t j = 0; j < D; ++j) a += p.W_h(i, j) * x[j];
    for (std::size_t j = 0; j < H; ++j) a += p.U_h(i, j) * (r[j] * h[j]);
    out[i] = (1 - z[i]) * h[i] + z[i] * std::tanh(a);
  }
  return out;
}

}  // namespace

TEST_CASE("initialisation is seeded and biases start at zero") {
  auto a = init_params(8, 30, 3);
  auto b = init_params(8, 30, 3);
  CHECK(a.pack() == b.pack());
  CHECK(init_params(8, 30, 4).pack() != a.pack());
  CHECK(a.gru.b_z.isZero());
  CHECK(a.gru.b_r.isZero());
  CHECK(a.gru.b_h.isZero());
  CHECK(a.head.b == 0.0);
  CHECK(a.size() == 3 * 8 * 30 + 3 * 8 * 8 + 3 * 8 + 10 + 1);
}

TEST_CASE("zero parameters halve the state and give a zero logit") {
  const auto p = ModelParams::zeros(3, 4);
  Eigen::VectorXd x = Eigen::VectorXd::Random(4);
  Eigen::VectorXd h(3);
  h << 0.4, -1.0, 2.0;
  CHECK(cell_forward(x, h, p.gru).h.isApprox(0.5 * h));
  CHECK(cell_forward(x, Eigen::VectorXd::Zero(3), p.gru).h.isZero());
  const double statics[2] = {0.3, 1.0};
  CHECK(forward(Eigen::MatrixXd::Random(7, 4), statics, p).logit == 0.0);
}

TEST_CASE("cell matches a scalar reference over several steps") {
  const auto p = random_params(3, 5, 21);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(6, 5);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = normal(rng);
  const double statics[2] = {0.5, 0.0};
  const auto cache = forward(X, statics, p);

  std::vector<double> h(3, 0.0);
  for (int t = 0; t < 6; ++t) {
    std::vector<double> x(5);
    for (int j = 0; j < 5; ++j) x[j] = X(t, j);
    h = scalar_cell(x, h, p.gru);
    for (int i = 0; i < 3; ++i) CHECK(cache.h(t + 1, i) == doctest::Approx(h[i]).epsilon(1e-13));
  }
  double logit = p.head.b + p.head.w(3) * statics[0] + p.head.w(4) * statics[1];
  for (int i = 0; i < 3; ++i) logit += p.head.w(i) * h[i];
  CHECK(cache.logit == doctest::Approx(logit).epsilon(1e-13));
}

TEST_CASE("zero sequence follows the constant-gate recursion") {
  auto p = random_params(4, 6, 8);
  const int T = 9;
  const double statics[2] = {0.0, 0.0};
  const auto cache = forward(Eigen::MatrixXd::Zero(T, 6), statics, p);
  // With x = 0 the first step starts from h = 0 and candidate tanh(b_h).
  std::vector<double> h(4, 0.0);
  for (int t = 0; t < T; ++t) h = scalar_cell(std::vector<double>(6, 0.0), h, p.gru);
  double logit = p.head.b;
  for (int i = 0; i < 4; ++i) logit += p.head.w(i) * h[i];
  CHECK(cache.logit == doctest::Approx(logit).epsilon(1e-13));

  // Biases zero: z = 0.5 and candidate 0 keep h at 0 forever.
  p.gru.b_z.setZero();
  p.gru.b_r.setZero();
  p.gru.b_h.setZero();
  CHECK(forward(Eigen::MatrixXd::Zero(T, 6), statics, p).embedding().isZero());
}

TEST_CASE("identical inputs give identical logits") {
  const auto p = random_params(5, 4, 1);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(8, 4);
  const double s[2] = {0.2, 1.0};
  CHECK(forward(X, s, p).logit == forward(Eigen::MatrixXd(X), s, p).logit);
}

TEST_CASE("cross-entropy and probabilities") {
  CHECK(bce_loss(0.0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_loss(40.0, 1) < 1e-17);
  CHECK(std::isfinite(bce_loss(-800.0, 1)));
  const long double z = -3.7L;
  const long double naive = -std::log(1.0L - 1.0L / (1.0L + std::exp(-z)));
  CHECK(std::abs(bce_loss(-3.7, 0) - static_cast<double>(naive)) < 1e-12);

  CHECK(predict_proba(0.0) == 0.5);
  CHECK(std::abs(predict_proba(500.0) - 1.0) <= std::numeric_limits<double>::epsilon());
  CHECK(predict_proba(-500.0) >= 0.0);
  CHECK(predict_proba(-std::log(3.0)) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("head bias gradient at a zero logit") {
  const auto p = ModelParams::zeros(3, 4);
  const double s[2] = {0.0, 0.0};
  const auto g = backward(forward(Eigen::MatrixXd::Zero(5, 4), s, p), 0, p);
  CHECK(g.head.b == 0.5);
}

TEST_CASE("zero-input steps add nothing to input-weight gradients") {
  const auto p = random_params(3, 4, 33);
  const double s[2] = {0.1, 1.0};
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(6, 4);
  X.row(4) << 1, 0, 1, 0;
  const auto full = backward(forward(X, s, p), 1, p);
  // Only column 0 and 2 can carry gradient: every other input is zero at every step.
  for (const auto* W : {&full.gru.W_z, &full.gru.W_r, &full.gru.W_h}) {
    CHECK(W->col(1).isZero());
    CHECK(W->col(3).isZero());
    CHECK_FALSE(W->col(0).isZero());
  }
  const auto none = backward(forward(Eigen::MatrixXd::Zero(6, 4), s, p), 1, p);
  CHECK(none.gru.W_z.isZero());
  CHECK(none.gru.W_h.isZero());
}

TEST_CASE("BPTT gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = gradcheck::check_one(500 + seed);
    CAPTURE(seed);
    CHECK(r.max_relative_error < 1e-6);
  }
}

TEST_CASE("accumulate_gradient scales and adds") {
  const auto p = random_params(2, 3, 4);
  const double s[2] = {0.3, 0.0};
  const auto cache = forward(Eigen::MatrixXd::Random(4, 3), s, p);
  auto acc = ModelParams::zeros(2, 3);
  accumulate_gradient(cache, 1, p, 0.25, acc);
  accumulate_gradient(cache, 1, p, 0.75, acc);
  CHECK(acc.pack().isApprox(backward(cache, 1, p).pack(), 1e-14));
}

TEST_CASE("checkpoint round-trip is exact") {
  Checkpoint c{random_params(4, 30, 12), "abc123", 99, 7};
  const auto text = checkpoint_to_json(c);
  const auto back = checkpoint_from_json(text);
  CHECK(back.params.pack() == c.params.pack());
  CHECK(back.vocabulary_hash == "abc123");
  CHECK(back.seed == 99);
  CHECK(back.best_epoch == 7);
  CHECK(checkpoint_to_json(back) == text);
  CHECK(error_code([] { checkpoint_from_json("{\"format\":\"other\"}"); }) != "");
}
