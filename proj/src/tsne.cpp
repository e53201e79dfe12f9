#include "labseq/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "labseq/common.hpp"

namespace labseq {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Computed from coordinate differences, so the result does not depend on
// where the point cloud sits.
MatrixXd squared_distances(const MatrixXd& X) {
  const Index n = X.rows();
  MatrixXd D = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      D(i, j) = D(j, i) = (X.row(i) - X.row(j)).squaredNorm();
    }
  }
  return D;
}

// Student-t kernel matrix with zero diagonal.
MatrixXd student_kernel(const MatrixXd& Y) {
  MatrixXd K = (1.0 + squared_distances(Y).array()).inverse().matrix();
  K.diagonal().setZero();
  return K;
}

}  // namespace

double TsneConfig::resolved_perplexity(Index n) const {
  if (perplexity > 0) return perplexity;
  return std::min(30.0, std::floor(static_cast<double>(n - 1) / 3.0));
}

// A fixed rate of a few hundred overshoots on small inputs once exaggeration
// ends; scaling with n keeps the post-exaggeration KL trace monotone.
double TsneConfig::resolved_learning_rate(Index n) const {
  if (learning_rate > 0) return learning_rate;
  return static_cast<double>(n) / exaggeration;
}

Affinities conditional_affinities(const MatrixXd& X, double perplexity) {
  const Index n = X.rows();
  if (n < 4) throw Error("validation_error", "t-SNE needs at least 4 points");
  if (perplexity < 1.0 || perplexity > static_cast<double>(n - 1)) {
    throw Error("config_error", "perplexity must lie in [1, n-1]");
  }
  const MatrixXd D = squared_distances(X);
  const double target = std::log(perplexity);

  Affinities a;
  a.conditional = MatrixXd::Zero(n, n);
  a.beta = VectorXd::Ones(n);
  a.entropy = VectorXd::Zero(n);
  VectorXd row(n);

  for (Index i = 0; i < n; ++i) {
    double d_min = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (j != i) d_min = std::min(d_min, D(i, j));
    }
    // Entropy of the row distribution at precision beta; distances are shifted
    // by their minimum so the exponentials cannot all underflow.
    auto evaluate = [&](double beta) {
      double z = 0.0;
      double weighted = 0.0;
      for (Index j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-beta * (D(i, j) - d_min));
        z += row[j];
        weighted += row[j] * (D(i, j) - d_min);
      }
      row /= z;
      return std::log(z) + beta * weighted / z;
    };

    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double h = evaluate(beta);
    int tries = 0;
    while (std::abs(h - target) > kEntropyTolerance && tries < kBisectionSteps) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
      h = evaluate(beta);
      ++tries;
    }
    if (std::abs(h - target) > kEntropyTolerance) {
      throw Error("bisection_failure", "perplexity bisection did not converge for row " + std::to_string(i));
    }
    a.conditional.row(i) = row.transpose();
    a.beta[i] = beta;
    a.entropy[i] = h;
  }
  a.joint = (a.conditional + a.conditional.transpose()) / (2.0 * static_cast<double>(n));
  a.joint.diagonal().setZero();
  return a;
}

double kl_divergence(const MatrixXd& P, const MatrixXd& Y) {
  const MatrixXd K = student_kernel(Y);
  const double z = K.sum();
  double kl = 0.0;
  for (Index i = 0; i < P.rows(); ++i) {
    for (Index j = 0; j < P.cols(); ++j) {
      if (i == j || P(i, j) <= 0.0) continue;
      kl += P(i, j) * std::log(P(i, j) / (K(i, j) / z));
    }
  }
  return kl;
}

MatrixXd kl_gradient(const MatrixXd& P, const MatrixXd& Y) {
  const MatrixXd K = student_kernel(Y);
  const MatrixXd Q = K / K.sum();
  // dC/dy_i = 4 sum_j (p_ij - q_ij) k_ij (y_i - y_j)
  const MatrixXd W = (P - Q).cwiseProduct(K);
  const VectorXd row_sums = W.rowwise().sum();
  return 4.0 * (row_sums.asDiagonal() * Y - W * Y);
}

TsneResult run_tsne(const MatrixXd& X, const TsneConfig& cfg) {
  const Index n = X.rows();
  if (cfg.iterations < 250) throw Error("config_error", "t-SNE needs at least 250 iterations");
  const auto aff = conditional_affinities(X, cfg.resolved_perplexity(n));
  const MatrixXd& P = aff.joint;
  const double lr = cfg.resolved_learning_rate(n);

  Rng rng(cfg.seed);
  std::normal_distribution<double> init(0.0, cfg.init_std);
  MatrixXd Y(n, 2);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < 2; ++k) Y(i, k) = init(rng);

  MatrixXd velocity = MatrixXd::Zero(n, 2);
  MatrixXd gains = MatrixXd::Ones(n, 2);
  TsneResult result;

  for (int it = 1; it <= cfg.iterations; ++it) {
    const bool exaggerate = it <= cfg.exaggeration_iterations;
    const double momentum = it <= cfg.momentum_switch ? cfg.initial_momentum : cfg.final_momentum;
    const MatrixXd grad = exaggerate ? kl_gradient(cfg.exaggeration * P, Y) : kl_gradient(P, Y);

    // Per-coordinate adaptive gains: grow when the gradient opposes the
    // current velocity, shrink otherwise.
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < 2; ++k) {
        const bool flip = (grad(i, k) > 0) != (velocity(i, k) > 0);
        gains(i, k) = std::max(flip ? gains(i, k) + 0.2 : gains(i, k) * 0.8, 0.01);
      }
    }
    velocity = momentum * velocity - lr * gains.cwiseProduct(grad);
    Y += velocity;
    Y.rowwise() -= Y.colwise().mean();

    if (!Y.allFinite()) throw Error("divergence", "non-finite t-SNE coordinates at iteration " + std::to_string(it));

    if (it % cfg.record_every == 0) {
      const double kl = kl_divergence(P, Y);
      if (!result.kl_trace.empty() && it - cfg.record_every >= cfg.exaggeration_iterations &&
          kl > result.kl_trace.back().kl + cfg.trace_tolerance) {
        throw Error("kl_trace", "KL rose from " + std::to_string(result.kl_trace.back().kl) + " to " +
                                    std::to_string(kl) + " at iteration " + std::to_string(it));
      }
      result.kl_trace.push_back({it, kl});
    }
  }
  result.embedding = Y;
  return result;
}

double nearest_neighbor_purity(const MatrixXd& Y, const std::vector<int>& groups) {
  const MatrixXd D = squared_distances(Y);
  const Index n = Y.rows();
  Index same = 0;
  for (Index i = 0; i < n; ++i) {
    Index best = -1;
    for (Index j = 0; j < n; ++j) {
      if (j != i && (best < 0 || D(i, j) < D(i, best))) best = j;
    }
    if (groups[static_cast<std::size_t>(i)] == groups[static_cast<std::size_t>(best)]) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(n);
}

}  // namespace labseq
