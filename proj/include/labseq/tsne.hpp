#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace labseq {

struct TsneConfig {
  double perplexity = 0.0;  // <= 0 selects min(30, floor((n - 1) / 3))
  int iterations = 1000;
  double exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double learning_rate = 0.0;  // <= 0 selects n / exaggeration
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  int record_every = 50;
  double init_std = 1e-4;
  double trace_tolerance = 1e-3;  // allowed KL increase per recorded step after exaggeration
  std::uint64_t seed = 0;

  double resolved_perplexity(Eigen::Index n) const;
  double resolved_learning_rate(Eigen::Index n) const;
};

struct Affinities {
  Eigen::MatrixXd conditional;  // row i is p_{j|i}
  Eigen::MatrixXd joint;        // (P + P^T) / 2n, zero diagonal
  Eigen::VectorXd beta;         // per-row precision 1 / (2 sigma^2)
  Eigen::VectorXd entropy;      // achieved row entropy in nats
};

inline constexpr double kEntropyTolerance = 1e-5;
inline constexpr int kBisectionSteps = 50;

/// Gaussian affinities whose row entropies equal log(perplexity).
/// Throws Error{"bisection_failure"} naming the row if a bandwidth is not found.
Affinities conditional_affinities(const Eigen::MatrixXd& X, double perplexity);

/// KL(P || Q) for Student-t affinities Q of the embedding Y (n x 2).
double kl_divergence(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y);

/// Analytic gradient of kl_divergence with respect to Y.
Eigen::MatrixXd kl_gradient(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y);

struct KlRecord {
  int iteration;
  double kl;
};

struct TsneResult {
  Eigen::MatrixXd embedding;  // n x 2, centred
  std::vector<KlRecord> kl_trace;
};

/// Exact t-SNE. Throws Error{"divergence"} with the iteration on non-finite
/// coordinates and Error{"kl_trace"} if the post-exaggeration trace rises by
/// more than trace_tolerance between recordings.
TsneResult run_tsne(const Eigen::MatrixXd& X, const TsneConfig& cfg);

/// Fraction of points whose nearest other point shares their group.
double nearest_neighbor_purity(const Eigen::MatrixXd& Y, const std::vector<int>& groups);

}  // namespace labseq
