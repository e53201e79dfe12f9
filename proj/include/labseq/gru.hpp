#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace labseq {

// Cell equations:
//   z_t = sigma(W_z x_t + U_z h_{t-1} + b_z)
//   r_t = sigma(W_r x_t + U_r h_{t-1} + b_r)
//   c_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
//   h_t = (1 - z_t) * h_{t-1} + z_t * c_t
struct GruParams {
  Eigen::MatrixXd W_z, W_r, W_h;  // hidden x input
  Eigen::MatrixXd U_z, U_r, U_h;  // hidden x hidden
  Eigen::VectorXd b_z, b_r, b_h;
};

/// Linear classifier over (embedding ++ statics).
struct HeadParams {
  Eigen::VectorXd w;
  double b = 0.0;
};

struct ModelParams {
  GruParams gru;
  HeadParams head;

  static ModelParams zeros(int hidden_dim, int input_dim, int static_dim = 2);

  int hidden_dim() const { return static_cast<int>(gru.U_z.rows()); }
  int input_dim() const { return static_cast<int>(gru.W_z.cols()); }
  int static_dim() const { return static_cast<int>(head.w.size()) - hidden_dim(); }

  /// Total scalar parameter count.
  Eigen::Index size() const;

  /// Visits every tensor as (name, rows, cols, column-major data).
  void for_each_tensor(const std::function<void(const char*, Eigen::Index, Eigen::Index, double*)>& fn);
  void for_each_tensor(
      const std::function<void(const char*, Eigen::Index, Eigen::Index, const double*)>& fn) const;

  /// Flattened copy in for_each_tensor order.
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& flat);

  bool all_finite() const;
};

/// Glorot-uniform weights, zero biases; deterministic in `seed`.
ModelParams init_params(int hidden_dim, int input_dim, std::uint64_t seed, int static_dim = 2);

struct CellState {
  Eigen::VectorXd h, z, r, candidate;
};

/// One GRU step. Throws Error{"divergence"} on a non-finite result.
CellState cell_forward(const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev, const GruParams& p);

struct ForwardCache {
  Eigen::MatrixXd inputs;        // steps x input
  Eigen::MatrixXd h;             // (steps + 1) x hidden, row 0 is the zero initial state
  Eigen::MatrixXd z, r, candidate;  // steps x hidden
  Eigen::VectorXd features;      // embedding ++ statics
  double logit = 0.0;

  Eigen::Index steps() const { return inputs.rows(); }
  Eigen::VectorXd embedding() const { return h.row(h.rows() - 1).transpose(); }
};

/// Runs the GRU from h_0 = 0 over every row (padding included) and applies the
/// head. Throws Error{"divergence"} on a non-finite logit.
ForwardCache forward(const Eigen::MatrixXd& inputs, std::span<const double> statics,
                     const ModelParams& params);

/// Numerically stable binary cross-entropy on a logit.
double bce_loss(double logit, int label);

/// Overflow-safe logistic.
double predict_proba(double logit);

/// Exact gradient of bce_loss(forward(...).logit, label) for every parameter.
ModelParams backward(const ForwardCache& cache, int label, const ModelParams& params);

/// Adds `scale` times the gradient into `grads` (shapes must match params).
void accumulate_gradient(const ForwardCache& cache, int label, const ModelParams& params,
                         double scale, ModelParams& grads);

struct Checkpoint {
  ModelParams params;
  std::string vocabulary_hash;
  std::uint64_t seed = 0;
  int best_epoch = -1;
};

inline constexpr const char* kCheckpointFormat = "labseq-gru-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// JSON container; tensors stored row-major.
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(std::string_view text);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace labseq
