#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "labseq/encode.hpp"
#include "labseq/gru.hpp"

namespace labseq {

struct TrainConfig {
  int hidden_dim = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int max_epochs = 200;
  int patience = 10;
  double min_improvement = 1e-4;  // validation AUC gain that resets patience
  std::uint64_t seed = 0;

  void validate() const;  // throws Error{"config_error"}
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;

  static AdamState zeros(Eigen::Index n) {
    return AdamState{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
  }
};

/// One bias-corrected Adam update of a flat parameter vector, in place.
/// Throws Error{"divergence"} if the update is non-finite.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state,
               const TrainConfig& cfg);
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_auc = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 1-based; earliest epoch with the maximum validation AUC
  double best_validation_auc = 0.0;
  std::string stop_reason;  // "max_epochs" or "patience"
};

struct TrainResult {
  ModelParams best;
  TrainHistory history;
};

/// Mean loss gradient over a batch, summed in the given order.
ModelParams batch_gradient(const std::vector<const EncodedSequence*>& batch, const ModelParams& params,
                           double* mean_loss = nullptr);

std::vector<double> predict_logits(const std::vector<EncodedSequence>& data, const ModelParams& params);

/// Mini-batch Adam on the train split with early stopping on validation AUC.
/// Throws Error{"validation_error"} if a split lacks a class and
/// Error{"divergence"} (naming the epoch) on a non-finite loss.
TrainResult run_training(const std::vector<EncodedSequence>& data, const TrainConfig& cfg);

/// Rows of `data` belonging to one split.
std::vector<const EncodedSequence*> select_split(const std::vector<EncodedSequence>& data, Split split);

std::string history_to_json(const TrainHistory& history);

/// Logistic regression on the last valid row plus statics, fitted by Newton's
/// method with a small ridge penalty. Used as a reference point for the GRU.
struct LastEventLogistic {
  Eigen::VectorXd w;
  double b = 0.0;

  static Eigen::VectorXd features(const EncodedSequence& seq);
  double logit(const EncodedSequence& seq) const;
};

LastEventLogistic fit_last_event_logistic(const std::vector<const EncodedSequence*>& train,
                                          double ridge = 1e-2, int max_iterations = 50);

}  // namespace labseq
