#include "labseq/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "labseq/common.hpp"
#include "labseq/eval.hpp"

namespace labseq {

using Eigen::VectorXd;
using json = nlohmann::json;

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error("config_error", what); };
  if (hidden_dim < 1) fail("hidden_dim must be positive");
  if (!(learning_rate > 0)) fail("learning_rate must be positive");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) fail("beta1 and beta2 must lie in (0,1)");
  if (!(epsilon > 0)) fail("epsilon must be positive");
  if (batch_size < 1 || max_epochs < 1 || patience < 1) fail("batch_size, max_epochs and patience must be positive");
  if (min_improvement < 0) fail("min_improvement must be non-negative");
}

void adam_step(VectorXd& params, const VectorXd& grads, AdamState& state, const TrainConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error("shape_error", "adam_step shapes do not match");
  }
  ++state.t;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const VectorXd update =
      cfg.learning_rate * (state.m / c1).array() / ((state.v / c2).array().sqrt() + cfg.epsilon);
  if (!update.allFinite()) throw Error("divergence", "non-finite Adam update at step " + std::to_string(state.t));
  params -= update;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, const TrainConfig& cfg) {
  VectorXd flat = params.pack();
  adam_step(flat, grads.pack(), state, cfg);
  params.unpack(flat);
}

ModelParams batch_gradient(const std::vector<const EncodedSequence*>& batch, const ModelParams& params,
                           double* mean_loss) {
  auto grads = ModelParams::zeros(params.hidden_dim(), params.input_dim(), params.static_dim());
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto* seq : batch) {
    const auto cache = forward(seq->matrix, seq->statics, params);
    loss += bce_loss(cache.logit, seq->label);
    accumulate_gradient(cache, seq->label, params, scale, grads);
  }
  if (mean_loss) *mean_loss = loss * scale;
  return grads;
}

std::vector<double> predict_logits(const std::vector<EncodedSequence>& data, const ModelParams& params) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& seq : data) out.push_back(forward(seq.matrix, seq.statics, params).logit);
  return out;
}

std::vector<const EncodedSequence*> select_split(const std::vector<EncodedSequence>& data, Split split) {
  std::vector<const EncodedSequence*> out;
  for (const auto& seq : data) {
    if (seq.split == split) out.push_back(&seq);
  }
  return out;
}

namespace {

void require_both_classes(const std::vector<const EncodedSequence*>& rows, const char* name) {
  bool pos = false;
  bool neg = false;
  for (const auto* s : rows) (s->label == 1 ? pos : neg) = true;
  if (!pos || !neg) {
    throw Error("validation_error", std::string(name) + " split must contain both labels");
  }
}

double split_auc(const std::vector<const EncodedSequence*>& rows, const ModelParams& params) {
  ScoredSet s;
  for (const auto* seq : rows) {
    s.scores.push_back(predict_proba(forward(seq->matrix, seq->statics, params).logit));
    s.labels.push_back(seq->label);
  }
  return auc_trapezoid(s);
}

}  // namespace

TrainResult run_training(const std::vector<EncodedSequence>& data, const TrainConfig& cfg) {
  cfg.validate();
  const auto train = select_split(data, Split::train);
  const auto validation = select_split(data, Split::validation);
  require_both_classes(train, "train");
  require_both_classes(validation, "validation");
  const int input_dim = static_cast<int>(train.front()->matrix.cols());

  auto params = init_params(cfg.hidden_dim, input_dim, derive_seed(cfg.seed, "init"));
  auto adam = AdamState::zeros(params.size());
  Rng shuffle_rng(derive_seed(cfg.seed, "batches"));

  TrainResult result{params, {}};
  result.history.best_validation_auc = -1.0;
  int since_improvement = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const EncodedSequence*> batch;
      for (auto k = start; k < stop; ++k) batch.push_back(train[order[k]]);
      double batch_loss = 0.0;
      ModelParams grads;
      try {
        grads = batch_gradient(batch, params, &batch_loss);
        adam_step(params, grads, adam, cfg);
      } catch (const Error& e) {
        if (e.code() != "divergence") throw;
        throw Error("divergence", "epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(batch_loss)) {
        throw Error("divergence", "epoch " + std::to_string(epoch) + ": non-finite training loss");
      }
      loss_sum += batch_loss * static_cast<double>(batch.size());
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(train.size()), split_auc(validation, params)};
    result.history.epochs.push_back(rec);

    if (rec.validation_auc > result.history.best_validation_auc) {
      const bool significant = rec.validation_auc > result.history.best_validation_auc + cfg.min_improvement;
      result.history.best_validation_auc = rec.validation_auc;
      result.history.best_epoch = epoch;
      result.best = params;
      since_improvement = significant ? 0 : since_improvement + 1;
    } else {
      ++since_improvement;
    }
    if (since_improvement >= cfg.patience) {
      result.history.stop_reason = "patience";
      return result;
    }
  }
  result.history.stop_reason = "max_epochs";
  return result;
}

std::string history_to_json(const TrainHistory& history) {
  json epochs = json::array();
  for (const auto& e : history.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_auc", e.validation_auc}});
  }
  json j = {{"epochs", std::move(epochs)},
            {"best_epoch", history.best_epoch},
            {"best_validation_auc", history.best_validation_auc},
            {"stop_reason", history.stop_reason}};
  return j.dump(1) + "\n";
}

VectorXd LastEventLogistic::features(const EncodedSequence& seq) {
  VectorXd f(seq.matrix.cols() + kStaticDim);
  f.head(seq.matrix.cols()) = seq.matrix.row(seq.matrix.rows() - 1).transpose();
  f[seq.matrix.cols()] = seq.statics[0];
  f[seq.matrix.cols() + 1] = seq.statics[1];
  return f;
}

double LastEventLogistic::logit(const EncodedSequence& seq) const { return w.dot(features(seq)) + b; }

LastEventLogistic fit_last_event_logistic(const std::vector<const EncodedSequence*>& train, double ridge,
                                          int max_iterations) {
  if (train.empty()) throw Error("validation_error", "baseline needs training rows");
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto d = LastEventLogistic::features(*train.front()).size();
  // Design matrix with a leading intercept column; the intercept is not penalised.
  Eigen::MatrixXd X(n, d + 1);
  VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X.row(i).tail(d) = LastEventLogistic::features(*train[static_cast<std::size_t>(i)]).transpose();
    y[i] = train[static_cast<std::size_t>(i)]->label;
  }
  VectorXd beta = VectorXd::Zero(d + 1);
  VectorXd penalty = VectorXd::Constant(d + 1, ridge);
  penalty[0] = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    const VectorXd p = (X * beta).unaryExpr([](double v) { return logistic(v); });
    const VectorXd grad = X.transpose() * (p - y) + penalty.cwiseProduct(beta);
    const VectorXd wts = p.cwiseProduct((1.0 - p.array()).matrix());
    Eigen::MatrixXd hess = X.transpose() * wts.asDiagonal() * X;
    hess.diagonal() += penalty;
    hess.diagonal().array() += 1e-10;
    const VectorXd delta = hess.ldlt().solve(grad);
    beta -= delta;
    if (delta.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  return LastEventLogistic{beta.tail(d), beta[0]};
}

}  // namespace labseq
