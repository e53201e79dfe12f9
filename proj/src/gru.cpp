#include "labseq/gru.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "labseq/common.hpp"

namespace labseq {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using json = nlohmann::json;

namespace {

VectorXd sigmoid(const VectorXd& a) { return a.unaryExpr([](double v) { return logistic(v); }); }

// Shared by cell_forward and forward; the caller supplies the input projections.
void step(const VectorXd& xz, const VectorXd& xr, const VectorXd& xh, const VectorXd& h_prev,
          const GruParams& p, CellState& out) {
  out.z = sigmoid(xz + p.U_z * h_prev + p.b_z);
  out.r = sigmoid(xr + p.U_r * h_prev + p.b_r);
  out.candidate = (xh + p.U_h * out.r.cwiseProduct(h_prev) + p.b_h).array().tanh().matrix();
  out.h = (1.0 - out.z.array()) * h_prev.array() + out.z.array() * out.candidate.array();
}

template <typename Fn>
void visit(GruParams& g, HeadParams& hd, Fn&& fn) {
  fn("W_z", g.W_z.rows(), g.W_z.cols(), g.W_z.data());
  fn("W_r", g.W_r.rows(), g.W_r.cols(), g.W_r.data());
  fn("W_h", g.W_h.rows(), g.W_h.cols(), g.W_h.data());
  fn("U_z", g.U_z.rows(), g.U_z.cols(), g.U_z.data());
  fn("U_r", g.U_r.rows(), g.U_r.cols(), g.U_r.data());
  fn("U_h", g.U_h.rows(), g.U_h.cols(), g.U_h.data());
  fn("b_z", g.b_z.size(), Index{1}, g.b_z.data());
  fn("b_r", g.b_r.size(), Index{1}, g.b_r.data());
  fn("b_h", g.b_h.size(), Index{1}, g.b_h.data());
  fn("head_w", hd.w.size(), Index{1}, hd.w.data());
  fn("head_b", Index{1}, Index{1}, &hd.b);
}

}  // namespace

ModelParams ModelParams::zeros(int hidden_dim, int input_dim, int static_dim) {
  if (hidden_dim < 1 || input_dim < 1 || static_dim < 0) {
    throw Error("config_error", "model dimensions must be positive");
  }
  ModelParams p;
  for (auto* m : {&p.gru.W_z, &p.gru.W_r, &p.gru.W_h}) *m = MatrixXd::Zero(hidden_dim, input_dim);
  for (auto* m : {&p.gru.U_z, &p.gru.U_r, &p.gru.U_h}) *m = MatrixXd::Zero(hidden_dim, hidden_dim);
  for (auto* v : {&p.gru.b_z, &p.gru.b_r, &p.gru.b_h}) *v = VectorXd::Zero(hidden_dim);
  p.head.w = VectorXd::Zero(hidden_dim + static_dim);
  p.head.b = 0.0;
  return p;
}

Index ModelParams::size() const {
  Index n = 0;
  for_each_tensor([&](const char*, Index r, Index c, const double*) { n += r * c; });
  return n;
}

void ModelParams::for_each_tensor(const std::function<void(const char*, Index, Index, double*)>& fn) {
  visit(gru, head, fn);
}

void ModelParams::for_each_tensor(
    const std::function<void(const char*, Index, Index, const double*)>& fn) const {
  auto& self = const_cast<ModelParams&>(*this);
  visit(self.gru, self.head, [&](const char* name, Index r, Index c, double* d) { fn(name, r, c, d); });
}

VectorXd ModelParams::pack() const {
  VectorXd flat(size());
  Index pos = 0;
  for_each_tensor([&](const char*, Index r, Index c, const double* d) {
    flat.segment(pos, r * c) = Eigen::Map<const VectorXd>(d, r * c);
    pos += r * c;
  });
  return flat;
}

void ModelParams::unpack(const VectorXd& flat) {
  if (flat.size() != size()) throw Error("internal", "parameter vector size mismatch");
  Index pos = 0;
  for_each_tensor([&](const char*, Index r, Index c, double* d) {
    Eigen::Map<VectorXd>(d, r * c) = flat.segment(pos, r * c);
    pos += r * c;
  });
}

bool ModelParams::all_finite() const { return pack().allFinite(); }

ModelParams init_params(int hidden_dim, int input_dim, std::uint64_t seed, int static_dim) {
  auto p = ModelParams::zeros(hidden_dim, input_dim, static_dim);
  Rng rng(seed);
  auto glorot = [&](MatrixXd& m, Index fan_in, Index fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  };
  for (auto* m : {&p.gru.W_z, &p.gru.W_r, &p.gru.W_h}) glorot(*m, input_dim, hidden_dim);
  for (auto* m : {&p.gru.U_z, &p.gru.U_r, &p.gru.U_h}) glorot(*m, hidden_dim, hidden_dim);
  MatrixXd w(hidden_dim + static_dim, 1);
  glorot(w, hidden_dim + static_dim, 1);
  p.head.w = w.col(0);
  return p;
}

CellState cell_forward(const VectorXd& x, const VectorXd& h_prev, const GruParams& p) {
  CellState out;
  step(p.W_z * x, p.W_r * x, p.W_h * x, h_prev, p, out);
  if (!out.h.allFinite()) throw Error("divergence", "non-finite GRU hidden state");
  return out;
}

ForwardCache forward(const MatrixXd& inputs, std::span<const double> statics, const ModelParams& params) {
  const auto& p = params.gru;
  const Index steps = inputs.rows();
  const Index hidden = params.hidden_dim();
  if (inputs.cols() != params.input_dim()) throw Error("shape_error", "input width does not match W");
  if (static_cast<Index>(statics.size()) != params.static_dim()) {
    throw Error("shape_error", "static feature count does not match head");
  }

  ForwardCache c;
  c.inputs = inputs;
  c.h = MatrixXd::Zero(steps + 1, hidden);
  c.z.resize(steps, hidden);
  c.r.resize(steps, hidden);
  c.candidate.resize(steps, hidden);

  // Input projections for all steps at once; rows are steps.
  const MatrixXd pz = inputs * p.W_z.transpose();
  const MatrixXd pr = inputs * p.W_r.transpose();
  const MatrixXd ph = inputs * p.W_h.transpose();

  CellState s;
  VectorXd h = VectorXd::Zero(hidden);
  for (Index t = 0; t < steps; ++t) {
    step(pz.row(t).transpose(), pr.row(t).transpose(), ph.row(t).transpose(), h, p, s);
    h = s.h;
    c.z.row(t) = s.z.transpose();
    c.r.row(t) = s.r.transpose();
    c.candidate.row(t) = s.candidate.transpose();
    c.h.row(t + 1) = h.transpose();
  }

  c.features.resize(hidden + static_cast<Index>(statics.size()));
  c.features.head(hidden) = h;
  for (std::size_t i = 0; i < statics.size(); ++i) c.features[hidden + static_cast<Index>(i)] = statics[i];
  c.logit = params.head.w.dot(c.features) + params.head.b;
  if (!std::isfinite(c.logit)) throw Error("divergence", "non-finite logit");
  return c;
}

double bce_loss(double logit, int label) {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

double predict_proba(double logit) { return logistic(logit); }

void accumulate_gradient(const ForwardCache& c, int label, const ModelParams& params, double scale,
                         ModelParams& g) {
  const auto& p = params.gru;
  const Index steps = c.steps();
  const Index hidden = params.hidden_dim();

  const double dlogit = scale * (predict_proba(c.logit) - label);
  g.head.w += dlogit * c.features;
  g.head.b += dlogit;

  // Pre-activation gradients per step, rows are steps.
  MatrixXd da_z(steps, hidden), da_r(steps, hidden), da_h(steps, hidden);
  VectorXd dh = dlogit * params.head.w.head(hidden);
  for (Index t = steps - 1; t >= 0; --t) {
    const VectorXd h_prev = c.h.row(t).transpose();
    const auto z = c.z.row(t).transpose().array();
    const auto r = c.r.row(t).transpose().array();
    const auto cand = c.candidate.row(t).transpose().array();

    const VectorXd g_h = (dh.array() * z * (1.0 - cand * cand)).matrix();
    const VectorXd g_z = (dh.array() * (cand - h_prev.array()) * z * (1.0 - z)).matrix();
    const VectorXd d_rh = p.U_h.transpose() * g_h;
    const VectorXd g_r = (d_rh.array() * h_prev.array() * r * (1.0 - r)).matrix();

    da_h.row(t) = g_h.transpose();
    da_z.row(t) = g_z.transpose();
    da_r.row(t) = g_r.transpose();

    dh = (dh.array() * (1.0 - z) + d_rh.array() * r).matrix() + p.U_z.transpose() * g_z +
         p.U_r.transpose() * g_r;
  }

  const auto h_prev_all = c.h.topRows(steps);
  g.gru.W_z.noalias() += da_z.transpose() * c.inputs;
  g.gru.W_r.noalias() += da_r.transpose() * c.inputs;
  g.gru.W_h.noalias() += da_h.transpose() * c.inputs;
  g.gru.U_z.noalias() += da_z.transpose() * h_prev_all;
  g.gru.U_r.noalias() += da_r.transpose() * h_prev_all;
  const MatrixXd rh = c.r.cwiseProduct(h_prev_all);
  g.gru.U_h.noalias() += da_h.transpose() * rh;
  g.gru.b_z += da_z.colwise().sum().transpose();
  g.gru.b_r += da_r.colwise().sum().transpose();
  g.gru.b_h += da_h.colwise().sum().transpose();
}

ModelParams backward(const ForwardCache& cache, int label, const ModelParams& params) {
  auto g = ModelParams::zeros(params.hidden_dim(), params.input_dim(), params.static_dim());
  accumulate_gradient(cache, label, params, 1.0, g);
  return g;
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json tensors = json::object();
  ckpt.params.for_each_tensor([&](const char* name, Index rows, Index cols, const double* d) {
    Eigen::Map<const MatrixXd> m(d, rows, cols);
    json data = json::array();
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) data.push_back(m(i, j));
    tensors[name] = {{"rows", rows}, {"cols", cols}, {"data", std::move(data)}};
  });
  json j = {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"input_dim", ckpt.params.input_dim()},
            {"hidden_dim", ckpt.params.hidden_dim()},
            {"static_dim", ckpt.params.static_dim()},
            {"vocabulary_hash", ckpt.vocabulary_hash},
            {"seed", ckpt.seed},
            {"best_epoch", ckpt.best_epoch},
            {"tensors", std::move(tensors)}};
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("parse_error", std::string("malformed checkpoint: ") + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat || j.value("version", 0) != kCheckpointVersion) {
    throw Error("parse_error", "unsupported checkpoint format or version");
  }
  Checkpoint ckpt;
  ckpt.params = ModelParams::zeros(j.at("hidden_dim").get<int>(), j.at("input_dim").get<int>(),
                                   j.at("static_dim").get<int>());
  ckpt.vocabulary_hash = j.at("vocabulary_hash").get<std::string>();
  ckpt.seed = j.at("seed").get<std::uint64_t>();
  ckpt.best_epoch = j.at("best_epoch").get<int>();
  const auto& tensors = j.at("tensors");
  ckpt.params.for_each_tensor([&](const char* name, Index rows, Index cols, double* d) {
    const auto& t = tensors.at(name);
    if (t.at("rows").get<Index>() != rows || t.at("cols").get<Index>() != cols) {
      throw Error("parse_error", std::string("tensor shape mismatch for ") + name);
    }
    Eigen::Map<MatrixXd> m(d, rows, cols);
    const auto& data = t.at("data");
    for (Index i = 0; i < rows; ++i)
      for (Index k = 0; k < cols; ++k) m(i, k) = data.at(static_cast<std::size_t>(i * cols + k)).get<double>();
  });
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_file(path));
}

}  // namespace labseq
