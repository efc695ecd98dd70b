// SPDX-License-Identifier: Apache-2.0
#include "vmesh/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vmesh/errors.hpp"
#include "vmesh/rng.hpp"

namespace vmesh {

DecoderWeights DecoderWeights::zeros(Eigen::Index p_s, Eigen::Index p_e) {
  DecoderWeights w;
  w.shape_head = Eigen::MatrixXd::Zero(p_s, kEmbeddingDim);
  w.shape_bias = Eigen::VectorXd::Zero(p_s);
  w.expr_head = Eigen::MatrixXd::Zero(p_e, kEmbeddingDim);
  w.expr_bias = Eigen::VectorXd::Zero(p_e);
  return w;
}

DecoderWeights DecoderWeights::random_init(Eigen::Index p_s, Eigen::Index p_e,
                                           std::uint64_t seed) {
  Rng rng(seed);
  const double sigma = 1.0 / std::sqrt(static_cast<double>(kEmbeddingDim));
  DecoderWeights w = zeros(p_s, p_e);
  for (Eigen::Index i = 0; i < p_s; ++i)
    for (Eigen::Index j = 0; j < kEmbeddingDim; ++j)
      w.shape_head(i, j) = sigma * rng.normal();
  for (Eigen::Index i = 0; i < p_e; ++i)
    for (Eigen::Index j = 0; j < kEmbeddingDim; ++j)
      w.expr_head(i, j) = sigma * rng.normal();
  return w;
}

void DecoderWeights::validate() const {
  if (shape_head.cols() != kEmbeddingDim || expr_head.cols() != kEmbeddingDim)
    throw ValidationError("weights: heads must have 64 columns");
  if (shape_bias.size() != shape_head.rows() || expr_bias.size() != expr_head.rows())
    throw ValidationError("weights: bias dimension mismatch");
  if (!shape_head.allFinite() || !shape_bias.allFinite() || !expr_head.allFinite() ||
      !expr_bias.allFinite())
    throw ValidationError("weights: non-finite entry");
}

AdamState AdamState::init(const DecoderWeights& w, double lr) {
  AdamState s;
  s.lr = lr;
  s.m = DecoderWeights::zeros(w.shape_head.rows(), w.expr_head.rows());
  s.v = DecoderWeights::zeros(w.shape_head.rows(), w.expr_head.rows());
  return s;
}

ParamVector forward(const Eigen::VectorXd& embedding, const DecoderWeights& w) {
  if (embedding.size() != kEmbeddingDim)
    throw ValidationError("forward: embedding must be 64-dimensional");
  if (!embedding.allFinite()) throw ValidationError("forward: non-finite embedding");
  ParamVector out;
  out.shape = w.shape_head * embedding + w.shape_bias;
  out.expr = w.expr_head * embedding + w.expr_bias;
  out.normalized = true;
  return out;
}

SupervisedLoss supervised_loss(const ParamVector& pred, const ParamVector& gt) {
  if (pred.shape.size() != gt.shape.size() || pred.expr.size() != gt.expr.size())
    throw ValidationError("supervised_loss: dimension mismatch");
  if (pred.normalized != gt.normalized)
    throw ValidationError("supervised_loss: normalization state mismatch");
  SupervisedLoss out;
  const Eigen::VectorXd ds = pred.shape - gt.shape;
  const Eigen::VectorXd de = pred.expr - gt.expr;
  out.loss = ds.squaredNorm() + de.squaredNorm();
  out.grad_shape = 2.0 * ds;
  out.grad_expr = 2.0 * de;
  return out;
}

namespace {

void adam_update_block(Eigen::Ref<Eigen::MatrixXd> w, Eigen::Ref<Eigen::MatrixXd> m,
                       Eigen::Ref<Eigen::MatrixXd> v, const Eigen::MatrixXd& g,
                       const AdamState& s, double bc1, double bc2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v.array().matrix() + (1.0 - s.beta2) * g.array().square().matrix();
  const Eigen::ArrayXXd m_hat = m.array() / bc1;
  const Eigen::ArrayXXd v_hat = v.array() / bc2;
  w.array() -= s.lr * m_hat / (v_hat.sqrt() + s.eps);
}

}  // namespace

void adam_step(AdamState& state, DecoderWeights& w, const DecoderWeights& grads) {
  grads.validate();
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  adam_update_block(w.shape_head, state.m.shape_head, state.v.shape_head,
                    grads.shape_head, state, bc1, bc2);
  adam_update_block(w.expr_head, state.m.expr_head, state.v.expr_head, grads.expr_head,
                    state, bc1, bc2);

  auto update_vec = [&](Eigen::VectorXd& wv, Eigen::VectorXd& mv, Eigen::VectorXd& vv,
                        const Eigen::VectorXd& g) {
    mv = state.beta1 * mv + (1.0 - state.beta1) * g;
    vv = state.beta2 * vv.array().matrix() + (1.0 - state.beta2) * g.array().square().matrix();
    wv.array() -= state.lr * (mv.array() / bc1) / ((vv.array() / bc2).sqrt() + state.eps);
  };
  update_vec(w.shape_bias, state.m.shape_bias, state.v.shape_bias, grads.shape_bias);
  update_vec(w.expr_bias, state.m.expr_bias, state.v.expr_bias, grads.expr_bias);
}

TrainResult train(const std::vector<TrainSample>& dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw ValidationError("train: empty dataset");
  if (cfg.lr <= 0.0 || cfg.batch_size <= 0 || cfg.iters < 0)
    throw ValidationError("train: invalid config");
  const Eigen::Index p_s = dataset.front().params.shape.size();
  const Eigen::Index p_e = dataset.front().params.expr.size();
  for (const auto& s : dataset) {
    if (s.embedding.size() != kEmbeddingDim)
      throw ValidationError("train: embedding must be 64-dimensional");
    if (s.params.shape.size() != p_s || s.params.expr.size() != p_e)
      throw ValidationError("train: inconsistent parameter dimensions");
  }

  TrainResult result;
  result.weights = DecoderWeights::random_init(p_s, p_e, cfg.seed);
  AdamState state = AdamState::init(result.weights, cfg.lr);

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0u);
  std::size_t cursor = order.size();  // forces a shuffle before the first batch

  auto reshuffle = [&]() {
    // Fisher-Yates with the portable generator.
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, i));
      std::swap(order[i], order[j]);
    }
    cursor = 0;
  };

  result.loss_history.reserve(cfg.iters);
  for (int iter = 0; iter < cfg.iters; ++iter) {
    const int batch = std::min<std::size_t>(cfg.batch_size, dataset.size());
    DecoderWeights grads = DecoderWeights::zeros(p_s, p_e);
    double batch_loss = 0.0;
    for (int b = 0; b < batch; ++b) {
      if (cursor >= order.size()) reshuffle();
      const TrainSample& sample = dataset[order[cursor++]];
      const ParamVector pred = forward(sample.embedding, result.weights);
      const SupervisedLoss sl = supervised_loss(pred, sample.params);
      batch_loss += sl.loss;
      grads.shape_head.noalias() += sl.grad_shape * sample.embedding.transpose();
      grads.shape_bias += sl.grad_shape;
      grads.expr_head.noalias() += sl.grad_expr * sample.embedding.transpose();
      grads.expr_bias += sl.grad_expr;
    }
    const double inv = 1.0 / batch;
    grads.shape_head *= inv;
    grads.shape_bias *= inv;
    grads.expr_head *= inv;
    grads.expr_bias *= inv;
    adam_step(state, result.weights, grads);
    result.loss_history.push_back(batch_loss * inv);
  }
  return result;
}

}  // namespace vmesh
