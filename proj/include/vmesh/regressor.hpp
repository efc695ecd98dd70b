// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "vmesh/types.hpp"

namespace vmesh {

inline constexpr int kEmbeddingDim = 64;

/// Linear decoder heads mapping a 64-d voice embedding to normalized
/// shape and expression coefficients.
struct DecoderWeights {
  Eigen::MatrixXd shape_head;  // P_s x 64
  Eigen::VectorXd shape_bias;  // P_s
  Eigen::MatrixXd expr_head;   // P_e x 64
  Eigen::VectorXd expr_bias;   // P_e

  static DecoderWeights zeros(Eigen::Index p_s, Eigen::Index p_e);
  static DecoderWeights random_init(Eigen::Index p_s, Eigen::Index p_e,
                                    std::uint64_t seed);
  void validate() const;
};

struct AdamState {
  std::int64_t step = 0;
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  DecoderWeights m;  // first moments, shaped like the weights
  DecoderWeights v;  // second moments

  static AdamState init(const DecoderWeights& w, double lr);
};

ParamVector forward(const Eigen::VectorXd& embedding, const DecoderWeights& w);

struct SupervisedLoss {
  double loss = 0.0;
  Eigen::VectorXd grad_shape;  // d loss / d pred, blockwise 2(pred - gt)
  Eigen::VectorXd grad_expr;
};

/// L2 parameter loss; pred and gt must share the normalized flag.
SupervisedLoss supervised_loss(const ParamVector& pred, const ParamVector& gt);

/// One Adam update with bias correction. Deterministic.
void adam_step(AdamState& state, DecoderWeights& w, const DecoderWeights& grads);

struct TrainSample {
  Eigen::VectorXd embedding;  // 64
  ParamVector params;         // normalized ground truth
};

struct TrainConfig {
  double lr = 2e-4;
  int batch_size = 32;
  int iters = 2000;
  std::uint64_t seed = 0;
};

struct TrainResult {
  DecoderWeights weights;
  std::vector<double> loss_history;  // mean batch loss per iteration
};

/// Mini-batch Adam loop with seeded shuffling; bitwise deterministic for a
/// fixed (dataset, cfg) pair.
TrainResult train(const std::vector<TrainSample>& dataset, const TrainConfig& cfg);

}  // namespace vmesh
