// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vmesh/types.hpp"

namespace vmesh {

/// B x nu feature rows (teacher or student embeddings).
struct EmbeddingBatch {
  Eigen::MatrixXd rows;

  Eigen::Index batch_size() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }

  /// B >= 2, finite entries, every row nonzero.
  void validate() const;
};

/// Scaled and shifted cosine similarity: 0.5*(cos(u,v) + 1), in [0,1].
double cosine_kernel(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Neighbor-selection conditional probabilities. Entry (i,j) is
/// K(z_i, z_j) / sum_{k != j} K(z_k, z_j); diagonal zero; each column
/// (excluding the diagonal) sums to 1. OpenMP-parallel kernel matrix.
Eigen::MatrixXd conditional_probabilities(const EmbeddingBatch& batch);
Eigen::MatrixXd conditional_probabilities_serial(const EmbeddingBatch& batch);

/// KL divergence between teacher and student conditionals:
/// sum_i sum_{j != i} p_{j|i} log((p_{j|i}+eps)/(q_{j|i}+eps)).
double divergence_loss(const EmbeddingBatch& teacher, const EmbeddingBatch& student);

/// Analytic gradient of divergence_loss with respect to every student entry.
Eigen::MatrixXd divergence_grad(const EmbeddingBatch& teacher,
                                const EmbeddingBatch& student);

struct LossWithGrad {
  double loss = 0.0;
  Eigen::VectorXd grad_shape;
  Eigen::VectorXd grad_expr;
};

/// ||a_s^T - a_s||^2 + ||a_e^T - a_e||^2 with gradient 2(a - a^T) blockwise.
LossWithGrad pseudo_gt_loss(const ParamVector& teacher_params,
                            const ParamVector& student_params);

struct KdLoss {
  double pseudo_gt = 0.0;
  double divergence = 0.0;
  double total = 0.0;  // pseudo_gt + divergence_weight * divergence
};

/// Combined distillation loss. divergence_weight 1.0 reproduces the plain sum.
KdLoss kd_loss(const EmbeddingBatch& teacher_emb, const EmbeddingBatch& student_emb,
               const ParamVector& teacher_params, const ParamVector& student_params,
               double divergence_weight = 1.0);

}  // namespace vmesh
