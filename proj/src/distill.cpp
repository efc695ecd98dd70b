// SPDX-License-Identifier: Apache-2.0
#include "vmesh/distill.hpp"

#include <cmath>

#include "vmesh/errors.hpp"

namespace vmesh {

namespace {
constexpr double kEps = 1e-12;
}

void EmbeddingBatch::validate() const {
  if (rows.rows() < 2)
    throw ValidationError("embedding batch: batch size must be at least 2");
  if (!rows.allFinite()) throw ValidationError("embedding batch: non-finite entry");
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    if (rows.row(i).norm() == 0.0)
      throw ValidationError("embedding batch: zero row " + std::to_string(i));
}

double cosine_kernel(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0)
    throw ValidationError("cosine_kernel: zero-norm input");
  return 0.5 * (u.dot(v) / (nu * nv) + 1.0);
}

namespace {

// Pairwise kernel matrix K(z_i, z_j); symmetric, diagonal left at 1.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& rows) {
  const Eigen::Index b = rows.rows();
  Eigen::VectorXd norms(b);
  for (Eigen::Index i = 0; i < b; ++i) norms(i) = rows.row(i).norm();
  Eigen::MatrixXd k(b, b);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < b; ++j)
      k(i, j) = 0.5 * (rows.row(i).dot(rows.row(j)) / (norms(i) * norms(j)) + 1.0);
  return k;
}

Eigen::MatrixXd conditionals_from_kernel(const Eigen::MatrixXd& k) {
  const Eigen::Index b = k.rows();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(b, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    double denom = kEps;
    for (Eigen::Index i = 0; i < b; ++i)
      if (i != j) denom += k(i, j);
    for (Eigen::Index i = 0; i < b; ++i)
      if (i != j) p(i, j) = k(i, j) / denom;
  }
  return p;
}

}  // namespace

Eigen::MatrixXd conditional_probabilities(const EmbeddingBatch& batch) {
  batch.validate();
  return conditionals_from_kernel(kernel_matrix(batch.rows));
}

Eigen::MatrixXd conditional_probabilities_serial(const EmbeddingBatch& batch) {
  batch.validate();
  // Same per-entry arithmetic as kernel_matrix, minus the parallel loop.
  const Eigen::Index b = batch.batch_size();
  Eigen::VectorXd norms(b);
  for (Eigen::Index i = 0; i < b; ++i) norms(i) = batch.rows.row(i).norm();
  Eigen::MatrixXd k(b, b);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < b; ++j)
      k(i, j) =
          0.5 * (batch.rows.row(i).dot(batch.rows.row(j)) / (norms(i) * norms(j)) + 1.0);
  return conditionals_from_kernel(k);
}

double divergence_loss(const EmbeddingBatch& teacher, const EmbeddingBatch& student) {
  if (teacher.batch_size() != student.batch_size())
    throw ValidationError("divergence_loss: batch size mismatch");
  const Eigen::MatrixXd p = conditional_probabilities(teacher);
  const Eigen::MatrixXd q = conditional_probabilities(student);
  const Eigen::Index b = p.rows();
  double loss = 0.0;
  // p(j, i) is the teacher's probability of neighbor j given point i.
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < b; ++j)
      if (j != i) loss += p(j, i) * std::log((p(j, i) + kEps) / (q(j, i) + kEps));
  return loss;
}

Eigen::MatrixXd divergence_grad(const EmbeddingBatch& teacher,
                                const EmbeddingBatch& student) {
  if (teacher.batch_size() != student.batch_size())
    throw ValidationError("divergence_grad: batch size mismatch");
  teacher.validate();
  student.validate();

  const Eigen::Index b = student.batch_size();
  const Eigen::Index nu = student.dim();
  const Eigen::MatrixXd p = conditional_probabilities(teacher);
  const Eigen::MatrixXd k = kernel_matrix(student.rows);
  const Eigen::MatrixXd q = conditionals_from_kernel(k);

  // Column sums S_i of the student kernel (the conditional denominators).
  Eigen::VectorXd denom(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    double s = kEps;
    for (Eigen::Index m = 0; m < b; ++m)
      if (m != i) s += k(m, i);
    denom(i) = s;
  }

  // dL/dK(m,i) through column i alone:
  //   q(m,i) = K(m,i)/denom(i), L = sum_i sum_{j!=i} p(j,i) log((p+eps)/(q+eps))
  //   dL/dq(j,i) = -p(j,i)/(q(j,i)+eps)
  //   dq(j,i)/dK(m,i) = (delta_mj - q(j,i)) / denom(i)
  // so dL/dK(m,i) = (T_i - p(m,i)/(q(m,i)+eps)) / denom(i)
  // with T_i = sum_{j!=i} p(j,i) q(j,i)/(q(j,i)+eps).
  Eigen::VectorXd t(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < b; ++j)
      if (j != i) acc += p(j, i) * q(j, i) / (q(j, i) + kEps);
    t(i) = acc;
  }
  Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(b, b);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index m = 0; m < b; ++m)
      if (m != i) dk(m, i) = (t(i) - p(m, i) / (q(m, i) + kEps)) / denom(i);

  // K is symmetric in its arguments; total sensitivity of the pair (m, i)
  // gathers both column roles.
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(b, nu);
  Eigen::VectorXd norms(b);
  for (Eigen::Index i = 0; i < b; ++i) norms(i) = student.rows.row(i).norm();
#pragma omp parallel for schedule(static)
  for (Eigen::Index m = 0; m < b; ++m) {
    const Eigen::VectorXd zm = student.rows.row(m).transpose();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nu);
    for (Eigen::Index i = 0; i < b; ++i) {
      if (i == m) continue;
      const double w = dk(m, i) + dk(i, m);
      const Eigen::VectorXd zi = student.rows.row(i).transpose();
      const double dot = zm.dot(zi);
      // dK/dz_m for K = 0.5 (z_m . z_i / (|z_m||z_i|) + 1)
      g += w * 0.5 *
           (zi / (norms(m) * norms(i)) - dot * zm / (norms(m) * norms(m) * norms(m) * norms(i)));
    }
    grad.row(m) = g.transpose();
  }
  return grad;
}

LossWithGrad pseudo_gt_loss(const ParamVector& teacher_params,
                            const ParamVector& student_params) {
  if (teacher_params.shape.size() != student_params.shape.size() ||
      teacher_params.expr.size() != student_params.expr.size())
    throw ValidationError("pseudo_gt_loss: parameter dimension mismatch");
  LossWithGrad out;
  const Eigen::VectorXd ds = student_params.shape - teacher_params.shape;
  const Eigen::VectorXd de = student_params.expr - teacher_params.expr;
  out.loss = ds.squaredNorm() + de.squaredNorm();
  out.grad_shape = 2.0 * ds;
  out.grad_expr = 2.0 * de;
  return out;
}

KdLoss kd_loss(const EmbeddingBatch& teacher_emb, const EmbeddingBatch& student_emb,
               const ParamVector& teacher_params, const ParamVector& student_params,
               double divergence_weight) {
  KdLoss out;
  out.pseudo_gt = pseudo_gt_loss(teacher_params, student_params).loss;
  out.divergence = divergence_loss(teacher_emb, student_emb);
  out.total = out.pseudo_gt + divergence_weight * out.divergence;
  return out;
}

}  // namespace vmesh
