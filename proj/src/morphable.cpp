// SPDX-License-Identifier: Apache-2.0
#include "vmesh/morphable.hpp"

#include <cmath>
#include <string>

#include "vmesh/errors.hpp"

namespace vmesh {

void MorphableModel::validate() const {
  if (mean_face.size() % 3 != 0 || mean_face.size() == 0)
    throw ValidationError("model: mean_face length must be a positive multiple of 3");
  const Eigen::Index n3 = mean_face.size();
  if (shape_basis.rows() != n3)
    throw ValidationError("model: shape_basis must have 3N rows");
  if (expr_basis.rows() != n3)
    throw ValidationError("model: expr_basis must have 3N rows");
  if (shape_basis.cols() == 0 || expr_basis.cols() == 0)
    throw ValidationError("model: bases must have at least one column");
  if (!mean_face.allFinite() || !shape_basis.allFinite() || !expr_basis.allFinite())
    throw ValidationError("model: non-finite entries");
  const auto n = static_cast<std::uint32_t>(num_vertices());
  for (const auto& t : triangles)
    for (auto idx : t)
      if (idx >= n) throw ValidationError("model: triangle index out of range");
  if (param_stats) {
    const Eigen::Index p = shape_basis.cols() + expr_basis.cols();
    if (param_stats->mean.size() != p || param_stats->std.size() != p)
      throw ValidationError("model: param_stats dimension mismatch");
    if ((param_stats->std.array() <= 0.0).any())
      throw ValidationError("model: param_stats std must be positive");
  }
}

void FaceMesh::validate() const {
  if (vertices.rows() == 0) throw ValidationError("mesh: no vertices");
  if (!vertices.allFinite()) throw ValidationError("mesh: non-finite vertex");
  const auto n = static_cast<std::uint32_t>(vertices.rows());
  for (const auto& t : triangles)
    for (auto idx : t)
      if (idx >= n) throw ValidationError("mesh: triangle index out of range");
}

void ParamVector::validate() const {
  if (!shape.allFinite() || !expr.allFinite())
    throw ValidationError("params: non-finite coefficient");
}

void RigidTransform::validate() const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw ValidationError("transform: rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw ValidationError("transform: rotation determinant is not +1");
  if (!translation.allFinite()) throw ValidationError("transform: non-finite translation");
}

double RigidTransform::angle() const {
  const double c = std::clamp((rotation.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform compose(const RigidTransform& second, const RigidTransform& first) {
  RigidTransform out;
  out.rotation = second.rotation * first.rotation;
  out.translation = second.rotation * first.translation + second.translation;
  return out;
}

namespace {

void check_synthesis_inputs(const MorphableModel& model, const ParamVector& params) {
  if (params.normalized)
    throw ValidationError("synthesize: params are normalized, denormalize first");
  if (params.shape.size() != model.num_shape())
    throw ValidationError("synthesize: shape coefficient count mismatch");
  if (params.expr.size() != model.num_expr())
    throw ValidationError("synthesize: expression coefficient count mismatch");
}

}  // namespace

FaceMesh synthesize(const MorphableModel& model, const ParamVector& params) {
  check_synthesis_inputs(model, params);
  const Eigen::Index n = model.num_vertices();
  const Eigen::Index ps = model.num_shape();
  const Eigen::Index pe = model.num_expr();
  FaceMesh mesh;
  mesh.vertices.resize(n, 3);
  mesh.triangles = model.triangles;

  // Row-wise accumulation keeps each output element's summation order fixed,
  // so the parallel path is bitwise identical to the serial one.
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const Eigen::Index row = 3 * i + c;
      double acc = model.mean_face(row);
      for (Eigen::Index k = 0; k < ps; ++k)
        acc += model.shape_basis(row, k) * params.shape(k);
      for (Eigen::Index k = 0; k < pe; ++k)
        acc += model.expr_basis(row, k) * params.expr(k);
      mesh.vertices(i, c) = acc;
    }
  }
  return mesh;
}

FaceMesh synthesize_serial(const MorphableModel& model, const ParamVector& params) {
  check_synthesis_inputs(model, params);
  const Eigen::Index n = model.num_vertices();
  const Eigen::Index ps = model.num_shape();
  const Eigen::Index pe = model.num_expr();
  FaceMesh mesh;
  mesh.vertices.resize(n, 3);
  mesh.triangles = model.triangles;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const Eigen::Index row = 3 * i + c;
      double acc = model.mean_face(row);
      for (Eigen::Index k = 0; k < ps; ++k)
        acc += model.shape_basis(row, k) * params.shape(k);
      for (Eigen::Index k = 0; k < pe; ++k)
        acc += model.expr_basis(row, k) * params.expr(k);
      mesh.vertices(i, c) = acc;
    }
  }
  return mesh;
}

FaceMesh apply_pose(const FaceMesh& mesh, const RigidTransform& xf) {
  xf.validate();
  FaceMesh out;
  out.triangles = mesh.triangles;
  out.vertices.resize(mesh.vertices.rows(), 3);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    const Eigen::Vector3d v = mesh.vertices.row(i).transpose();
    out.vertices.row(i) = (xf.rotation * v + xf.translation).transpose();
  }
  return out;
}

namespace {

Points3 accumulate_face_normals(const FaceMesh& mesh) {
  if (mesh.triangles.empty())
    throw ValidationError("vertex_normals: mesh has no triangles");
  Points3 acc = Points3::Zero(mesh.vertices.rows(), 3);
  for (const auto& t : mesh.triangles) {
    const Eigen::Vector3d a = mesh.vertices.row(t[0]).transpose();
    const Eigen::Vector3d b = mesh.vertices.row(t[1]).transpose();
    const Eigen::Vector3d c = mesh.vertices.row(t[2]).transpose();
    // Cross product magnitude is twice the triangle area, giving the
    // area weighting for free.
    const Eigen::Vector3d fn = (b - a).cross(c - a);
    for (auto idx : t) acc.row(idx) += fn.transpose();
  }
  return acc;
}

Points3 normalize_rows_or_throw(Points3 acc) {
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    const double norm = acc.row(i).norm();
    if (norm < 1e-300)
      throw NumericError("vertex_normals: vertex " + std::to_string(i) +
                         " has no incident non-degenerate face");
    acc.row(i) /= norm;
  }
  return acc;
}

}  // namespace

Points3 vertex_normals(const FaceMesh& mesh) {
  Points3 acc = accumulate_face_normals(mesh);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    const double norm = acc.row(i).norm();
    if (norm >= 1e-300) acc.row(i) /= norm;
  }
  // Degenerate rows are left unnormalized; report them serially so the
  // error message is deterministic.
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    if (std::abs(acc.row(i).norm() - 1.0) > 1e-6)
      throw NumericError("vertex_normals: vertex " + std::to_string(i) +
                         " has no incident non-degenerate face");
  }
  return acc;
}

Points3 vertex_normals_serial(const FaceMesh& mesh) {
  return normalize_rows_or_throw(accumulate_face_normals(mesh));
}

ParamVector normalize_params(const ParamVector& params, const ParamStats& stats) {
  if (params.normalized)
    throw ValidationError("normalize_params: input already normalized");
  const Eigen::Index ps = params.shape.size();
  const Eigen::Index pe = params.expr.size();
  if (stats.mean.size() != ps + pe || stats.std.size() != ps + pe)
    throw ValidationError("normalize_params: stats dimension mismatch");
  if ((stats.std.array() <= 0.0).any())
    throw ValidationError("normalize_params: std must be positive");
  ParamVector out;
  out.shape = (params.shape - stats.mean.head(ps)).cwiseQuotient(stats.std.head(ps));
  out.expr = (params.expr - stats.mean.tail(pe)).cwiseQuotient(stats.std.tail(pe));
  out.normalized = true;
  return out;
}

ParamVector denormalize_params(const ParamVector& params, const ParamStats& stats) {
  if (!params.normalized)
    throw ValidationError("denormalize_params: input is not normalized");
  const Eigen::Index ps = params.shape.size();
  const Eigen::Index pe = params.expr.size();
  if (stats.mean.size() != ps + pe || stats.std.size() != ps + pe)
    throw ValidationError("denormalize_params: stats dimension mismatch");
  if ((stats.std.array() <= 0.0).any())
    throw ValidationError("denormalize_params: std must be positive");
  ParamVector out;
  out.shape = params.shape.cwiseProduct(stats.std.head(ps)) + stats.mean.head(ps);
  out.expr = params.expr.cwiseProduct(stats.std.tail(pe)) + stats.mean.tail(pe);
  out.normalized = false;
  return out;
}

}  // namespace vmesh
