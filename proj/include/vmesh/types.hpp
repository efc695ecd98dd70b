// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vmesh {

using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Triangle = std::array<std::uint32_t, 3>;

/// Per-coefficient normalization constants for the stacked
/// (shape, expression) coefficient vector.
struct ParamStats {
  Eigen::VectorXd mean;  // P_s + P_e
  Eigen::VectorXd std;   // P_s + P_e, all > 0
};

/// Linear morphable face model: mean face plus shape and expression
/// subspaces. The flat layout is vertex-major, x,y,z interleaved:
/// element 3*i+c is coordinate c of vertex i.
struct MorphableModel {
  Eigen::VectorXd mean_face;    // 3N
  Eigen::MatrixXd shape_basis;  // 3N x P_s
  Eigen::MatrixXd expr_basis;   // 3N x P_e
  std::vector<Triangle> triangles;
  std::optional<ParamStats> param_stats;
  std::uint64_t seed = 0;  // provenance, carried through the file format

  Eigen::Index num_vertices() const { return mean_face.size() / 3; }
  Eigen::Index num_shape() const { return shape_basis.cols(); }
  Eigen::Index num_expr() const { return expr_basis.cols(); }

  /// Throws ValidationError if any structural invariant fails.
  void validate() const;
};

struct FaceMesh {
  Points3 vertices;  // N x 3
  std::vector<Triangle> triangles;

  void validate() const;
};

/// Shape and expression coefficients, raw (model units) or normalized.
struct ParamVector {
  Eigen::VectorXd shape;  // P_s
  Eigen::VectorXd expr;   // P_e
  bool normalized = false;

  Eigen::VectorXd stacked() const {
    Eigen::VectorXd out(shape.size() + expr.size());
    out << shape, expr;
    return out;
  }

  void validate() const;
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  /// Throws ValidationError unless rotation is orthonormal with det +1
  /// (tolerance 1e-9).
  void validate() const;

  /// Rotation angle in radians.
  double angle() const;

  RigidTransform inverse() const;
};

/// apply(compose(b, a), p) == apply(b, apply(a, p)).
RigidTransform compose(const RigidTransform& second, const RigidTransform& first);

}  // namespace vmesh
