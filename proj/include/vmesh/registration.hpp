// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "vmesh/types.hpp"

namespace vmesh {

/// Exact nearest-neighbor index over a fixed point set (kd-tree).
/// Ties are broken toward the lower point index, matching a linear scan
/// that updates only on strict improvement.
class NearestNeighborIndex {
public:
  explicit NearestNeighborIndex(const Points3& points);

  struct Hit {
    std::size_t index;
    double distance;
  };

  Hit query(const Eigen::Vector3d& p) const;

  /// One hit per row of queries. OpenMP-parallel, order-deterministic.
  std::vector<Hit> query_batch(const Points3& queries) const;

  std::size_t size() const { return points_.rows(); }

private:
  struct Node {
    int axis = -1;              // -1 marks a leaf
    double split = 0.0;
    std::int32_t left = -1, right = -1;
    std::uint32_t begin = 0, end = 0;  // leaf range into order_
  };

  void search(std::int32_t node, const Eigen::Vector3d& p, std::size_t& best,
              double& best_d2) const;
  std::int32_t build(std::uint32_t begin, std::uint32_t end, int depth);

  Points3 points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

struct IcpConfig {
  int max_iters = 50;
  double rel_tol = 1e-6;           // relative RMSE change
  double reject_multiplier = 3.0;  // drop matches beyond mult * median distance
  std::optional<RigidTransform> seed_transform;

  void validate() const;
};

struct IcpResult {
  RigidTransform transform;
  double rmse = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Point-to-plane rigid estimation: minimizes sum(((R*s + t - d) . n)^2)
/// under small-angle linearization, then re-projects the rotation to the
/// nearest orthonormal matrix. With require_full_rank the 6x6 system must
/// be full rank (throws NumericError otherwise); without it a minimum-norm
/// solution is returned and unconstrained components come out zero.
RigidTransform estimate_rigid_point_to_plane(const Points3& src, const Points3& dst,
                                             const Points3& dst_normals,
                                             bool require_full_rank = true);

/// sqrt(mean of squared normal-projected distances from each src point to
/// the tangent plane at its nearest target point).
double point_to_plane_rmse(const Points3& src, const Points3& target_points,
                           const Points3& target_normals,
                           const NearestNeighborIndex& index);
double point_to_plane_rmse_serial(const Points3& src, const Points3& target_points,
                                  const Points3& target_normals);

/// ICP over raw point sets. Target normals must be unit length.
IcpResult icp(const Points3& source, const Points3& target_points,
              const Points3& target_normals, const IcpConfig& cfg);

/// ICP between meshes; target normals are computed from its triangles.
IcpResult icp(const FaceMesh& source, const FaceMesh& target, const IcpConfig& cfg);

}  // namespace vmesh
