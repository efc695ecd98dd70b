// SPDX-License-Identifier: Apache-2.0
#include "vmesh/registration.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "vmesh/errors.hpp"
#include "vmesh/morphable.hpp"

namespace vmesh {

namespace {

constexpr std::uint32_t kLeafSize = 16;

double squared_distance(const Points3& pts, std::size_t i, const Eigen::Vector3d& p) {
  const double dx = pts(i, 0) - p.x();
  const double dy = pts(i, 1) - p.y();
  const double dz = pts(i, 2) - p.z();
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

NearestNeighborIndex::NearestNeighborIndex(const Points3& points) : points_(points) {
  if (points_.rows() == 0)
    throw ValidationError("nn index: empty point set");
  if (!points_.allFinite())
    throw ValidationError("nn index: non-finite point");
  order_.resize(points_.rows());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.rows() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(order_.size()), 0);
}

std::int32_t NearestNeighborIndex::build(std::uint32_t begin, std::uint32_t end,
                                         int depth) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  // Split on the axis of largest extent.
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(1e300);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-1e300);
  for (std::uint32_t i = begin; i < end; ++i) {
    const Eigen::Vector3d p = points_.row(order_[i]).transpose();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::uint32_t mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (points_(a, axis) != points_(b, axis))
                       return points_(a, axis) < points_(b, axis);
                     return a < b;
                   });
  nodes_[id].axis = axis;
  nodes_[id].split = points_(order_[mid], axis);
  const std::int32_t left = build(begin, mid, depth + 1);
  const std::int32_t right = build(mid, end, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void NearestNeighborIndex::search(std::int32_t node, const Eigen::Vector3d& p,
                                  std::size_t& best, double& best_d2) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      const std::size_t idx = order_[i];
      const double d2 = squared_distance(points_, idx, p);
      if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
        best_d2 = d2;
        best = idx;
      }
    }
    return;
  }
  const double delta = p(n.axis) - n.split;
  const std::int32_t near = delta < 0.0 ? n.left : n.right;
  const std::int32_t far = delta < 0.0 ? n.right : n.left;
  search(near, p, best, best_d2);
  // The far side can still hold the tie with a lower index, so recurse on <=.
  if (delta * delta <= best_d2) search(far, p, best, best_d2);
}

NearestNeighborIndex::Hit NearestNeighborIndex::query(const Eigen::Vector3d& p) const {
  std::size_t best = static_cast<std::size_t>(points_.rows());
  double best_d2 = std::numeric_limits<double>::infinity();
  search(0, p, best, best_d2);
  return {best, std::sqrt(best_d2)};
}

std::vector<NearestNeighborIndex::Hit> NearestNeighborIndex::query_batch(
    const Points3& queries) const {
  std::vector<Hit> hits(queries.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < queries.rows(); ++i)
    hits[i] = query(queries.row(i).transpose());
  return hits;
}

void IcpConfig::validate() const {
  if (max_iters <= 0) throw ValidationError("icp: max_iters must be positive");
  if (!(rel_tol > 0.0) || !std::isfinite(rel_tol))
    throw ValidationError("icp: rel_tol must be positive and finite");
  if (!(reject_multiplier > 0.0) || !std::isfinite(reject_multiplier))
    throw ValidationError("icp: reject_multiplier must be positive and finite");
  if (seed_transform) seed_transform->validate();
}

namespace {

void check_normals(const Points3& normals) {
  for (Eigen::Index i = 0; i < normals.rows(); ++i)
    if (std::abs(normals.row(i).norm() - 1.0) > 1e-6)
      throw ValidationError("point-to-plane: normals must be unit length");
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace

RigidTransform estimate_rigid_point_to_plane(const Points3& src, const Points3& dst,
                                             const Points3& dst_normals,
                                             bool require_full_rank) {
  const Eigen::Index k = src.rows();
  if (k < 6) throw ValidationError("point-to-plane: need at least 6 correspondences");
  if (dst.rows() != k || dst_normals.rows() != k)
    throw ValidationError("point-to-plane: correspondence count mismatch");
  check_normals(dst_normals);

  // Linearized residual (R s + t - d) . n with R ~ I + [w]x gives rows
  // [s x n, n] against unknowns [w; t].
  Eigen::Matrix<double, 6, 6> ata = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> atb = Eigen::Matrix<double, 6, 1>::Zero();
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Vector3d s = src.row(i).transpose();
    const Eigen::Vector3d d = dst.row(i).transpose();
    const Eigen::Vector3d n = dst_normals.row(i).transpose();
    Eigen::Matrix<double, 6, 1> row;
    row << s.cross(n), n;
    ata.noalias() += row * row.transpose();
    atb.noalias() -= row * ((s - d).dot(n));
  }

  Eigen::JacobiSVD<Eigen::Matrix<double, 6, 6>> svd(
      ata, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double cond_floor = svd.singularValues()(0) * 1e-12;
  const bool deficient = svd.singularValues()(5) <= cond_floor;
  if (deficient && require_full_rank)
    throw NumericError("point-to-plane: rank-deficient 6x6 system");

  Eigen::Matrix<double, 6, 1> x;
  if (!deficient) {
    x = svd.solve(atb);
  } else {
    // Minimum-norm solution; components in the null space stay zero.
    Eigen::Matrix<double, 6, 1> inv_s = Eigen::Matrix<double, 6, 1>::Zero();
    for (int i = 0; i < 6; ++i)
      if (svd.singularValues()(i) > cond_floor)
        inv_s(i) = 1.0 / svd.singularValues()(i);
    x = svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose() * atb;
  }

  Eigen::Matrix3d skew;
  skew << 0.0, -x(2), x(1), x(2), 0.0, -x(0), -x(1), x(0), 0.0;
  RigidTransform out;
  out.rotation = nearest_rotation(Eigen::Matrix3d::Identity() + skew);
  out.translation = x.tail<3>();
  out.validate();
  return out;
}

double point_to_plane_rmse(const Points3& src, const Points3& target_points,
                           const Points3& target_normals,
                           const NearestNeighborIndex& index) {
  if (src.rows() == 0) throw ValidationError("point_to_plane_rmse: empty source");
  if (target_points.rows() != target_normals.rows())
    throw ValidationError("point_to_plane_rmse: target/normal count mismatch");
  check_normals(target_normals);
  // Residuals are computed in parallel, summed serially for determinism.
  Eigen::VectorXd sq(src.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < src.rows(); ++i) {
    const Eigen::Vector3d p = src.row(i).transpose();
    const auto hit = index.query(p);
    const Eigen::Vector3d q = target_points.row(hit.index).transpose();
    const Eigen::Vector3d n = target_normals.row(hit.index).transpose();
    const double r = (p - q).dot(n);
    sq(i) = r * r;
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < src.rows(); ++i) sum += sq(i);
  const double rmse = std::sqrt(sum / static_cast<double>(src.rows()));
  if (!std::isfinite(rmse)) throw NumericError("point_to_plane_rmse: non-finite result");
  return rmse;
}

double point_to_plane_rmse_serial(const Points3& src, const Points3& target_points,
                                  const Points3& target_normals) {
  if (src.rows() == 0) throw ValidationError("point_to_plane_rmse: empty source");
  check_normals(target_normals);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < src.rows(); ++i) {
    const Eigen::Vector3d p = src.row(i).transpose();
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_j = 0;
    for (Eigen::Index j = 0; j < target_points.rows(); ++j) {
      const double d2 = (target_points.row(j) - src.row(i)).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_j = j;
      }
    }
    const Eigen::Vector3d q = target_points.row(best_j).transpose();
    const Eigen::Vector3d n = target_normals.row(best_j).transpose();
    const double r = (p - q).dot(n);
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(src.rows()));
}

namespace {

Points3 transform_points(const Points3& pts, const RigidTransform& xf) {
  Points3 out(pts.rows(), 3);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    out.row(i) = (xf.rotation * pts.row(i).transpose() + xf.translation).transpose();
  return out;
}

}  // namespace

IcpResult icp(const Points3& source, const Points3& target_points,
              const Points3& target_normals, const IcpConfig& cfg) {
  cfg.validate();
  if (source.rows() == 0 || target_points.rows() == 0)
    throw ValidationError("icp: empty point set");
  check_normals(target_normals);

  const NearestNeighborIndex index(target_points);

  IcpResult result;
  result.transform = cfg.seed_transform.value_or(RigidTransform::identity());
  result.rmse =
      point_to_plane_rmse(transform_points(source, result.transform), target_points,
                          target_normals, index);
  if (result.rmse < 1e-12) {
    result.converged = true;
    return result;
  }

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const Points3 moved = transform_points(source, result.transform);
    const auto hits = index.query_batch(moved);

    std::vector<double> dists(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) dists[i] = hits[i].distance;
    std::vector<double> sorted = dists;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double cutoff = cfg.reject_multiplier * median;

    std::vector<Eigen::Index> keep;
    keep.reserve(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i)
      if (dists[i] <= cutoff || median == 0.0) keep.push_back(static_cast<Eigen::Index>(i));
    if (keep.size() < 6)
      throw NumericError("icp: fewer than 6 inlier correspondences");

    Points3 s(keep.size(), 3), d(keep.size(), 3), n(keep.size(), 3);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      s.row(i) = moved.row(keep[i]);
      d.row(i) = target_points.row(hits[keep[i]].index);
      n.row(i) = target_normals.row(hits[keep[i]].index);
    }

    const RigidTransform inc = estimate_rigid_point_to_plane(s, d, n);
    const RigidTransform candidate = compose(inc, result.transform);
    const double rmse = point_to_plane_rmse(transform_points(source, candidate),
                                            target_points, target_normals, index);
    if (!std::isfinite(rmse)) throw NumericError("icp: non-finite RMSE");

    if (rmse > result.rmse + 1e-12) {
      // The linearized step no longer improves; stop at the current pose.
      result.converged = true;
      break;
    }
    const double prev = result.rmse;
    result.transform = candidate;
    result.rmse = rmse;
    result.iterations = iter + 1;
    if (prev - rmse <= cfg.rel_tol * std::max(prev, 1e-300)) {
      result.converged = true;
      break;
    }
  }
  return result;
}

IcpResult icp(const FaceMesh& source, const FaceMesh& target, const IcpConfig& cfg) {
  const Points3 normals = vertex_normals(target);
  return icp(source.vertices, target.vertices, normals, cfg);
}

}  // namespace vmesh
