// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "test_util.hpp"
#include "vmesh/errors.hpp"
#include "vmesh/morphable.hpp"
#include "vmesh/registration.hpp"

using namespace vmesh;

namespace {

Points3 random_points(int n, Rng& rng, double scale = 1.0) {
  Points3 pts(n, 3);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts(i) = scale * rng.normal();
  return pts;
}

std::size_t linear_scan(const Points3& pts, const Eigen::Vector3d& q) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const double dx = pts(i, 0) - q.x();
    const double dy = pts(i, 1) - q.y();
    const double dz = pts(i, 2) - q.z();
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < best) {
      best = d2;
      best_i = i;
    }
  }
  return best_i;
}

double bbox_diagonal(const Points3& pts) {
  return (pts.colwise().maxCoeff() - pts.colwise().minCoeff()).norm();
}

Points3 apply_xf(const Points3& pts, const RigidTransform& xf) {
  Points3 out(pts.rows(), 3);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    out.row(i) = (xf.rotation * pts.row(i).transpose() + xf.translation).transpose();
  return out;
}

}  // namespace

TEST_CASE("nn index: a stored point is its own nearest neighbor") {
  Rng rng(201);
  const Points3 pts = random_points(64, rng);
  const NearestNeighborIndex index(pts);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const auto hit = index.query(pts.row(i).transpose());
    CHECK(hit.index == static_cast<std::size_t>(i));
    CHECK(hit.distance == 0.0);
  }
}

TEST_CASE("nn index: agrees with the linear-scan oracle") {
  Rng rng(202);
  const Points3 pts = random_points(1000, rng);
  const NearestNeighborIndex index(pts);
  for (int q = 0; q < 100; ++q) {
    const Eigen::Vector3d query(rng.normal(), rng.normal(), rng.normal());
    CHECK(index.query(query).index == linear_scan(pts, query));
  }
}

TEST_CASE("nn index: equidistant tie goes to the lower index") {
  Points3 pts(2, 3);
  pts << 1, 0, 0, -1, 0, 0;
  const NearestNeighborIndex index(pts);
  CHECK(index.query({0, 0, 0}).index == 0);
  // And the same with the points swapped.
  Points3 swapped(2, 3);
  swapped << -1, 0, 0, 1, 0, 0;
  CHECK(NearestNeighborIndex(swapped).query({0, 0, 0}).index == 0);
}

TEST_CASE("nn index: 200 random instances match the oracle") {
  Rng rng(203);
  for (int inst = 0; inst < 200; ++inst) {
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 60));
    const Points3 pts = random_points(n, rng);
    const NearestNeighborIndex index(pts);
    for (int q = 0; q < 5; ++q) {
      const Eigen::Vector3d query(rng.normal(), rng.normal(), rng.normal());
      REQUIRE(index.query(query).index == linear_scan(pts, query));
    }
  }
}

TEST_CASE("nn index rejects an empty set") {
  CHECK_THROWS_AS(NearestNeighborIndex(Points3(0, 3)), ValidationError);
}

TEST_CASE("point-to-plane estimate: identical clouds give the identity") {
  Rng rng(204);
  const Points3 src = random_points(50, rng);
  Points3 normals(50, 3);
  for (Eigen::Index i = 0; i < 50; ++i)
    normals.row(i) = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal())
                         .normalized()
                         .transpose();
  const RigidTransform xf = estimate_rigid_point_to_plane(src, src, normals);
  CHECK(xf.angle() < 1e-9);
  CHECK(xf.translation.norm() < 1e-9);
}

TEST_CASE("point-to-plane estimate: recovers a small rigid motion") {
  Rng rng(205);
  const Points3 src = random_points(80, rng);
  const auto truth = test::rotation_about({0.3, -1.0, 0.7}, 4.0 * M_PI / 180.0,
                                          {0.02, -0.01, 0.03});
  const Points3 dst = apply_xf(src, truth);
  Points3 normals(src.rows(), 3);
  for (Eigen::Index i = 0; i < src.rows(); ++i)
    normals.row(i) = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal())
                         .normalized()
                         .transpose();
  const RigidTransform est = estimate_rigid_point_to_plane(src, dst, normals);
  const RigidTransform err = compose(est.inverse(), truth);
  CHECK(err.angle() < 0.1 * M_PI / 180.0);
  CHECK(err.translation.norm() < 1e-3 * bbox_diagonal(src));
}

TEST_CASE("point-to-plane estimate: parallel normals constrain only z") {
  Rng rng(206);
  Points3 src = random_points(30, rng);
  Points3 dst = src;
  dst.col(2).array() += 0.25;
  Points3 normals = Points3::Zero(30, 3);
  normals.col(2).setOnes();
  CHECK_THROWS_AS(estimate_rigid_point_to_plane(src, dst, normals), NumericError);
  const RigidTransform xf = estimate_rigid_point_to_plane(src, dst, normals, false);
  CHECK(xf.translation.z() == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(std::abs(xf.translation.x()) < 1e-9);
  CHECK(std::abs(xf.translation.y()) < 1e-9);
}

TEST_CASE("point_to_plane_rmse: zero on itself, exact on a lifted plane") {
  Rng rng(207);
  Points3 plane(100, 3);
  for (Eigen::Index i = 0; i < 100; ++i)
    plane.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0;
  Points3 normals = Points3::Zero(100, 3);
  normals.col(2).setOnes();
  const NearestNeighborIndex index(plane);
  CHECK(point_to_plane_rmse(plane, plane, normals, index) == 0.0);
  Points3 lifted = plane;
  lifted.col(2).array() += 0.125;
  CHECK(point_to_plane_rmse(lifted, plane, normals, index) ==
        doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("point_to_plane_rmse: matches the naive double-loop oracle") {
  Rng rng(208);
  const Points3 target = random_points(120, rng);
  const Points3 src = random_points(40, rng);
  Points3 normals(target.rows(), 3);
  for (Eigen::Index i = 0; i < target.rows(); ++i)
    normals.row(i) = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal())
                         .normalized()
                         .transpose();
  const NearestNeighborIndex index(target);
  const double got = point_to_plane_rmse(src, target, normals, index);

  double sum = 0.0;
  for (Eigen::Index i = 0; i < src.rows(); ++i) {
    const std::size_t j = linear_scan(target, src.row(i).transpose());
    const double r =
        (src.row(i) - target.row(j)).dot(normals.row(j));
    sum += r * r;
  }
  const double expected = std::sqrt(sum / src.rows());
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  CHECK(point_to_plane_rmse_serial(src, target, normals) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("icp: self-registration is an immediate fixed point") {
  const FaceMesh mesh = test::sphere_patch(15, 15);
  const IcpResult result = icp(mesh, mesh, {});
  CHECK(result.rmse < 1e-9);
  CHECK(result.iterations <= 2);
  CHECK(result.converged);
  CHECK(result.transform.angle() < 1e-6);
}

TEST_CASE("icp: inverts a random rigid motion") {
  Rng rng(209);
  FaceMesh target = test::sphere_patch(18, 18);
  // Mild anisotropy so the surface has orientation cues.
  target.vertices.col(1) *= 1.3;
  target.vertices.col(2) *= 0.8;
  const double diag = bbox_diagonal(target.vertices);
  for (int trial = 0; trial < 5; ++trial) {
    const double angle = rng.uniform(2.0, 10.0) * M_PI / 180.0;
    const auto motion = test::rotation_about(
        {rng.normal(), rng.normal(), rng.normal()}, angle,
        {0.05 * diag * rng.uniform(-1, 1), 0.05 * diag * rng.uniform(-1, 1),
         0.05 * diag * rng.uniform(-1, 1)});
    FaceMesh source = target;
    source.vertices = apply_xf(target.vertices, motion);
    IcpConfig cfg;
    cfg.rel_tol = 1e-12;
    cfg.max_iters = 100;
    const IcpResult result = icp(source, target, cfg);
    REQUIRE(result.rmse < 1e-6 * diag);
    const RigidTransform err = compose(result.transform, motion);
    CHECK(err.angle() < 0.5 * M_PI / 180.0);
    CHECK(err.translation.norm() < 1e-3 * diag);
    CHECK_NOTHROW(result.transform.validate());
  }
}

TEST_CASE("icp: noise floor bounds the converged rmse") {
  Rng rng(210);
  const FaceMesh target = test::sphere_patch(16, 16);
  const double diag = bbox_diagonal(target.vertices);
  const double sigma = 0.002 * diag;
  FaceMesh source = target;
  for (Eigen::Index i = 0; i < source.vertices.size(); ++i)
    source.vertices(i) += sigma * rng.normal();
  const IcpResult result = icp(source, target, {});
  CHECK(result.rmse >= 0.5 * sigma);
  CHECK(result.rmse <= 2.0 * sigma);
}

TEST_CASE("icp: final rmse never exceeds the identity-pose rmse") {
  Rng rng(211);
  const FaceMesh target = test::sphere_patch(14, 14);
  FaceMesh source = target;
  const auto motion = test::rotation_about({1, 1, 0}, 0.1, {0.05, 0.02, -0.04});
  source.vertices = apply_xf(target.vertices, motion);
  const Points3 normals = vertex_normals(target);
  const NearestNeighborIndex index(target.vertices);
  const double initial = point_to_plane_rmse(source.vertices, target.vertices,
                                             normals, index);
  const IcpResult result = icp(source, target, {});
  CHECK(result.rmse <= initial + 1e-9);
}

TEST_CASE("icp config validation") {
  IcpConfig cfg;
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.rel_tol = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
