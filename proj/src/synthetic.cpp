// SPDX-License-Identifier: Apache-2.0
#include "vmesh/synthetic.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

#include "vmesh/errors.hpp"
#include "vmesh/morphable.hpp"
#include "vmesh/rng.hpp"

namespace vmesh {

void SyntheticConfig::validate() const {
  if (n_vertices < 12) throw ValidationError("synthetic: need at least 12 vertices");
  if (p_shape <= 0 || p_expr <= 0)
    throw ValidationError("synthetic: subspace dimensions must be positive");
  if (p_shape + p_expr > 3 * n_vertices)
    throw ValidationError(
        "synthetic: p_shape + p_expr cannot exceed 3 * n_vertices");
  if (n_identities <= 0) throw ValidationError("synthetic: n_identities must be positive");
  if (embedding_dim <= 0) throw ValidationError("synthetic: embedding_dim must be positive");
  if (noise_sigma < 0.0 || !std::isfinite(noise_sigma))
    throw ValidationError("synthetic: noise_sigma must be finite and nonnegative");
  if (!(hidden_map_scale > 0.0) || !std::isfinite(hidden_map_scale))
    throw ValidationError("synthetic: hidden_map_scale must be positive");
}

namespace {

// Grid rows over the (u, v) parameter square; the last row may be partial
// so any vertex count works.
struct Grid {
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::vector<double>> u;  // per row
};

Grid make_grid(int n) {
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int full_rows = n / cols;
  const int leftover = n - full_rows * cols;
  Grid grid;
  std::uint32_t next = 0;
  for (int r = 0; r < full_rows; ++r) {
    std::vector<std::uint32_t> row(cols);
    std::vector<double> u(cols);
    for (int i = 0; i < cols; ++i) {
      row[i] = next++;
      u[i] = cols == 1 ? 0.5 : static_cast<double>(i) / (cols - 1);
    }
    grid.rows.push_back(std::move(row));
    grid.u.push_back(std::move(u));
  }
  if (leftover > 0) {
    std::vector<std::uint32_t> row(leftover);
    std::vector<double> u(leftover);
    for (int i = 0; i < leftover; ++i) {
      row[i] = next++;
      u[i] = leftover == 1 ? 0.5 : static_cast<double>(i) / (leftover - 1);
    }
    grid.rows.push_back(std::move(row));
    grid.u.push_back(std::move(u));
  }
  return grid;
}

// Bridges two chains of possibly different lengths into a triangle strip,
// counter-clockwise when viewed from +z.
void bridge_rows(const std::vector<std::uint32_t>& low, const std::vector<double>& ulow,
                 const std::vector<std::uint32_t>& high, const std::vector<double>& uhigh,
                 std::vector<Triangle>& out) {
  std::size_t i = 0, j = 0;
  while (i + 1 < low.size() || j + 1 < high.size()) {
    const bool advance_low =
        j + 1 >= high.size() || (i + 1 < low.size() && ulow[i + 1] <= uhigh[j + 1]);
    if (advance_low) {
      out.push_back({low[i], low[i + 1], high[j]});
      ++i;
    } else {
      out.push_back({low[i], high[j + 1], high[j]});
      ++j;
    }
  }
}

// Two-pass modified Gram-Schmidt; direction of the first column is kept.
void orthonormalize_columns(Eigen::MatrixXd& m) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      for (Eigen::Index j = 0; j < k; ++j)
        m.col(k) -= m.col(j).dot(m.col(k)) * m.col(j);
      const double norm = m.col(k).norm();
      if (norm < 1e-12)
        throw NumericError("synthetic: degenerate basis column during orthonormalization");
      m.col(k) /= norm;
    }
  }
}

MorphableModel build_model(const SyntheticConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  const int n = cfg.n_vertices;
  const Grid grid = make_grid(n);

  // Smooth seeded bumps deform an ellipsoid front patch.
  struct Bump {
    double amp, fu, fv, pu, pv;
  };
  std::vector<Bump> bumps(3);
  for (auto& b : bumps) {
    b.amp = 0.04 * rng.normal();
    b.fu = rng.uniform(1.0, 3.0);
    b.fv = rng.uniform(1.0, 3.0);
    b.pu = rng.uniform(0.0, 2.0 * M_PI);
    b.pv = rng.uniform(0.0, 2.0 * M_PI);
  }

  MorphableModel model;
  model.seed = seed;
  model.mean_face.resize(3 * n);
  constexpr double kHalfAngle = 75.0 * M_PI / 180.0;
  // Face frame: x ear-to-ear, y forehead-to-chin, z out of the face.
  constexpr double ax = 1.0, ay = 1.3, az = 0.8;
  for (std::size_t r = 0; r < grid.rows.size(); ++r) {
    const double v = grid.rows.size() == 1
                         ? 0.5
                         : static_cast<double>(r) / (grid.rows.size() - 1);
    for (std::size_t i = 0; i < grid.rows[r].size(); ++i) {
      const double u = grid.u[r][i];
      const double theta = (u - 0.5) * 2.0 * kHalfAngle;
      const double phi = (v - 0.5) * 2.0 * kHalfAngle;
      double scale = 1.0;
      for (const auto& b : bumps)
        scale += b.amp * std::sin(b.fu * M_PI * u + b.pu) * std::sin(b.fv * M_PI * v + b.pv);
      const std::uint32_t idx = grid.rows[r][i];
      model.mean_face(3 * idx + 0) = scale * ax * std::sin(theta) * std::cos(phi);
      model.mean_face(3 * idx + 1) = scale * ay * std::sin(phi);
      model.mean_face(3 * idx + 2) = scale * az * std::cos(theta) * std::cos(phi);
    }
  }

  for (std::size_t r = 0; r + 1 < grid.rows.size(); ++r)
    bridge_rows(grid.rows[r], grid.u[r], grid.rows[r + 1], grid.u[r + 1],
                model.triangles);

  // First shape column scales the x extent (the ear-ratio knob); the rest
  // is seeded Gaussian, all orthonormalized jointly so the stacked
  // (shape, expr) basis has orthonormal columns.
  const int p = cfg.p_shape + cfg.p_expr;
  Eigen::MatrixXd basis(3 * n, p);
  for (int i = 0; i < n; ++i) {
    basis(3 * i + 0, 0) = model.mean_face(3 * i + 0);
    basis(3 * i + 1, 0) = 0.0;
    basis(3 * i + 2, 0) = 0.0;
  }
  for (int k = 1; k < p; ++k)
    for (int row = 0; row < 3 * n; ++row) basis(row, k) = rng.normal();
  orthonormalize_columns(basis);
  model.shape_basis = basis.leftCols(cfg.p_shape);
  model.expr_basis = basis.rightCols(cfg.p_expr);

  ParamStats stats;
  stats.mean.resize(p);
  stats.std.resize(p);
  for (int k = 0; k < p; ++k) {
    stats.mean(k) = 0.1 * rng.normal();
    stats.std(k) = rng.uniform(0.5, 2.0);
  }
  model.param_stats = stats;
  model.validate();
  return model;
}

double smallest_landmark_singular_value(const MorphableModel& model,
                                        const LandmarkSpec& spec) {
  const Eigen::Index p = model.num_shape() + model.num_expr();
  Eigen::MatrixXd sys(3 * kNumLandmarks, p);
  for (int l = 0; l < kNumLandmarks; ++l) {
    const Eigen::Index v = spec.landmarks68[l];
    for (int c = 0; c < 3; ++c) {
      sys.block(3 * l + c, 0, 1, model.num_shape()) = model.shape_basis.row(3 * v + c);
      sys.block(3 * l + c, model.num_shape(), 1, model.num_expr()) =
          model.expr_basis.row(3 * v + c);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys);
  return svd.singularValues().minCoeff();
}

}  // namespace

MorphableModel gen_model(const SyntheticConfig& cfg) {
  cfg.validate();
  std::uint64_t seed = cfg.seed;
  for (int attempt = 0; attempt < 32; ++attempt) {
    MorphableModel model = build_model(cfg, seed);
    if (3 * kNumLandmarks < cfg.p_shape + cfg.p_expr) return model;  // never full rank anyway
    const LandmarkSpec spec = gen_landmark_spec(model);
    if (smallest_landmark_singular_value(model, spec) > 1e-6) return model;
    seed += 1000000007ull;
  }
  throw NumericError("gen_model: could not produce a full-rank landmark system");
}

namespace {

struct Bbox {
  Eigen::Vector3d lo, hi;
};

Bbox bbox_of(const Eigen::VectorXd& mean_face) {
  Bbox box{Eigen::Vector3d::Constant(1e300), Eigen::Vector3d::Constant(-1e300)};
  for (Eigen::Index i = 0; i < mean_face.size() / 3; ++i)
    for (int c = 0; c < 3; ++c) {
      box.lo(c) = std::min(box.lo(c), mean_face(3 * i + c));
      box.hi(c) = std::max(box.hi(c), mean_face(3 * i + c));
    }
  return box;
}

std::uint32_t nearest_vertex(const Eigen::VectorXd& mean_face, const Eigen::Vector3d& p,
                             const std::set<std::uint32_t>& exclude = {}) {
  const Eigen::Index n = mean_face.size() / 3;
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t best_i = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (exclude.count(static_cast<std::uint32_t>(i))) continue;
    const Eigen::Vector3d v(mean_face(3 * i), mean_face(3 * i + 1), mean_face(3 * i + 2));
    const double d = (v - p).squaredNorm();
    if (d < best) {
      best = d;
      best_i = static_cast<std::uint32_t>(i);
    }
  }
  return best_i;
}

Eigen::Vector3d frac_point(const Bbox& box, double fx, double fy, double fz) {
  return box.lo + Eigen::Vector3d((box.hi - box.lo)(0) * fx, (box.hi - box.lo)(1) * fy,
                                  (box.hi - box.lo)(2) * fz);
}

}  // namespace

LandmarkSpec gen_landmark_spec(const MorphableModel& model) {
  const Eigen::Index n = model.num_vertices();
  if (n < 12) throw ValidationError("gen_landmark_spec: model too small");
  const Bbox box = bbox_of(model.mean_face);
  if ((box.hi - box.lo).minCoeff() <= 0.0)
    throw ValidationError("gen_landmark_spec: degenerate model extent");

  LandmarkSpec spec;
  // Anchor targets as bounding-box fractions (x: left->right,
  // y: chin->forehead, z: back->front).
  const std::vector<std::pair<std::string, Eigen::Vector3d>> targets = {
      {"A", frac_point(box, 0.00, 0.60, 0.35)},  // left ear
      {"B", frac_point(box, 1.00, 0.60, 0.35)},  // right ear
      {"C", frac_point(box, 0.30, 0.95, 0.60)},  // forehead left
      {"D", frac_point(box, 0.70, 0.95, 0.60)},  // forehead right
      {"E", frac_point(box, 0.20, 0.65, 0.80)},  // outer left eye corner
      {"F", frac_point(box, 0.80, 0.65, 0.80)},  // outer right eye corner
      {"G", frac_point(box, 0.50, 0.95, 0.70)},  // midline top
      {"H", frac_point(box, 0.50, 0.05, 0.70)},  // midline bottom
      {"I", frac_point(box, 0.10, 0.35, 0.55)},  // left cheek
      {"J", frac_point(box, 0.90, 0.35, 0.55)},  // right cheek
  };
  std::set<std::uint32_t> used;
  for (const auto& [name, p] : targets) {
    const std::uint32_t idx = nearest_vertex(model.mean_face, p, used);
    spec.anchors[name] = idx;
    used.insert(idx);
  }

  // 68 landmarks by farthest-point sampling seeded at the nose tip
  // (front-most vertex).
  std::uint32_t seed_vertex = 0;
  double best_z = -1e300;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (model.mean_face(3 * i + 2) > best_z) {
      best_z = model.mean_face(3 * i + 2);
      seed_vertex = static_cast<std::uint32_t>(i);
    }
  }
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  auto vertex = [&](Eigen::Index i) {
    return Eigen::Vector3d(model.mean_face(3 * i), model.mean_face(3 * i + 1),
                           model.mean_face(3 * i + 2));
  };
  std::uint32_t current = seed_vertex;
  spec.landmarks68.push_back(current);
  while (spec.landmarks68.size() < kNumLandmarks) {
    const Eigen::Vector3d c = vertex(current);
    double far_d2 = -1.0;
    std::uint32_t far_i = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], (vertex(i) - c).squaredNorm());
      if (min_d2[i] > far_d2) {
        far_d2 = min_d2[i];
        far_i = static_cast<std::uint32_t>(i);
      }
    }
    current = far_i;
    spec.landmarks68.push_back(current);
  }

  // Six disjoint regions by banding the bounding-box fractions.
  for (const auto& name : LandmarkSpec::region_names()) spec.regions[name];
  const Eigen::Vector3d extent = box.hi - box.lo;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double fx = (model.mean_face(3 * i + 0) - box.lo(0)) / extent(0);
    const double fy = (model.mean_face(3 * i + 1) - box.lo(1)) / extent(1);
    if (fy >= 0.8) continue;  // forehead, outside the six regions
    std::string name;
    if (fy >= 0.5) {
      name = fx < 0.5 ? "left_eye" : "right_eye";
    } else if (fx < 0.3) {
      name = "left_cheek";
    } else if (fx >= 0.7) {
      name = "right_cheek";
    } else {
      name = fy >= 0.3 ? "nose" : "mouth";
    }
    spec.regions[name].insert(static_cast<std::uint32_t>(i));
  }

  spec.validate(n);
  return spec;
}

std::vector<DatasetSample> gen_dataset(const MorphableModel& model,
                                       const LandmarkSpec& spec,
                                       const SyntheticConfig& cfg) {
  cfg.validate();
  model.validate();
  spec.validate(model.num_vertices());
  if (!model.param_stats)
    throw ValidationError("gen_dataset: model has no parameter statistics");

  const Eigen::Index p = model.num_shape() + model.num_expr();
  Rng rng(cfg.seed ^ 0xd1b54a32d192ed03ull);
  Eigen::MatrixXd hidden(cfg.embedding_dim, p);
  const double scale = cfg.hidden_map_scale / std::sqrt(static_cast<double>(p));
  for (Eigen::Index i = 0; i < hidden.rows(); ++i)
    for (Eigen::Index j = 0; j < hidden.cols(); ++j) hidden(i, j) = scale * rng.normal();

  std::vector<DatasetSample> out;
  out.reserve(cfg.n_identities);
  for (int s = 0; s < cfg.n_identities; ++s) {
    DatasetSample sample;
    Eigen::VectorXd coeffs(p);
    for (Eigen::Index k = 0; k < p; ++k) coeffs(k) = rng.normal();
    sample.params.shape = coeffs.head(model.num_shape());
    sample.params.expr = coeffs.tail(model.num_expr());
    sample.params.normalized = true;

    sample.embedding = hidden * coeffs;
    for (Eigen::Index k = 0; k < sample.embedding.size(); ++k)
      sample.embedding(k) += cfg.noise_sigma * rng.normal();

    const ParamVector raw = denormalize_params(sample.params, *model.param_stats);
    const FaceMesh mesh = synthesize(model, raw);
    sample.landmarks.resize(kNumLandmarks, 3);
    for (int l = 0; l < kNumLandmarks; ++l)
      sample.landmarks.row(l) = mesh.vertices.row(spec.landmarks68[l]);
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace vmesh
