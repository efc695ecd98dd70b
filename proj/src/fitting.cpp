// SPDX-License-Identifier: Apache-2.0
#include "vmesh/fitting.hpp"

#include <Eigen/QR>
#include <algorithm>

#include "vmesh/errors.hpp"
#include "vmesh/morphable.hpp"

namespace vmesh {

const std::vector<std::string>& LandmarkSpec::anchor_names() {
  static const std::vector<std::string> names = {"A", "B", "C", "D", "E",
                                                 "F", "G", "H", "I", "J"};
  return names;
}

const std::vector<std::string>& LandmarkSpec::region_names() {
  static const std::vector<std::string> names = {
      "left_eye", "right_eye", "nose", "mouth", "left_cheek", "right_cheek"};
  return names;
}

void LandmarkSpec::validate(Eigen::Index num_vertices) const {
  const auto n = static_cast<std::uint32_t>(num_vertices);
  for (const auto& name : anchor_names()) {
    auto it = anchors.find(name);
    if (it == anchors.end())
      throw ValidationError("landmark spec: missing anchor " + name);
    if (it->second >= n)
      throw ValidationError("landmark spec: anchor " + name + " index out of range");
  }
  if (anchors.at("E") == anchors.at("F"))
    throw ValidationError("landmark spec: anchors E and F coincide");
  if (landmarks68.size() != kNumLandmarks)
    throw ValidationError("landmark spec: expected 68 landmark indices");
  for (auto idx : landmarks68)
    if (idx >= n) throw ValidationError("landmark spec: landmark index out of range");
  std::set<std::uint32_t> seen;
  for (const auto& name : region_names()) {
    auto it = regions.find(name);
    if (it == regions.end())
      throw ValidationError("landmark spec: missing region " + name);
    for (auto idx : it->second) {
      if (idx >= n)
        throw ValidationError("landmark spec: region " + name + " index out of range");
      if (!seen.insert(idx).second)
        throw ValidationError("landmark spec: regions are not disjoint (vertex " +
                              std::to_string(idx) + ")");
    }
  }
}

std::uint32_t LandmarkSpec::anchor(const std::string& name) const {
  auto it = anchors.find(name);
  if (it == anchors.end()) throw ValidationError("landmark spec: unknown anchor " + name);
  return it->second;
}

namespace {

// Rows of the basis and mean restricted to the 68 landmark vertices,
// stacked as 3*68 scalar equations.
struct LandmarkSystem {
  Eigen::MatrixXd basis;  // 204 x (P_s + P_e)
  Eigen::VectorXd mean;   // 204
};

LandmarkSystem landmark_system(const MorphableModel& model, const LandmarkSpec& spec) {
  const Eigen::Index ps = model.num_shape();
  const Eigen::Index pe = model.num_expr();
  LandmarkSystem sys;
  sys.basis.resize(3 * kNumLandmarks, ps + pe);
  sys.mean.resize(3 * kNumLandmarks);
  for (int l = 0; l < kNumLandmarks; ++l) {
    const Eigen::Index v = spec.landmarks68[l];
    for (int c = 0; c < 3; ++c) {
      const Eigen::Index row = 3 * v + c;
      sys.basis.block(3 * l + c, 0, 1, ps) = model.shape_basis.row(row);
      sys.basis.block(3 * l + c, ps, 1, pe) = model.expr_basis.row(row);
      sys.mean(3 * l + c) = model.mean_face(row);
    }
  }
  return sys;
}

Eigen::VectorXd flatten_targets(const Points3& targets) {
  if (targets.rows() != kNumLandmarks || targets.cols() != 3)
    throw ValidationError("fit: targets must be 68x3");
  if (!targets.allFinite()) throw ValidationError("fit: non-finite target");
  Eigen::VectorXd b(3 * kNumLandmarks);
  for (int l = 0; l < kNumLandmarks; ++l)
    for (int c = 0; c < 3; ++c) b(3 * l + c) = targets(l, c);
  return b;
}

}  // namespace

FitResult fit(const MorphableModel& model, const LandmarkSpec& spec,
              const Points3& targets, const FitConfig& cfg) {
  if (cfg.shape_reg < 0.0 || cfg.expr_reg < 0.0 ||
      !std::isfinite(cfg.shape_reg) || !std::isfinite(cfg.expr_reg))
    throw ValidationError("fit: regularizers must be finite and nonnegative");
  spec.validate(model.num_vertices());

  const Eigen::Index ps = model.num_shape();
  const Eigen::Index pe = model.num_expr();
  const LandmarkSystem sys = landmark_system(model, spec);
  const Eigen::VectorXd rhs = flatten_targets(targets) - sys.mean;

  // Ridge rows appended to the residual system keep the solve a single
  // QR factorization for any lambda.
  const Eigen::Index rows = 3 * kNumLandmarks + ps + pe;
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(rows, ps + pe);
  Eigen::VectorXd baug = Eigen::VectorXd::Zero(rows);
  aug.topRows(3 * kNumLandmarks) = sys.basis;
  baug.head(3 * kNumLandmarks) = rhs;
  for (Eigen::Index k = 0; k < ps; ++k)
    aug(3 * kNumLandmarks + k, k) = std::sqrt(cfg.shape_reg);
  for (Eigen::Index k = 0; k < pe; ++k)
    aug(3 * kNumLandmarks + ps + k, ps + k) = std::sqrt(cfg.expr_reg);

  if (cfg.shape_reg == 0.0 && cfg.expr_reg == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_check(sys.basis);
    if (rank_check.rank() < ps + pe)
      throw NumericError("fit: landmark-restricted basis is rank-deficient and "
                         "no regularization was requested");
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aug);
  const Eigen::VectorXd alpha = qr.solve(baug);

  FitResult result;
  result.params.shape = alpha.head(ps);
  result.params.expr = alpha.tail(pe);
  result.params.normalized = false;
  result.residual = (sys.basis * alpha - rhs).squaredNorm();
  return result;
}

double residual(const MorphableModel& model, const LandmarkSpec& spec,
                const Points3& targets, const ParamVector& params) {
  if (params.shape.size() != model.num_shape() ||
      params.expr.size() != model.num_expr())
    throw ValidationError("residual: parameter dimension mismatch");
  spec.validate(model.num_vertices());
  const LandmarkSystem sys = landmark_system(model, spec);
  const Eigen::VectorXd rhs = flatten_targets(targets) - sys.mean;
  return (sys.basis * params.stacked() - rhs).squaredNorm();
}

}  // namespace vmesh
