// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vmesh/types.hpp"

namespace vmesh {

inline constexpr int kNumLandmarks = 68;

/// Named anchor points for the facial-line ratios, the 68-landmark set,
/// and the six face regions, all as vertex indices into a specific model.
struct LandmarkSpec {
  // Anchors A..J: A-B ear line, C-D forehead, E-F outer-interocular,
  // G-H midline, I-J cheek line.
  std::map<std::string, std::uint32_t> anchors;
  std::vector<std::uint32_t> landmarks68;
  std::map<std::string, std::set<std::uint32_t>> regions;

  static const std::vector<std::string>& anchor_names();
  static const std::vector<std::string>& region_names();

  /// Structural checks plus index bounds against a vertex count.
  void validate(Eigen::Index num_vertices) const;

  std::uint32_t anchor(const std::string& name) const;
};

struct FitConfig {
  double shape_reg = 1e-4;
  double expr_reg = 1e-4;
};

struct FitResult {
  ParamVector params;
  double residual = 0.0;  // unregularized ||L(params) - targets||^2
};

/// Ridge least squares over the stacked (shape, expr) coefficients:
/// minimizes ||L(alpha) - targets||^2 + ls*||a_s||^2 + le*||a_e||^2 where
/// L selects the 68 landmark vertices of the synthesized mesh.
/// Throws NumericError if both regularizers are zero and the
/// landmark-restricted basis is rank-deficient.
FitResult fit(const MorphableModel& model, const LandmarkSpec& spec,
              const Points3& targets, const FitConfig& cfg);

/// ||L(params) - targets||^2, no regularization term.
double residual(const MorphableModel& model, const LandmarkSpec& spec,
                const Points3& targets, const ParamVector& params);

}  // namespace vmesh
