// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "vmesh/fitting.hpp"
#include "vmesh/types.hpp"

namespace vmesh {

struct SyntheticConfig {
  std::uint64_t seed = 1;
  int n_vertices = 500;
  int p_shape = 40;
  int p_expr = 10;
  int n_identities = 100;
  int embedding_dim = 64;
  double noise_sigma = 0.0;
  double hidden_map_scale = 1.0;

  void validate() const;
};

/// Seeded desk-scale morphable model: mean face sampled on a deformed
/// ellipsoid patch with a consistent grid triangulation; bases are
/// orthonormalized seeded Gaussian matrices (jointly, so the stacked
/// landmark system stays well conditioned); param_stats populated.
/// Regenerates with a bumped seed if the landmark-restricted system is
/// rank-deficient, so the result is always usable for fitting.
MorphableModel gen_model(const SyntheticConfig& cfg);

/// Anchors picked as bounding-box-fraction extremes, 68 landmarks by
/// farthest-point sampling, six disjoint regions by spatial banding.
LandmarkSpec gen_landmark_spec(const MorphableModel& model);

struct DatasetSample {
  Eigen::VectorXd embedding;  // embedding_dim
  ParamVector params;         // normalized
  Points3 landmarks;          // 68 x 3, model units
};

/// Paired (embedding, params, landmarks): params seeded Gaussian in
/// normalized space, embedding a hidden linear map of params plus noise,
/// landmarks from the synthesized denormalized mesh.
std::vector<DatasetSample> gen_dataset(const MorphableModel& model,
                                       const LandmarkSpec& spec,
                                       const SyntheticConfig& cfg);

}  // namespace vmesh
