// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vmesh/types.hpp"

namespace vmesh {

/// Mesh synthesis: vertices = reshape(mean + shape_basis*alpha_s +
/// expr_basis*alpha_e). Params must be in raw (denormalized) state.
/// OpenMP-parallel over vertices; bitwise identical to synthesize_serial.
FaceMesh synthesize(const MorphableModel& model, const ParamVector& params);

/// Serial reference for synthesize, kept for testing and benchmarks.
FaceMesh synthesize_serial(const MorphableModel& model, const ParamVector& params);

/// Applies v -> R*v + t to every vertex. Topology unchanged.
FaceMesh apply_pose(const FaceMesh& mesh, const RigidTransform& xf);

/// Area-weighted per-vertex unit normals. Throws NumericError naming the
/// vertex if some vertex has no incident non-degenerate triangle.
Points3 vertex_normals(const FaceMesh& mesh);
Points3 vertex_normals_serial(const FaceMesh& mesh);

/// out_i = (in_i - mean_i) / std_i. Input must be raw.
ParamVector normalize_params(const ParamVector& params, const ParamStats& stats);

/// Exact inverse of normalize_params. Input must be normalized.
ParamVector denormalize_params(const ParamVector& params, const ParamStats& stats);

}  // namespace vmesh
