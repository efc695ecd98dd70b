// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "vmesh/fitting.hpp"
#include "vmesh/registration.hpp"
#include "vmesh/types.hpp"

namespace vmesh {

/// Facial lines, each normalized by the outer-interocular distance E-F.
enum class FaceLine { ER, FR, MR, CR };

const std::vector<FaceLine>& all_face_lines();
std::string face_line_name(FaceLine line);

struct MetricsReport {
  std::map<std::string, double> are;  // keys ER, FR, MR, CR
  double are_mean = 0.0;
  double nme = 0.0;
  double holistic_rmse = 0.0;
  std::map<std::string, double> part_rmse;  // six region names
  std::string pred_id, ref_id;

  void validate() const;
};

/// Length of the named line divided by the outer-interocular distance.
double distance_ratio(const FaceMesh& mesh, const LandmarkSpec& spec, FaceLine line);

/// Per-line |ratio_pred - ratio_ref|; mean over the four lines.
std::map<std::string, double> are(const FaceMesh& pred, const FaceMesh& ref,
                                  const LandmarkSpec& spec);
double are_mean(const std::map<std::string, double>& are_values);

/// Mean 68-landmark distance normalized by sqrt(ref width * ref length),
/// widths measured on the reference bounding box along x and y.
double nme(const FaceMesh& pred, const FaceMesh& ref, const LandmarkSpec& spec);

/// ICP-registered point-to-plane RMSE over the whole mesh.
double holistic_rmse(const FaceMesh& pred, const FaceMesh& ref, const IcpConfig& cfg);

/// Per-region ICP + point-to-plane RMSE on the region vertex sets; region
/// normals are accumulated from triangles touching the region.
std::map<std::string, double> part_rmse(const FaceMesh& pred, const FaceMesh& ref,
                                        const LandmarkSpec& spec, const IcpConfig& cfg);

/// All metric families in one report.
MetricsReport evaluate(const FaceMesh& pred, const FaceMesh& ref,
                       const LandmarkSpec& spec, const IcpConfig& cfg,
                       const std::string& pred_id = "pred",
                       const std::string& ref_id = "ref");

}  // namespace vmesh
