// SPDX-License-Identifier: Apache-2.0
#include "vmesh/metrics.hpp"

#include <cmath>

#include "vmesh/errors.hpp"
#include "vmesh/morphable.hpp"

namespace vmesh {

const std::vector<FaceLine>& all_face_lines() {
  static const std::vector<FaceLine> lines = {FaceLine::ER, FaceLine::FR,
                                              FaceLine::MR, FaceLine::CR};
  return lines;
}

std::string face_line_name(FaceLine line) {
  switch (line) {
    case FaceLine::ER: return "ER";
    case FaceLine::FR: return "FR";
    case FaceLine::MR: return "MR";
    case FaceLine::CR: return "CR";
  }
  throw ValidationError("unknown face line");
}

void MetricsReport::validate() const {
  double sum = 0.0;
  for (const auto& line : all_face_lines()) {
    auto it = are.find(face_line_name(line));
    if (it == are.end())
      throw ValidationError("report: missing ARE entry " + face_line_name(line));
    if (!std::isfinite(it->second) || it->second < 0.0)
      throw ValidationError("report: invalid ARE value");
    sum += it->second;
  }
  if (std::abs(are_mean - sum / 4.0) > 1e-12)
    throw ValidationError("report: are mean does not equal the component mean");
  if (!std::isfinite(nme) || nme < 0.0) throw ValidationError("report: invalid nme");
  if (!std::isfinite(holistic_rmse) || holistic_rmse < 0.0)
    throw ValidationError("report: invalid holistic rmse");
  for (const auto& name : LandmarkSpec::region_names()) {
    auto it = part_rmse.find(name);
    if (it == part_rmse.end())
      throw ValidationError("report: missing part rmse for " + name);
    if (!std::isfinite(it->second) || it->second < 0.0)
      throw ValidationError("report: invalid part rmse value");
  }
}

namespace {

std::pair<std::string, std::string> line_endpoints(FaceLine line) {
  switch (line) {
    case FaceLine::ER: return {"A", "B"};
    case FaceLine::FR: return {"C", "D"};
    case FaceLine::MR: return {"G", "H"};
    case FaceLine::CR: return {"I", "J"};
  }
  throw ValidationError("unknown face line");
}

double anchor_distance(const FaceMesh& mesh, const LandmarkSpec& spec,
                       const std::string& a, const std::string& b) {
  return (mesh.vertices.row(spec.anchor(a)) - mesh.vertices.row(spec.anchor(b))).norm();
}

}  // namespace

double distance_ratio(const FaceMesh& mesh, const LandmarkSpec& spec, FaceLine line) {
  spec.validate(mesh.vertices.rows());
  const double oicd = anchor_distance(mesh, spec, "E", "F");
  if (oicd <= 0.0)
    throw ValidationError("distance_ratio: outer eye corners E and F coincide");
  const auto [a, b] = line_endpoints(line);
  return anchor_distance(mesh, spec, a, b) / oicd;
}

std::map<std::string, double> are(const FaceMesh& pred, const FaceMesh& ref,
                                  const LandmarkSpec& spec) {
  std::map<std::string, double> out;
  for (const auto line : all_face_lines())
    out[face_line_name(line)] =
        std::abs(distance_ratio(pred, spec, line) - distance_ratio(ref, spec, line));
  return out;
}

double are_mean(const std::map<std::string, double>& are_values) {
  double sum = 0.0;
  for (const auto& line : all_face_lines()) sum += are_values.at(face_line_name(line));
  return sum / 4.0;
}

double nme(const FaceMesh& pred, const FaceMesh& ref, const LandmarkSpec& spec) {
  spec.validate(pred.vertices.rows());
  spec.validate(ref.vertices.rows());
  // Face size from the reference bounding box: x is ear-to-ear width,
  // y is forehead-to-chin length.
  const double width = ref.vertices.col(0).maxCoeff() - ref.vertices.col(0).minCoeff();
  const double length = ref.vertices.col(1).maxCoeff() - ref.vertices.col(1).minCoeff();
  if (width <= 0.0 || length <= 0.0)
    throw ValidationError("nme: degenerate reference face size");
  const double face_size = std::sqrt(width * length);
  double sum = 0.0;
  for (auto idx : spec.landmarks68)
    sum += (pred.vertices.row(idx) - ref.vertices.row(idx)).norm();
  return sum / (kNumLandmarks * face_size);
}

double holistic_rmse(const FaceMesh& pred, const FaceMesh& ref, const IcpConfig& cfg) {
  return icp(pred, ref, cfg).rmse;
}

namespace {

/// Normals at the region's vertices accumulated from all triangles that
/// touch the region.
Points3 region_points_and_normals(const FaceMesh& mesh,
                                  const std::set<std::uint32_t>& region,
                                  Points3* points_out) {
  std::map<std::uint32_t, Eigen::Index> local;
  Points3 points(region.size(), 3);
  Eigen::Index next = 0;
  for (auto idx : region) {
    points.row(next) = mesh.vertices.row(idx);
    local[idx] = next++;
  }
  Points3 acc = Points3::Zero(static_cast<Eigen::Index>(region.size()), 3);
  for (const auto& t : mesh.triangles) {
    const bool touches = local.count(t[0]) || local.count(t[1]) || local.count(t[2]);
    if (!touches) continue;
    const Eigen::Vector3d a = mesh.vertices.row(t[0]).transpose();
    const Eigen::Vector3d b = mesh.vertices.row(t[1]).transpose();
    const Eigen::Vector3d c = mesh.vertices.row(t[2]).transpose();
    const Eigen::Vector3d fn = (b - a).cross(c - a);
    for (auto idx : t) {
      auto it = local.find(idx);
      if (it != local.end()) acc.row(it->second) += fn.transpose();
    }
  }
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    const double norm = acc.row(i).norm();
    if (norm < 1e-300)
      throw NumericError("part_rmse: region vertex with no incident face");
    acc.row(i) /= norm;
  }
  *points_out = points;
  return acc;
}

}  // namespace

std::map<std::string, double> part_rmse(const FaceMesh& pred, const FaceMesh& ref,
                                        const LandmarkSpec& spec, const IcpConfig& cfg) {
  spec.validate(pred.vertices.rows());
  spec.validate(ref.vertices.rows());
  std::map<std::string, double> out;
  for (const auto& name : LandmarkSpec::region_names()) {
    const auto& region = spec.regions.at(name);
    if (region.size() < 6)
      throw ValidationError("part_rmse: region " + name +
                            " has fewer than 6 vertices");
    Points3 pred_pts, ref_pts;
    region_points_and_normals(pred, region, &pred_pts);  // points only
    const Points3 ref_normals = region_points_and_normals(ref, region, &ref_pts);
    out[name] = icp(pred_pts, ref_pts, ref_normals, cfg).rmse;
  }
  return out;
}

MetricsReport evaluate(const FaceMesh& pred, const FaceMesh& ref,
                       const LandmarkSpec& spec, const IcpConfig& cfg,
                       const std::string& pred_id, const std::string& ref_id) {
  MetricsReport report;
  report.are = are(pred, ref, spec);
  report.are_mean = are_mean(report.are);
  report.nme = nme(pred, ref, spec);
  // Holistic registration always runs before the per-part passes.
  report.holistic_rmse = holistic_rmse(pred, ref, cfg);
  report.part_rmse = part_rmse(pred, ref, spec, cfg);
  report.pred_id = pred_id;
  report.ref_id = ref_id;
  report.validate();
  return report;
}

}  // namespace vmesh
