// SPDX-License-Identifier: Apache-2.0
#include "vmesh/faceio.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vmesh/errors.hpp"

namespace vmesh {

// On-disk layout notes:
//  - binary float64/uint32 payloads are little-endian (asserted at build
//    time below for the raw-write path);
//  - matrices are stored column-major, matching the in-memory layout;
//  - every file opens with "VMESH-<KIND> v1".
static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; raw writes assume a LE host");

namespace {

void write_doubles(std::ostream& os, const double* data, std::size_t count) {
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::istream& is, double* data, std::size_t count,
                  const std::string& what) {
  is.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(is.gcount()) != count * sizeof(double))
    throw IoError(what + ": file truncated mid-array");
  for (std::size_t i = 0; i < count; ++i)
    if (std::isnan(data[i])) throw IoError(what + ": NaN in binary payload");
}

void write_u32(std::ostream& os, const std::uint32_t* data, std::size_t count) {
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
}

void read_u32(std::istream& is, std::uint32_t* data, std::size_t count,
              const std::string& what) {
  is.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(std::uint32_t)));
  if (static_cast<std::size_t>(is.gcount()) != count * sizeof(std::uint32_t))
    throw IoError(what + ": file truncated mid-array");
}

std::ifstream open_in(const std::string& path, bool binary = true) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw IoError("cannot open " + path);
  return is;
}

std::ofstream open_out(const std::string& path, bool binary = true) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw IoError("cannot write " + path);
  return os;
}

void expect_magic(std::istream& is, const std::string& magic, const std::string& what) {
  std::string line;
  if (!std::getline(is, line)) throw IoError(what + ": empty file");
  if (line != magic)
    throw IoError(what + ": unknown format or version, expected '" + magic +
                  "', got '" + line + "'");
}

std::int64_t header_int(std::istream& is, const std::string& key, const std::string& what) {
  std::string line;
  if (!std::getline(is, line)) throw IoError(what + ": missing header line " + key);
  std::istringstream ss(line);
  std::string k;
  std::int64_t v = 0;
  if (!(ss >> k >> v) || k != key)
    throw IoError(what + ": malformed header line, expected '" + key + "'");
  return v;
}

void expect_line(std::istream& is, const std::string& expected, const std::string& what) {
  std::string line;
  if (!std::getline(is, line) || line != expected)
    throw IoError(what + ": expected '" + expected + "' line");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_model(const MorphableModel& model, const std::string& path) {
  model.validate();
  auto os = open_out(path);
  os << "VMESH-MODEL v1\n";
  os << "n_vertices " << model.num_vertices() << "\n";
  os << "p_shape " << model.num_shape() << "\n";
  os << "p_expr " << model.num_expr() << "\n";
  os << "n_triangles " << model.triangles.size() << "\n";
  os << "has_stats " << (model.param_stats ? 1 : 0) << "\n";
  os << "seed " << model.seed << "\n";
  os << "BINARY\n";
  write_doubles(os, model.mean_face.data(), model.mean_face.size());
  write_doubles(os, model.shape_basis.data(), model.shape_basis.size());
  write_doubles(os, model.expr_basis.data(), model.expr_basis.size());
  if (model.param_stats) {
    write_doubles(os, model.param_stats->mean.data(), model.param_stats->mean.size());
    write_doubles(os, model.param_stats->std.data(), model.param_stats->std.size());
  }
  std::vector<std::uint32_t> tris;
  tris.reserve(3 * model.triangles.size());
  for (const auto& t : model.triangles) tris.insert(tris.end(), t.begin(), t.end());
  write_u32(os, tris.data(), tris.size());
  if (!os) throw IoError("model: write failed for " + path);
}

MorphableModel load_model(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, "VMESH-MODEL v1", "model");
  const auto n = header_int(is, "n_vertices", "model");
  const auto ps = header_int(is, "p_shape", "model");
  const auto pe = header_int(is, "p_expr", "model");
  const auto nt = header_int(is, "n_triangles", "model");
  const auto has_stats = header_int(is, "has_stats", "model");
  const auto seed = header_int(is, "seed", "model");
  if (n <= 0 || ps <= 0 || pe <= 0 || nt < 0)
    throw IoError("model: invalid header dimensions");
  expect_line(is, "BINARY", "model");

  MorphableModel model;
  model.seed = static_cast<std::uint64_t>(seed);
  model.mean_face.resize(3 * n);
  model.shape_basis.resize(3 * n, ps);
  model.expr_basis.resize(3 * n, pe);
  read_doubles(is, model.mean_face.data(), model.mean_face.size(), "model");
  read_doubles(is, model.shape_basis.data(), model.shape_basis.size(), "model");
  read_doubles(is, model.expr_basis.data(), model.expr_basis.size(), "model");
  if (has_stats) {
    ParamStats stats;
    stats.mean.resize(ps + pe);
    stats.std.resize(ps + pe);
    read_doubles(is, stats.mean.data(), stats.mean.size(), "model");
    read_doubles(is, stats.std.data(), stats.std.size(), "model");
    model.param_stats = stats;
  }
  std::vector<std::uint32_t> tris(3 * static_cast<std::size_t>(nt));
  read_u32(is, tris.data(), tris.size(), "model");
  model.triangles.resize(nt);
  for (std::int64_t t = 0; t < nt; ++t)
    model.triangles[t] = {tris[3 * t], tris[3 * t + 1], tris[3 * t + 2]};
  try {
    model.validate();
  } catch (const ValidationError& e) {
    throw IoError(std::string("model: header/payload mismatch: ") + e.what());
  }
  return model;
}

void export_obj(const FaceMesh& mesh, const std::string& path) {
  mesh.validate();
  auto os = open_out(path, false);
  char buf[128];
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", mesh.vertices(i, 0),
                  mesh.vertices(i, 1), mesh.vertices(i, 2));
    os << buf;
  }
  for (const auto& t : mesh.triangles)
    os << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  if (!os) throw IoError("obj: write failed for " + path);
}

FaceMesh import_obj(const std::string& path) {
  auto is = open_in(path, false);
  std::vector<Eigen::Vector3d> verts;
  std::vector<Triangle> tris;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::pair<std::size_t, std::array<std::int64_t, 3>>> raw_faces;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Eigen::Vector3d v;
      if (!(ss >> v(0) >> v(1) >> v(2)))
        throw IoError("obj: malformed vertex at line " + std::to_string(lineno));
      verts.push_back(v);
    } else if (tag == "f") {
      std::array<std::int64_t, 3> f{};
      if (!(ss >> f[0] >> f[1] >> f[2]))
        throw IoError("obj: malformed face at line " + std::to_string(lineno));
      raw_faces.emplace_back(lineno, f);
    }
    // Other tags (vn, vt, comments) are ignored.
  }
  if (verts.empty()) throw IoError("obj: no vertices in " + path);
  for (const auto& [ln, f] : raw_faces) {
    Triangle t{};
    for (int c = 0; c < 3; ++c) {
      if (f[c] < 1 || f[c] > static_cast<std::int64_t>(verts.size()))
        throw IoError("obj: face index out of range at line " + std::to_string(ln));
      t[c] = static_cast<std::uint32_t>(f[c] - 1);
    }
    tris.push_back(t);
  }
  FaceMesh mesh;
  mesh.vertices.resize(verts.size(), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(i) = verts[i].transpose();
  mesh.triangles = std::move(tris);
  return mesh;
}

void save_landmark_spec(const LandmarkSpec& spec, const std::string& path) {
  auto os = open_out(path, false);
  os << "VMESH-SPEC v1\n";
  for (const auto& name : LandmarkSpec::anchor_names())
    os << "anchor " << name << " " << spec.anchor(name) << "\n";
  os << "landmarks68";
  for (auto idx : spec.landmarks68) os << " " << idx;
  os << "\n";
  for (const auto& name : LandmarkSpec::region_names()) {
    auto it = spec.regions.find(name);
    if (it == spec.regions.end())
      throw ValidationError("landmark spec: missing region " + name);
    os << "region " << name;
    for (auto idx : it->second) os << " " << idx;
    os << "\n";
  }
  if (!os) throw IoError("spec: write failed for " + path);
}

LandmarkSpec load_landmark_spec(const std::string& path) {
  auto is = open_in(path, false);
  expect_magic(is, "VMESH-SPEC v1", "spec");
  LandmarkSpec spec;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "anchor") {
      std::string name;
      std::uint32_t idx;
      if (!(ss >> name >> idx)) throw IoError("spec: malformed anchor line");
      spec.anchors[name] = idx;
    } else if (tag == "landmarks68") {
      std::uint32_t idx;
      while (ss >> idx) spec.landmarks68.push_back(idx);
    } else if (tag == "region") {
      std::string name;
      if (!(ss >> name)) throw IoError("spec: malformed region line");
      auto& set = spec.regions[name];
      std::uint32_t idx;
      while (ss >> idx) {
        if (!set.insert(idx).second)
          throw IoError("spec: duplicate vertex " + std::to_string(idx) +
                        " in region " + name);
      }
    } else {
      throw IoError("spec: unknown line tag '" + tag + "'");
    }
  }
  for (const auto& name : LandmarkSpec::region_names())
    if (!spec.regions.count(name)) throw IoError("spec: missing region " + name);
  for (const auto& name : LandmarkSpec::anchor_names())
    if (!spec.anchors.count(name)) throw IoError("spec: missing anchor " + name);
  if (spec.landmarks68.size() != kNumLandmarks)
    throw IoError("spec: expected 68 landmark indices, got " +
                  std::to_string(spec.landmarks68.size()));
  return spec;
}

void save_array(const ArrayFile& array, const std::string& path) {
  auto os = open_out(path);
  os << "VMESH-ARRAY v1\n";
  os << "rows " << array.data.rows() << "\n";
  os << "cols " << array.data.cols() << "\n";
  for (const auto& [k, v] : array.meta) os << "meta " << k << " " << v << "\n";
  os << "BINARY\n";
  write_doubles(os, array.data.data(), array.data.size());
  if (!os) throw IoError("array: write failed for " + path);
}

ArrayFile load_array(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, "VMESH-ARRAY v1", "array");
  const auto rows = header_int(is, "rows", "array");
  const auto cols = header_int(is, "cols", "array");
  if (rows < 0 || cols < 0) throw IoError("array: negative dimensions");
  ArrayFile array;
  std::string line;
  while (std::getline(is, line)) {
    if (line == "BINARY") break;
    std::istringstream ss(line);
    std::string tag, key;
    ss >> tag >> key;
    if (tag != "meta" || key.empty()) throw IoError("array: malformed meta line");
    std::string value;
    std::getline(ss, value);
    if (!value.empty() && value.front() == ' ') value.erase(0, 1);
    array.meta[key] = value;
  }
  array.data.resize(rows, cols);
  read_doubles(is, array.data.data(), array.data.size(), "array");
  return array;
}

void save_report(const MetricsReport& report, const std::string& path) {
  report.validate();
  auto os = open_out(path, false);
  os << "VMESH-REPORT v1\n";
  os << "pred_id " << report.pred_id << "\n";
  os << "ref_id " << report.ref_id << "\n";
  for (const auto& line : all_face_lines()) {
    const auto& name = face_line_name(line);
    os << name << " " << fmt_double(report.are.at(name)) << "\n";
  }
  os << "mean " << fmt_double(report.are_mean) << "\n";
  os << "nme " << fmt_double(report.nme) << "\n";
  os << "holistic_rmse " << fmt_double(report.holistic_rmse) << "\n";
  for (const auto& name : LandmarkSpec::region_names())
    os << name << " " << fmt_double(report.part_rmse.at(name)) << "\n";
  if (!os) throw IoError("report: write failed for " + path);
}

MetricsReport load_report(const std::string& path) {
  auto is = open_in(path, false);
  expect_magic(is, "VMESH-REPORT v1", "report");
  MetricsReport report;
  std::string line;
  std::map<std::string, double> values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "pred_id") {
      ss >> report.pred_id;
    } else if (key == "ref_id") {
      ss >> report.ref_id;
    } else {
      double v;
      if (!(ss >> v)) throw IoError("report: malformed line '" + line + "'");
      values[key] = v;
    }
  }
  for (const auto& l : all_face_lines()) {
    const auto& name = face_line_name(l);
    if (!values.count(name)) throw IoError("report: missing key " + name);
    report.are[name] = values[name];
  }
  for (const auto& key : {std::string("mean"), std::string("nme"),
                          std::string("holistic_rmse")})
    if (!values.count(key)) throw IoError("report: missing key " + key);
  report.are_mean = values["mean"];
  report.nme = values["nme"];
  report.holistic_rmse = values["holistic_rmse"];
  for (const auto& name : LandmarkSpec::region_names()) {
    if (!values.count(name)) throw IoError("report: missing key " + name);
    report.part_rmse[name] = values[name];
  }
  try {
    report.validate();
  } catch (const ValidationError& e) {
    throw IoError(std::string("report: validation failed on load: ") + e.what());
  }
  return report;
}

void save_params(const ParamVector& params, const std::string& path) {
  params.validate();
  ArrayFile array;
  array.data.resize(1, params.shape.size() + params.expr.size());
  array.data.row(0) = params.stacked().transpose();
  array.meta["kind"] = "params";
  array.meta["p_shape"] = std::to_string(params.shape.size());
  array.meta["p_expr"] = std::to_string(params.expr.size());
  array.meta["normalized"] = params.normalized ? "1" : "0";
  save_array(array, path);
}

ParamVector load_params(const std::string& path) {
  const ArrayFile array = load_array(path);
  if (!array.meta.count("kind") || array.meta.at("kind") != "params")
    throw IoError("params: array file is not of kind 'params'");
  const auto ps = std::stoll(array.meta.at("p_shape"));
  const auto pe = std::stoll(array.meta.at("p_expr"));
  if (array.data.rows() != 1 || array.data.cols() != ps + pe)
    throw IoError("params: dimension mismatch");
  ParamVector params;
  params.shape = array.data.row(0).head(ps).transpose();
  params.expr = array.data.row(0).tail(pe).transpose();
  params.normalized = array.meta.count("normalized") && array.meta.at("normalized") == "1";
  return params;
}

void save_embeddings(const EmbeddingBatch& batch, const std::string& path) {
  ArrayFile array;
  array.data = batch.rows;
  array.meta["kind"] = "embeddings";
  save_array(array, path);
}

EmbeddingBatch load_embeddings(const std::string& path) {
  const ArrayFile array = load_array(path);
  if (!array.meta.count("kind") || array.meta.at("kind") != "embeddings")
    throw IoError("embeddings: array file is not of kind 'embeddings'");
  EmbeddingBatch batch{array.data};
  batch.validate();
  return batch;
}

void save_weights(const DecoderWeights& w, const std::string& path) {
  w.validate();
  const Eigen::Index ps = w.shape_head.rows();
  const Eigen::Index pe = w.expr_head.rows();
  ArrayFile array;
  array.data.resize(ps + pe, kEmbeddingDim + 1);
  array.data.topLeftCorner(ps, kEmbeddingDim) = w.shape_head;
  array.data.topRightCorner(ps, 1) = w.shape_bias;
  array.data.bottomLeftCorner(pe, kEmbeddingDim) = w.expr_head;
  array.data.bottomRightCorner(pe, 1) = w.expr_bias;
  array.meta["kind"] = "weights";
  array.meta["p_shape"] = std::to_string(ps);
  array.meta["p_expr"] = std::to_string(pe);
  save_array(array, path);
}

DecoderWeights load_weights(const std::string& path) {
  const ArrayFile array = load_array(path);
  if (!array.meta.count("kind") || array.meta.at("kind") != "weights")
    throw IoError("weights: array file is not of kind 'weights'");
  const auto ps = std::stoll(array.meta.at("p_shape"));
  const auto pe = std::stoll(array.meta.at("p_expr"));
  if (array.data.rows() != ps + pe || array.data.cols() != kEmbeddingDim + 1)
    throw IoError("weights: dimension mismatch");
  DecoderWeights w;
  w.shape_head = array.data.topLeftCorner(ps, kEmbeddingDim);
  w.shape_bias = array.data.topRightCorner(ps, 1);
  w.expr_head = array.data.bottomLeftCorner(pe, kEmbeddingDim);
  w.expr_bias = array.data.bottomRightCorner(pe, 1);
  w.validate();
  return w;
}

void save_dataset(const std::vector<DatasetSample>& dataset, const std::string& path) {
  if (dataset.empty()) throw ValidationError("dataset: nothing to save");
  const Eigen::Index ps = dataset.front().params.shape.size();
  const Eigen::Index pe = dataset.front().params.expr.size();
  const Eigen::Index dim = dataset.front().embedding.size();
  ArrayFile array;
  array.data.resize(static_cast<Eigen::Index>(dataset.size()),
                    dim + ps + pe + 3 * kNumLandmarks);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    if (s.params.shape.size() != ps || s.params.expr.size() != pe ||
        s.embedding.size() != dim)
      throw ValidationError("dataset: inconsistent sample dimensions");
    Eigen::Index col = 0;
    array.data.row(i).segment(col, dim) = s.embedding.transpose();
    col += dim;
    array.data.row(i).segment(col, ps) = s.params.shape.transpose();
    col += ps;
    array.data.row(i).segment(col, pe) = s.params.expr.transpose();
    col += pe;
    for (int l = 0; l < kNumLandmarks; ++l)
      array.data.row(i).segment(col + 3 * l, 3) = s.landmarks.row(l);
  }
  array.meta["kind"] = "dataset";
  array.meta["p_shape"] = std::to_string(ps);
  array.meta["p_expr"] = std::to_string(pe);
  array.meta["embedding_dim"] = std::to_string(dim);
  save_array(array, path);
}

std::vector<DatasetSample> load_dataset(const std::string& path) {
  const ArrayFile array = load_array(path);
  if (!array.meta.count("kind") || array.meta.at("kind") != "dataset")
    throw IoError("dataset: array file is not of kind 'dataset'");
  const auto ps = std::stoll(array.meta.at("p_shape"));
  const auto pe = std::stoll(array.meta.at("p_expr"));
  const auto dim = std::stoll(array.meta.at("embedding_dim"));
  if (array.data.cols() != dim + ps + pe + 3 * kNumLandmarks)
    throw IoError("dataset: dimension mismatch");
  std::vector<DatasetSample> out(array.data.rows());
  for (Eigen::Index i = 0; i < array.data.rows(); ++i) {
    auto& s = out[i];
    Eigen::Index col = 0;
    s.embedding = array.data.row(i).segment(col, dim).transpose();
    col += dim;
    s.params.shape = array.data.row(i).segment(col, ps).transpose();
    col += ps;
    s.params.expr = array.data.row(i).segment(col, pe).transpose();
    col += pe;
    s.params.normalized = true;
    s.landmarks.resize(kNumLandmarks, 3);
    for (int l = 0; l < kNumLandmarks; ++l)
      s.landmarks.row(l) = array.data.row(i).segment(col + 3 * l, 3);
  }
  return out;
}

namespace {

struct RiffHeader {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

template <typename T>
T read_le(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError(what + ": truncated WAV");
  return v;
}

}  // namespace

Waveform read_wav(const std::string& path) {
  auto is = open_in(path);
  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0) throw IoError("wav: not a RIFF file");
  read_le<std::uint32_t>(is, "wav");
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0) throw IoError("wav: not a WAVE file");

  RiffHeader hdr;
  std::vector<char> data;
  while (is.read(tag, 4)) {
    const auto size = read_le<std::uint32_t>(is, "wav");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      hdr.format = read_le<std::uint16_t>(is, "wav");
      hdr.channels = read_le<std::uint16_t>(is, "wav");
      hdr.sample_rate = read_le<std::uint32_t>(is, "wav");
      read_le<std::uint32_t>(is, "wav");  // byte rate
      read_le<std::uint16_t>(is, "wav");  // block align
      hdr.bits = read_le<std::uint16_t>(is, "wav");
      if (size > 16) is.seekg(size - 16, std::ios::cur);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(size);
      is.read(data.data(), size);
      if (static_cast<std::uint32_t>(is.gcount()) != size)
        throw IoError("wav: truncated data chunk");
    } else {
      is.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (hdr.sample_rate == 0) throw IoError("wav: missing fmt chunk");
  if (hdr.channels != 1) throw IoError("wav: only mono audio is supported");
  if (data.empty()) throw IoError("wav: missing data chunk");

  Waveform wave;
  wave.sample_rate = static_cast<int>(hdr.sample_rate);
  if (hdr.format == 1 && hdr.bits == 16) {
    const auto n = data.size() / 2;
    wave.samples.resize(n);
    const auto* pcm = reinterpret_cast<const std::int16_t*>(data.data());
    // 32767 mirrors the writer's scaling so a round trip stays within half
    // a quantization step.
    for (std::size_t i = 0; i < n; ++i) wave.samples[i] = pcm[i] / 32767.0;
  } else if (hdr.format == 3 && hdr.bits == 32) {
    const auto n = data.size() / 4;
    wave.samples.resize(n);
    const auto* pcm = reinterpret_cast<const float*>(data.data());
    for (std::size_t i = 0; i < n; ++i) wave.samples[i] = pcm[i];
  } else {
    throw IoError("wav: unsupported encoding (need 16-bit PCM or 32-bit float)");
  }
  wave.validate();
  return wave;
}

void write_wav(const Waveform& wave, const std::string& path, int bits) {
  wave.validate();
  if (bits != 16 && bits != 32) throw ValidationError("wav: bits must be 16 or 32");
  auto os = open_out(path);
  const std::uint16_t format = bits == 16 ? 1 : 3;
  const std::uint32_t n = static_cast<std::uint32_t>(wave.samples.size());
  const std::uint32_t data_size = n * (bits / 8);
  const std::uint32_t riff_size = 36 + data_size;
  auto w32 = [&](std::uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); };
  auto w16 = [&](std::uint16_t v) { os.write(reinterpret_cast<char*>(&v), 2); };
  os.write("RIFF", 4);
  w32(riff_size);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  w32(16);
  w16(format);
  w16(1);
  w32(static_cast<std::uint32_t>(wave.sample_rate));
  w32(static_cast<std::uint32_t>(wave.sample_rate * (bits / 8)));
  w16(static_cast<std::uint16_t>(bits / 8));
  w16(static_cast<std::uint16_t>(bits));
  os.write("data", 4);
  w32(data_size);
  if (bits == 16) {
    for (double s : wave.samples) {
      const auto v = static_cast<std::int16_t>(
          std::lround(std::clamp(s, -1.0, 1.0) * 32767.0));
      os.write(reinterpret_cast<const char*>(&v), 2);
    }
  } else {
    for (double s : wave.samples) {
      const float v = static_cast<float>(s);
      os.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  if (!os) throw IoError("wav: write failed for " + path);
}

}  // namespace vmesh
