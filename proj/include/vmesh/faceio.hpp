// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "vmesh/audio.hpp"
#include "vmesh/distill.hpp"
#include "vmesh/fitting.hpp"
#include "vmesh/metrics.hpp"
#include "vmesh/regressor.hpp"
#include "vmesh/synthetic.hpp"
#include "vmesh/types.hpp"

namespace vmesh {

// All binary payloads are little-endian: float64 arrays, uint32 indices.
// Every format starts with a "VMESH-<KIND> v1" line; readers reject
// unknown kinds and versions by name.

/// Model file: text header (dimensions, seed, stats presence) followed by
/// binary mean/basis/stats/triangle arrays. Round-trips bit-for-bit.
void save_model(const MorphableModel& model, const std::string& path);
MorphableModel load_model(const std::string& path);

/// Wavefront OBJ with 9-significant-digit vertices and 1-based faces.
void export_obj(const FaceMesh& mesh, const std::string& path);
FaceMesh import_obj(const std::string& path);

void save_landmark_spec(const LandmarkSpec& spec, const std::string& path);
LandmarkSpec load_landmark_spec(const std::string& path);

/// Generic 2-D float64 array with string metadata; carries embeddings,
/// parameters, spectrograms, decoder weights, and datasets.
struct ArrayFile {
  Eigen::MatrixXd data;
  std::map<std::string, std::string> meta;
};

void save_array(const ArrayFile& array, const std::string& path);
ArrayFile load_array(const std::string& path);

void save_report(const MetricsReport& report, const std::string& path);
MetricsReport load_report(const std::string& path);

// Typed wrappers over the array format.
void save_params(const ParamVector& params, const std::string& path);
ParamVector load_params(const std::string& path);

void save_embeddings(const EmbeddingBatch& batch, const std::string& path);
EmbeddingBatch load_embeddings(const std::string& path);

void save_weights(const DecoderWeights& w, const std::string& path);
DecoderWeights load_weights(const std::string& path);

void save_dataset(const std::vector<DatasetSample>& dataset, const std::string& path);
std::vector<DatasetSample> load_dataset(const std::string& path);

/// Single-channel linear PCM WAV, 16-bit integer or 32-bit float.
Waveform read_wav(const std::string& path);
void write_wav(const Waveform& wave, const std::string& path, int bits = 16);

}  // namespace vmesh
