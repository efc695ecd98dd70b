// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace vmesh {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 16000;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  void validate() const;
};

struct MelConfig {
  double window_s = 0.025;
  double hop_s = 0.010;
  int n_fft = 512;
  int n_mels = 64;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 means sample_rate / 2
  double floor_eps = 1e-10;
};

struct MelSpectrogram {
  Eigen::MatrixXd frames;  // T x n_mels, time-major
  double frame_s = 0.025;
  double hop_s = 0.010;
};

/// Frame count for a given waveform length: 1 + floor((len - window) / hop).
Eigen::Index mel_frame_count(std::size_t num_samples, int sample_rate,
                             const MelConfig& cfg);

/// HTK mel scale helpers.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Center frequencies (Hz) of the triangular mel filters.
std::vector<double> mel_center_frequencies(int sample_rate, const MelConfig& cfg);

/// Hann-windowed STFT power -> triangular HTK mel filterbank -> natural
/// log of (energy + floor_eps). OpenMP-parallel over frames.
MelSpectrogram log_mel(const Waveform& wave, const MelConfig& cfg = {});
MelSpectrogram log_mel_serial(const Waveform& wave, const MelConfig& cfg = {});

/// Zero mean, unit population variance per mel bin; bins with variance
/// below 1e-12 are centered only.
MelSpectrogram per_bin_normalize(const MelSpectrogram& spec);

/// Contiguous seeded-uniform crop of length in [min_s, min(max_s, full)]
/// seconds at a seeded-uniform offset.
Waveform random_crop(const Waveform& wave, double min_s, double max_s,
                     std::uint64_t seed);

}  // namespace vmesh
