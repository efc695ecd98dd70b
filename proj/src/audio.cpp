// SPDX-License-Identifier: Apache-2.0
#include "vmesh/audio.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include "vmesh/errors.hpp"
#include "vmesh/rng.hpp"

namespace vmesh {

void Waveform::validate() const {
  if (samples.empty()) throw ValidationError("waveform: empty");
  if (sample_rate <= 0) throw ValidationError("waveform: sample rate must be positive");
  for (double s : samples)
    if (!std::isfinite(s)) throw ValidationError("waveform: non-finite sample");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::Index mel_frame_count(std::size_t num_samples, int sample_rate,
                             const MelConfig& cfg) {
  const auto win = static_cast<std::size_t>(std::lround(cfg.window_s * sample_rate));
  const auto hop = static_cast<std::size_t>(std::lround(cfg.hop_s * sample_rate));
  if (num_samples < win)
    throw ValidationError("log_mel: waveform shorter than one window");
  return static_cast<Eigen::Index>(1 + (num_samples - win) / hop);
}

std::vector<double> mel_center_frequencies(int sample_rate, const MelConfig& cfg) {
  const double fmax = cfg.fmax > 0.0 ? cfg.fmax : sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> centers(cfg.n_mels);
  // Band edges are n_mels + 2 equally spaced mel points; center k is
  // interior point k + 1.
  for (int k = 0; k < cfg.n_mels; ++k)
    centers[k] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (k + 1) / (cfg.n_mels + 1));
  return centers;
}

namespace {

// Iterative radix-2 Cooley-Tukey, length must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

struct MelPlan {
  int win = 0, hop = 0;
  std::vector<double> window;            // Hann
  Eigen::MatrixXd filterbank;            // n_mels x (n_fft/2 + 1)
};

MelPlan make_plan(const Waveform& wave, const MelConfig& cfg) {
  wave.validate();
  if (cfg.n_fft <= 0 || (cfg.n_fft & (cfg.n_fft - 1)) != 0)
    throw ValidationError("log_mel: n_fft must be a power of two");
  if (cfg.n_mels <= 0) throw ValidationError("log_mel: n_mels must be positive");
  MelPlan plan;
  plan.win = static_cast<int>(std::lround(cfg.window_s * wave.sample_rate));
  plan.hop = static_cast<int>(std::lround(cfg.hop_s * wave.sample_rate));
  if (plan.win <= 0 || plan.hop <= 0)
    throw ValidationError("log_mel: window and hop must be positive");
  if (plan.win > cfg.n_fft)
    throw ValidationError("log_mel: window longer than n_fft");
  if (wave.samples.size() < static_cast<std::size_t>(plan.win))
    throw ValidationError("log_mel: waveform shorter than one window");

  plan.window.resize(plan.win);
  for (int i = 0; i < plan.win; ++i)
    plan.window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / plan.win);

  const int n_bins = cfg.n_fft / 2 + 1;
  const double fmax = cfg.fmax > 0.0 ? cfg.fmax : wave.sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int k = 0; k < cfg.n_mels + 2; ++k)
    edges[k] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * k / (cfg.n_mels + 1));

  plan.filterbank = Eigen::MatrixXd::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (int bin = 0; bin < n_bins; ++bin) {
      const double f = static_cast<double>(bin) * wave.sample_rate / cfg.n_fft;
      double w = 0.0;
      if (f > lo && f < center)
        w = (f - lo) / (center - lo);
      else if (f >= center && f < hi)
        w = (hi - f) / (hi - center);
      if (w > 0.0) plan.filterbank(m, bin) = w;
    }
  }
  return plan;
}

void frame_log_mel(const Waveform& wave, const MelConfig& cfg, const MelPlan& plan,
                   Eigen::Index frame, Eigen::MatrixXd& out) {
  const int n_bins = cfg.n_fft / 2 + 1;
  std::vector<std::complex<double>> buf(cfg.n_fft, {0.0, 0.0});
  const std::size_t start = static_cast<std::size_t>(frame) * plan.hop;
  for (int i = 0; i < plan.win; ++i)
    buf[i] = wave.samples[start + i] * plan.window[i];
  fft_inplace(buf);
  Eigen::VectorXd power(n_bins);
  for (int bin = 0; bin < n_bins; ++bin) power(bin) = std::norm(buf[bin]);
  const Eigen::VectorXd energy = plan.filterbank * power;
  for (int m = 0; m < cfg.n_mels; ++m)
    out(frame, m) = std::log(energy(m) + cfg.floor_eps);
}

}  // namespace

MelSpectrogram log_mel(const Waveform& wave, const MelConfig& cfg) {
  const MelPlan plan = make_plan(wave, cfg);
  const Eigen::Index frames = mel_frame_count(wave.samples.size(), wave.sample_rate, cfg);
  MelSpectrogram spec;
  spec.frame_s = cfg.window_s;
  spec.hop_s = cfg.hop_s;
  spec.frames.resize(frames, cfg.n_mels);
#pragma omp parallel for schedule(static)
  for (Eigen::Index f = 0; f < frames; ++f) frame_log_mel(wave, cfg, plan, f, spec.frames);
  return spec;
}

MelSpectrogram log_mel_serial(const Waveform& wave, const MelConfig& cfg) {
  const MelPlan plan = make_plan(wave, cfg);
  const Eigen::Index frames = mel_frame_count(wave.samples.size(), wave.sample_rate, cfg);
  MelSpectrogram spec;
  spec.frame_s = cfg.window_s;
  spec.hop_s = cfg.hop_s;
  spec.frames.resize(frames, cfg.n_mels);
  for (Eigen::Index f = 0; f < frames; ++f) frame_log_mel(wave, cfg, plan, f, spec.frames);
  return spec;
}

MelSpectrogram per_bin_normalize(const MelSpectrogram& spec) {
  const Eigen::Index t = spec.frames.rows();
  if (t < 2)
    throw ValidationError("per_bin_normalize: need at least two frames");
  MelSpectrogram out = spec;
  for (Eigen::Index m = 0; m < spec.frames.cols(); ++m) {
    const double mean = spec.frames.col(m).mean();
    const double var = (spec.frames.col(m).array() - mean).square().sum() / t;
    if (var < 1e-12) {
      out.frames.col(m).array() = spec.frames.col(m).array() - mean;
    } else {
      out.frames.col(m) = (spec.frames.col(m).array() - mean) / std::sqrt(var);
    }
  }
  return out;
}

Waveform random_crop(const Waveform& wave, double min_s, double max_s,
                     std::uint64_t seed) {
  wave.validate();
  if (min_s <= 0.0 || max_s < min_s)
    throw ValidationError("random_crop: invalid crop bounds");
  const auto n = wave.samples.size();
  const auto min_len = static_cast<std::size_t>(std::lround(min_s * wave.sample_rate));
  if (n < min_len)
    throw ValidationError("random_crop: waveform shorter than the minimum crop");
  const auto max_len = std::min(
      n, static_cast<std::size_t>(std::lround(max_s * wave.sample_rate)));

  Rng rng(seed);
  const std::size_t len = rng.uniform_int(min_len, max_len);
  const std::size_t start = rng.uniform_int(0, n - len);
  Waveform out;
  out.sample_rate = wave.sample_rate;
  out.samples.assign(wave.samples.begin() + start, wave.samples.begin() + start + len);
  return out;
}

}  // namespace vmesh
