// Copyright 2026 The Footfall Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Deterministic signal analysis on the engine's sample/control grid.
//
// Grid convention: control frame k owns samples [k*hop, (k+1)*hop), hop =
// sample_rate / control_rate, and its centre is k*hop + hop/2. MFCC windows,
// envelope decimation and OLA trimming all use this convention.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "footfall/audio.hpp"
#include "footfall/error.hpp"
#include "footfall/fft.hpp"

namespace footfall {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Control signals

struct ControlSignal {
  double control_rate = 250.0;
  std::size_t dims = 1;
  std::vector<double> values;  // frames x dims, row-major

  ControlSignal() = default;
  ControlSignal(double rate, std::size_t d, std::size_t frames)
      : control_rate(rate), dims(d), values(frames * d, 0.0) {}

  std::size_t frames() const noexcept { return dims == 0 ? 0 : values.size() / dims; }
  double& at(std::size_t frame, std::size_t dim = 0) { return values[frame * dims + dim]; }
  double at(std::size_t frame, std::size_t dim = 0) const { return values[frame * dims + dim]; }
};

inline nlohmann::json to_json(const ControlSignal& s) {
  return {{"control_rate", s.control_rate}, {"dims", s.dims}, {"values", s.values}};
}

inline ControlSignal control_signal_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("control signal: expected an object");
  for (const char* key : {"control_rate", "dims", "values"})
    if (!j.contains(key)) throw FormatError(std::string("control signal: missing \"") + key + "\"");
  ControlSignal s;
  s.control_rate = j.at("control_rate").get<double>();
  s.dims = j.at("dims").get<std::size_t>();
  s.values = j.at("values").get<std::vector<double>>();
  if (s.control_rate <= 0.0) throw FormatError("control signal: control_rate must be positive");
  if (s.dims == 0 || s.values.size() % s.dims != 0)
    throw FormatError("control signal: values length is not a multiple of dims");
  for (double v : s.values)
    if (!std::isfinite(v)) throw FormatError("control signal: non-finite value");
  return s;
}

// ---------------------------------------------------------------------------
// Windows and framing

enum class Window { hann, rect };

inline std::string to_string(Window w) { return w == Window::hann ? "hann" : "rect"; }

inline Window window_from_string(const std::string& name) {
  if (name == "hann") return Window::hann;
  if (name == "rect") return Window::rect;
  throw ConfigError("unknown window '" + name + "'");
}

// Periodic windows (the Hann variant overlaps to a constant at hop = n/2).
inline std::vector<double> make_window(Window kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (kind == Window::hann)
    for (std::size_t i = 0; i < n; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
  return w;
}

struct FrameSpec {
  std::size_t frame_length = 128;
  std::size_t hop = 64;
  Window window = Window::hann;

  void validate() const {
    if (hop == 0 || hop > frame_length)
      throw ConfigError("frame spec: need 0 < hop <= frame_length");
  }
};

// Relative peak-to-peak ripple of the overlapped window sum over one hop of
// steady state.
inline double cola_ripple(const FrameSpec& spec) {
  spec.validate();
  const auto w = make_window(spec.window, spec.frame_length);
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t n = 0; n < spec.hop; ++n) {
    double acc = 0.0;
    for (std::size_t m = n; m < spec.frame_length; m += spec.hop) acc += w[m];
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
  }
  return hi <= 0.0 ? INFINITY : (hi - lo) / hi;
}

inline bool is_cola(const FrameSpec& spec, double tol = 1e-6) { return cola_ripple(spec) <= tol; }

// Cuts ceil(L / hop) analysis frames on the control grid: frame k starts at
// k*hop - (frame_length - hop)/2, so its centre is k*hop + hop/2. Samples
// outside the signal read as zero. Frames are multiplied by the window.
inline std::vector<std::vector<double>> frame_signal(std::span<const float> x, const FrameSpec& spec) {
  spec.validate();
  const auto w = make_window(spec.window, spec.frame_length);
  const std::size_t count = (x.size() + spec.hop - 1) / spec.hop;
  const auto offset = static_cast<long>((spec.frame_length - spec.hop) / 2);
  std::vector<std::vector<double>> frames(count, std::vector<double>(spec.frame_length, 0.0));
  for (std::size_t k = 0; k < count; ++k) {
    const long start = static_cast<long>(k * spec.hop) - offset;
    for (std::size_t m = 0; m < spec.frame_length; ++m) {
      const long i = start + static_cast<long>(m);
      if (i >= 0 && i < static_cast<long>(x.size()))
        frames[k][m] = w[m] * x[static_cast<std::size_t>(i)];
    }
  }
  return frames;
}

// Windowed overlap-add. Each frame is multiplied by the synthesis window and
// summed at k*hop; the sum is divided by the overlapped analysis*synthesis
// window curve (positions where that curve vanishes are left at zero). Full
// output length is (K-1)*hop + frame_length. When output_length is given the
// result is trimmed symmetrically by (frame_length - hop)/2 on the left, which
// undoes frame_signal's centring, and truncated to output_length.
inline std::vector<double> overlap_add(const std::vector<std::vector<double>>& frames,
                                       const FrameSpec& spec,
                                       std::optional<std::size_t> output_length = std::nullopt) {
  spec.validate();
  if (!is_cola(spec))
    throw ConfigError("overlap_add: " + to_string(spec.window) + " window with frame " +
                      std::to_string(spec.frame_length) + " and hop " + std::to_string(spec.hop) +
                      " is not constant-overlap-add");
  const std::size_t n = spec.frame_length;
  const auto w = make_window(spec.window, n);
  if (frames.empty()) return std::vector<double>(output_length.value_or(0), 0.0);
  const std::size_t full = (frames.size() - 1) * spec.hop + n;
  std::vector<double> out(full, 0.0), norm(full, 0.0);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (frames[k].size() != n) throw ContractViolation("overlap_add: frames must share one length");
    const std::size_t start = k * spec.hop;
    for (std::size_t m = 0; m < n; ++m) {
      out[start + m] += w[m] * frames[k][m];
      norm[start + m] += w[m] * w[m];
    }
  }
  for (std::size_t i = 0; i < full; ++i) out[i] = norm[i] > 1e-12 ? out[i] / norm[i] : 0.0;
  if (!output_length) return out;
  const std::size_t left = (n - spec.hop) / 2;
  std::vector<double> trimmed(*output_length, 0.0);
  for (std::size_t i = 0; i < *output_length && left + i < full; ++i) trimmed[i] = out[left + i];
  return trimmed;
}

// ---------------------------------------------------------------------------
// STFT

struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;  // fft_size / 2 + 1
  std::vector<std::complex<double>> data;

  std::complex<double> at(std::size_t frame, std::size_t bin) const { return data[frame * bins + bin]; }
};

// Number of frames the STFT produces: 1 + floor((L - N)/hop) full frames plus
// one zero-padded tail frame when samples remain; a single padded frame when
// L < N.
inline std::size_t stft_frame_count(std::size_t length, std::size_t fft_size, std::size_t hop) {
  if (length <= fft_size) return 1;
  const std::size_t full = 1 + (length - fft_size) / hop;
  return (length - fft_size) % hop == 0 ? full : full + 1;
}

template <typename Sample>
Spectrogram stft(std::span<const Sample> x, std::size_t fft_size, std::size_t hop, Window window) {
  if (!fft::is_power_of_two(fft_size)) throw ContractViolation("stft: fft_size must be a power of two");
  if (hop == 0 || hop > fft_size) throw ContractViolation("stft: need 0 < hop <= fft_size");
  const auto w = make_window(window, fft_size);
  Spectrogram s;
  s.frames = stft_frame_count(x.size(), fft_size, hop);
  s.bins = fft_size / 2 + 1;
  s.data.resize(s.frames * s.bins);
  std::vector<double> seg(fft_size);
  for (std::size_t f = 0; f < s.frames; ++f) {
    const std::size_t start = f * hop;
    for (std::size_t m = 0; m < fft_size; ++m)
      seg[m] = start + m < x.size() ? w[m] * static_cast<double>(x[start + m]) : 0.0;
    fft::rfft(seg, std::span(s.data).subspan(f * s.bins, s.bins));
  }
  return s;
}

inline Spectrogram stft(const std::vector<float>& x, std::size_t fft_size, std::size_t hop,
                        Window window) {
  return stft(std::span<const float>(x), fft_size, hop, window);
}

// ---------------------------------------------------------------------------
// Envelope analysis

// |analytic signal| computed with a length-L DFT: DC (and Nyquist for even L)
// weighted 1, positive bins doubled, negative bins zeroed.
template <typename Sample>
std::vector<double> hilbert_envelope(std::span<const Sample> x) {
  const std::size_t n = x.size();
  if (n == 0) throw ContractViolation("hilbert_envelope: empty input");
  std::vector<fft::Complex> buf(n), spec(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = static_cast<double>(x[i]);
  fft::forward(buf, spec);
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < n; ++k) {
    if (k < (n + 1) / 2)
      spec[k] *= 2.0;
    else if (!(n % 2 == 0 && k == half))
      spec[k] = 0.0;
  }
  fft::backward(spec, buf);
  std::vector<double> env(n);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(buf[i]) * scale;
  return env;
}

inline std::vector<double> hilbert_envelope(const std::vector<float>& x) {
  return hilbert_envelope(std::span<const float>(x));
}
inline std::vector<double> hilbert_envelope(const std::vector<double>& x) {
  return hilbert_envelope(std::span<const double>(x));
}

// Explicit diffusion x[n] += lambda * (x[n-1] - 2x[n] + x[n+1]) with the end
// values replicated past the boundaries.
inline std::vector<double> laplacian_smooth(std::vector<double> x, int iterations, double lambda) {
  if (!(lambda > 0.0 && lambda < 0.5)) throw ContractViolation("laplacian_smooth: lambda must lie in (0, 0.5)");
  if (iterations < 0) throw ContractViolation("laplacian_smooth: iterations must be >= 0");
  const std::size_t n = x.size();
  if (n < 2) return x;
  std::vector<double> next(n);
  for (int it = 0; it < iterations; ++it) {
    next[0] = x[0] + lambda * (x[1] - x[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) next[i] = x[i] + lambda * (x[i - 1] - 2.0 * x[i] + x[i + 1]);
    next[n - 1] = x[n - 1] + lambda * (x[n - 2] - x[n - 1]);
    x.swap(next);
  }
  return x;
}

struct AnalysisConfig {
  int sample_rate = 16000;
  int control_rate = 250;
  // Enough diffusion to push 100 Hz ripple of the decimated envelope 20 dB
  // down while leaving a 4 Hz modulator within 0.5%.
  int smooth_iterations = 5500;
  double smooth_lambda = 0.25;

  int hop() const {
    if (control_rate <= 0 || sample_rate % control_rate != 0)
      throw ConfigError("sample_rate must be a positive multiple of control_rate");
    return sample_rate / control_rate;
  }
  std::size_t frames_for(std::size_t samples) const {
    const auto h = static_cast<std::size_t>(hop());
    return (samples + h - 1) / h;
  }
};

// Mean of each hop-sized bin; the last bin may be partial.
inline std::vector<double> decimate_mean(std::span<const double> x, std::size_t hop) {
  const std::size_t frames = (x.size() + hop - 1) / hop;
  std::vector<double> out(frames, 0.0);
  for (std::size_t k = 0; k < frames; ++k) {
    const std::size_t a = k * hop, b = std::min(x.size(), a + hop);
    double acc = 0.0;
    for (std::size_t i = a; i < b; ++i) acc += x[i];
    out[k] = acc / static_cast<double>(b - a);
  }
  return out;
}

// Smoothed analytic-signal envelope decimated to the control rate (d = 1).
inline ControlSignal control_proxy(const AudioClip& clip, const AnalysisConfig& cfg = {}) {
  if (clip.sample_rate != cfg.sample_rate)
    throw ContractViolation("control_proxy: clip rate " + std::to_string(clip.sample_rate) +
                            " != engine rate " + std::to_string(cfg.sample_rate));
  ControlSignal out(cfg.control_rate, 1, cfg.frames_for(clip.length()));
  if (clip.empty()) return out;
  auto env = laplacian_smooth(hilbert_envelope(clip.samples), cfg.smooth_iterations, cfg.smooth_lambda);
  auto dec = decimate_mean(env, static_cast<std::size_t>(cfg.hop()));
  for (std::size_t k = 0; k < dec.size(); ++k) out.values[k] = std::max(0.0, dec[k]);
  return out;
}

// ---------------------------------------------------------------------------
// Mel / MFCC

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters (peak 1) evaluated at the rfft bin frequencies.
inline RowMatrix mel_filterbank(int n_mels, std::size_t fft_size, int sample_rate, double f_lo,
                                double f_hi) {
  const std::size_t bins = fft_size / 2 + 1;
  RowMatrix bank = RowMatrix::Zero(n_mels, static_cast<Eigen::Index>(bins));
  const double m_lo = hz_to_mel(f_lo), m_hi = hz_to_mel(f_hi);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / (n_mels + 1));
  for (int m = 0; m < n_mels; ++m) {
    const double a = edges[m], c = edges[m + 1], b = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      double v = 0.0;
      if (f > a && f <= c)
        v = (f - a) / (c - a);
      else if (f > c && f < b)
        v = (b - f) / (b - c);
      bank(m, static_cast<Eigen::Index>(k)) = v;
    }
  }
  return bank;
}

// Orthonormal DCT-II matrix, rows are basis vectors: D(k, n).
inline RowMatrix dct_matrix(int n) {
  RowMatrix d(n, n);
  for (int k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i)
      d(k, i) = scale * std::cos(std::numbers::pi * (i + 0.5) * k / static_cast<double>(n));
  }
  return d;
}

struct MfccConfig {
  int sample_rate = 16000;
  std::size_t fft_size = 1024;
  std::size_t hop = 64;
  int n_mels = 128;
  int n_coeffs = 13;
  double f_lo = 20.0;
  double f_hi = 8000.0;
  double log_floor = 1e-5;
};

// Precomputed filterbank and DCT for repeated MFCC extraction.
class MfccExtractor {
 public:
  explicit MfccExtractor(MfccConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.n_coeffs > cfg_.n_mels) throw ContractViolation("mfcc: n_coeffs must not exceed n_mels");
    if (!fft::is_power_of_two(cfg_.fft_size)) throw ContractViolation("mfcc: fft_size must be a power of two");
    if (cfg_.hop == 0) throw ContractViolation("mfcc: hop must be positive");
    bank_ = mel_filterbank(cfg_.n_mels, cfg_.fft_size, cfg_.sample_rate, cfg_.f_lo, cfg_.f_hi);
    dct_ = dct_matrix(cfg_.n_mels).topRows(cfg_.n_coeffs);
    window_ = make_window(Window::hann, cfg_.fft_size);
  }

  const MfccConfig& config() const noexcept { return cfg_; }

  // frames x n_coeffs; frame k is centred on k*hop + hop/2.
  RowMatrix operator()(std::span<const float> x) const {
    const std::size_t n = cfg_.fft_size;
    const std::size_t frames = (x.size() + cfg_.hop - 1) / cfg_.hop;
    RowMatrix out(static_cast<Eigen::Index>(frames), cfg_.n_coeffs);
    std::vector<double> seg(n);
    std::vector<fft::Complex> spec(n / 2 + 1);
    Eigen::VectorXd mag(static_cast<Eigen::Index>(n / 2 + 1));
    for (std::size_t k = 0; k < frames; ++k) {
      const long start = static_cast<long>(k * cfg_.hop + cfg_.hop / 2) - static_cast<long>(n / 2);
      for (std::size_t m = 0; m < n; ++m) {
        const long i = start + static_cast<long>(m);
        seg[m] = (i >= 0 && i < static_cast<long>(x.size())) ? window_[m] * x[static_cast<std::size_t>(i)] : 0.0;
      }
      fft::rfft(seg, spec);
      for (std::size_t b = 0; b < spec.size(); ++b) mag[static_cast<Eigen::Index>(b)] = std::abs(spec[b]);
      Eigen::VectorXd mel = bank_ * mag;
      for (Eigen::Index m = 0; m < mel.size(); ++m) mel[m] = std::log(std::max(mel[m], cfg_.log_floor));
      out.row(static_cast<Eigen::Index>(k)) = (dct_ * mel).transpose();
    }
    return out;
  }

  RowMatrix operator()(const AudioClip& clip) const {
    if (clip.sample_rate != cfg_.sample_rate) throw ContractViolation("mfcc: clip sample rate mismatch");
    return (*this)(std::span<const float>(clip.samples));
  }

 private:
  MfccConfig cfg_;
  RowMatrix bank_;
  RowMatrix dct_;
  std::vector<double> window_;
};

inline RowMatrix mfcc(const AudioClip& clip, std::size_t fft_size = 1024, std::size_t hop = 64,
                      int n_mels = 128, int n_coeffs = 13) {
  MfccConfig cfg;
  cfg.sample_rate = clip.sample_rate;
  cfg.fft_size = fft_size;
  cfg.hop = hop;
  cfg.n_mels = n_mels;
  cfg.n_coeffs = n_coeffs;
  cfg.f_hi = std::min(cfg.f_hi, clip.sample_rate / 2.0);
  return MfccExtractor(cfg)(clip);
}

}  // namespace footfall
