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

// Filtered-noise (subtractive) synthesis and the multi-scale spectral loss.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "footfall/autodiff.hpp"
#include "footfall/dsp.hpp"
#include "footfall/error.hpp"
#include "footfall/fft.hpp"
#include "footfall/random.hpp"

namespace footfall {

struct NoiseSpec {
  std::uint64_t seed = 0;
  std::string generator = "splitmix64-counter";
};

// Linear map from a half-spectrum magnitude frame to a linear-phase FIR.
//
// The zero-phase impulse response is the inverse real DFT (size 2*(bands-1))
// of the magnitudes; it is centred, cut to ir_length taps and Hann-windowed.
// ir_length may be 2*(bands-1) + 1: the periodic response then wraps onto both
// end taps, which the window zeroes anyway. Rows are built in mirrored pairs so
// the filter is exactly symmetric.
class FirDesign {
 public:
  FirDesign(std::size_t bands = 65, std::size_t ir_length = 129) : bands_(bands), ir_length_(ir_length) {
    if (bands < 2) throw ContractViolation("fir: need at least 2 bands");
    const std::size_t n_fft = 2 * (bands - 1);
    if (ir_length % 2 == 0 || ir_length > n_fft + 1)
      throw ContractViolation("fir: ir_length must be odd and at most 2*(bands-1)+1");
    center_ = (ir_length - 1) / 2;
    matrix_.resize(static_cast<Eigen::Index>(ir_length), static_cast<Eigen::Index>(bands));
    for (std::size_t d = 0; d <= center_; ++d) {
      const double w =
          ir_length == 1 ? 1.0
                         : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(center_ + d) /
                                                  static_cast<double>(ir_length - 1));
      Eigen::RowVectorXd row(static_cast<Eigen::Index>(bands));
      for (std::size_t j = 0; j < bands; ++j) {
        double c;
        if (j == 0)
          c = 1.0;
        else if (j == bands - 1)
          c = (d % 2 == 0) ? 1.0 : -1.0;
        else
          c = 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(j * d) / static_cast<double>(n_fft));
        row[static_cast<Eigen::Index>(j)] = w * c / static_cast<double>(n_fft);
      }
      matrix_.row(static_cast<Eigen::Index>(center_ + d)) = row;
      matrix_.row(static_cast<Eigen::Index>(center_ - d)) = row;
    }
  }

  std::size_t bands() const noexcept { return bands_; }
  std::size_t ir_length() const noexcept { return ir_length_; }
  std::size_t center() const noexcept { return center_; }
  const RowMatrix& matrix() const noexcept { return matrix_; }

  // ir[n] = sum_j M(n, j) * magnitudes[j]
  template <typename T>
  void apply(std::span<const T> magnitudes, std::span<double> ir) const {
    for (std::size_t n = 0; n < ir_length_; ++n) {
      double acc = 0.0;
      for (std::size_t j = 0; j < bands_; ++j) acc += matrix_(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) * magnitudes[j];
      ir[n] = acc;
    }
  }

 private:
  std::size_t bands_;
  std::size_t ir_length_;
  std::size_t center_;
  RowMatrix matrix_;
};

inline std::vector<double> fir_from_magnitudes(std::span<const double> magnitudes, std::size_t ir_length) {
  FirDesign design(magnitudes.size(), ir_length);
  std::vector<double> ir(ir_length);
  design.apply(magnitudes, std::span<double>(ir));
  return ir;
}

namespace synth_detail {

// Excitation sample i of frame k: uniform [-1, 1) keyed by the global sample index.
inline double excitation(std::uint64_t seed, std::size_t frame, std::size_t hop, std::size_t i) {
  return CounterRng::symmetric_at(seed, static_cast<std::uint64_t>(frame * hop + i));
}

// Adds frame k's filtered block into out (length frames*hop). The FIR's group
// delay is removed, so the block is centred on samples [k*hop, (k+1)*hop).
inline void add_filtered_block(std::span<const double> noise, std::span<const double> ir, std::size_t center,
                               std::size_t frame, std::size_t hop, std::span<double> out) {
  const long base = static_cast<long>(frame * hop) - static_cast<long>(center);
  const long len = static_cast<long>(out.size());
  for (std::size_t i = 0; i < noise.size(); ++i) {
    const double e = noise[i];
    const long start = base + static_cast<long>(i);
    const long j0 = std::max(0L, -start);
    const long j1 = std::min(static_cast<long>(ir.size()), len - start);
    for (long j = j0; j < j1; ++j) out[static_cast<std::size_t>(start + j)] += e * ir[static_cast<std::size_t>(j)];
  }
}

}  // namespace synth_detail

// Frame-wise filtered noise. magnitudes is frames x bands (row-major); each
// frame filters hop fresh uniform noise samples and the filtered blocks are
// overlap-added. Output length frames * hop.
template <typename T>
std::vector<float> filtered_noise(std::span<const T> magnitudes, std::size_t frames, const FirDesign& design,
                                  const NoiseSpec& noise, std::size_t hop) {
  if (magnitudes.size() != frames * design.bands()) throw ContractViolation("filtered_noise: magnitude count mismatch");
  std::vector<double> out(frames * hop, 0.0), ir(design.ir_length()), block(hop);
  for (std::size_t k = 0; k < frames; ++k) {
    design.apply(magnitudes.subspan(k * design.bands(), design.bands()), std::span<double>(ir));
    for (std::size_t i = 0; i < hop; ++i) block[i] = synth_detail::excitation(noise.seed, k, hop, i);
    synth_detail::add_filtered_block(block, ir, design.center(), k, hop, out);
  }
  return {out.begin(), out.end()};
}

namespace ad {

// Differentiable filtered noise for a batch. magnitudes is time-major
// [(steps * batch) x bands]; item b uses seeds[b]. Result is [batch x steps*hop].
template <typename T>
Var<T> filtered_noise(Tape<T>& tape, const Var<T>& magnitudes, const FirDesign& design,
                      std::vector<std::uint64_t> seeds, std::size_t steps, std::size_t hop) {
  const std::size_t batch = seeds.size();
  const std::size_t bands = design.bands();
  if (magnitudes.value().rows() != steps * batch || magnitudes.value().cols() != bands)
    throw ContractViolation("filtered_noise: magnitudes must be [steps*batch x bands]");
  const std::size_t length = steps * hop;
  Tensor<T> out(Shape{batch, length});
  std::vector<double> acc(length), ir(design.ir_length()), block(hop);
  const auto& mv = magnitudes.value();
  for (std::size_t b = 0; b < batch; ++b) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t row = t * batch + b;
      design.apply(mv.data().subspan(row * bands, bands), std::span<double>(ir));
      for (std::size_t i = 0; i < hop; ++i) block[i] = synth_detail::excitation(seeds[b], t, hop, i);
      synth_detail::add_filtered_block(block, ir, design.center(), t, hop, acc);
    }
    for (std::size_t i = 0; i < length; ++i) out[b * length + i] = static_cast<T>(acc[i]);
  }
  Var<T> y = tape.output(std::move(out), tape.any_requires_grad({&magnitudes}));
  if (y.requires_grad())
    tape.push([mn = magnitudes.node(), yn = y.node(), design, seeds = std::move(seeds), steps, hop, batch, bands,
               length] {
      if (!yn->has_grad()) return;
      const std::size_t taps = design.ir_length();
      const long center = static_cast<long>(design.center());
      const auto& m = design.matrix();
      auto& gm = mn->grad_ref();
      std::vector<double> g_ir(taps), block(hop);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* g = yn->grad.data().data() + b * length;
        for (std::size_t t = 0; t < steps; ++t) {
          for (std::size_t i = 0; i < hop; ++i) block[i] = synth_detail::excitation(seeds[b], t, hop, i);
          // dL/d ir[j] = sum_i e[i] * g[t*hop - center + i + j]
          const long base = static_cast<long>(t * hop) - center;
          std::fill(g_ir.begin(), g_ir.end(), 0.0);
          for (std::size_t i = 0; i < hop; ++i) {
            const long start = base + static_cast<long>(i);
            const long j0 = std::max(0L, -start);
            const long j1 = std::min(static_cast<long>(taps), static_cast<long>(length) - start);
            for (long j = j0; j < j1; ++j)
              g_ir[static_cast<std::size_t>(j)] += block[i] * static_cast<double>(g[start + j]);
          }
          const std::size_t row = t * batch + b;
          for (std::size_t j = 0; j < bands; ++j) {
            double acc = 0.0;
            for (std::size_t n = 0; n < taps; ++n) acc += m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) * g_ir[n];
            gm[row * bands + j] += static_cast<T>(acc);
          }
        }
      }
    });
  return y;
}

}  // namespace ad

// ---------------------------------------------------------------------------
// Multi-scale spectral loss

struct SpectralLossConfig {
  std::vector<std::size_t> fft_sizes{2048, 1024, 512, 256, 128, 64};
  double overlap = 0.75;
  double magnitude_weight = 1.0;
  double log_magnitude_weight = 1.0;
  double log_floor = 1e-7;

  std::size_t hop_for(std::size_t fft_size) const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fft_size * (1.0 - overlap))));
  }
};

namespace synth_detail {

struct ScaleSpectra {
  std::size_t frames = 0, bins = 0;
  std::vector<fft::Complex> spec;
  std::vector<double> mag;
};

template <typename S>
ScaleSpectra analyze_scale(std::span<const S> x, std::size_t n, std::size_t hop, const std::vector<double>& window) {
  ScaleSpectra out;
  out.frames = stft_frame_count(x.size(), n, hop);
  out.bins = n / 2 + 1;
  out.spec.resize(out.frames * out.bins);
  out.mag.resize(out.spec.size());
  std::vector<double> seg(n);
  for (std::size_t f = 0; f < out.frames; ++f) {
    const std::size_t start = f * hop;
    for (std::size_t m = 0; m < n; ++m)
      seg[m] = start + m < x.size() ? window[m] * static_cast<double>(x[start + m]) : 0.0;
    fft::rfft(seg, std::span(out.spec).subspan(f * out.bins, out.bins));
  }
  for (std::size_t i = 0; i < out.spec.size(); ++i) out.mag[i] = std::abs(out.spec[i]);
  return out;
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Pushes dL/d|X| of one signal back to its samples (accumulating into grad).
inline void backprop_scale(const ScaleSpectra& s, std::span<const double> g_mag, std::size_t n, std::size_t hop,
                           const std::vector<double>& window, std::span<double> grad) {
  std::vector<fft::Complex> c(s.bins);
  std::vector<double> seg(n);
  for (std::size_t f = 0; f < s.frames; ++f) {
    for (std::size_t k = 0; k < s.bins; ++k) {
      const std::size_t idx = f * s.bins + k;
      const double m = s.mag[idx];
      const fft::Complex ck = m > 1e-12 ? g_mag[idx] * s.spec[idx] / m : fft::Complex(0.0);
      c[k] = (k == 0 || k == s.bins - 1) ? fft::Complex(ck.real(), 0.0) : 0.5 * ck;
    }
    // c2r yields sum_k Re(c_k e^{+2 pi i k n / N}) with each one-sided bin counted once.
    fft::irfft(c, seg);
    const std::size_t start = f * hop;
    for (std::size_t m = 0; m < n && start + m < grad.size(); ++m) grad[start + m] += window[m] * seg[m];
  }
}

// Loss of one (x, y) pair; fills gradients when the spans are non-empty.
template <typename S>
double pair_loss(std::span<const S> x, std::span<const S> y, const SpectralLossConfig& cfg, std::span<double> grad_x,
                 std::span<double> grad_y) {
  double total = 0.0;
  for (std::size_t n : cfg.fft_sizes) {
    if (!fft::is_power_of_two(n)) throw ContractViolation("spectral loss: FFT sizes must be powers of two");
    const std::size_t hop = cfg.hop_for(n);
    const auto window = make_window(Window::hann, n);
    const auto sx = analyze_scale(x, n, hop, window);
    const auto sy = analyze_scale(y, n, hop, window);
    const double count = static_cast<double>(sx.mag.size());
    const bool want_x = !grad_x.empty(), want_y = !grad_y.empty();
    std::vector<double> gx(want_x ? sx.mag.size() : 0), gy(want_y ? sy.mag.size() : 0);
    double lin = 0.0, log_term = 0.0;
    for (std::size_t i = 0; i < sx.mag.size(); ++i) {
      const double mx = sx.mag[i], my = sy.mag[i];
      const double lx = std::log(std::max(mx, cfg.log_floor)), ly = std::log(std::max(my, cfg.log_floor));
      lin += std::fabs(mx - my);
      log_term += std::fabs(lx - ly);
      const double s_lin = sign(mx - my), s_log = sign(lx - ly);
      if (want_x)
        gx[i] = (cfg.magnitude_weight * s_lin + cfg.log_magnitude_weight * s_log * (mx > cfg.log_floor ? 1.0 / mx : 0.0)) / count;
      if (want_y)
        gy[i] = (-cfg.magnitude_weight * s_lin - cfg.log_magnitude_weight * s_log * (my > cfg.log_floor ? 1.0 / my : 0.0)) / count;
    }
    total += (cfg.magnitude_weight * lin + cfg.log_magnitude_weight * log_term) / count;
    if (want_x) backprop_scale(sx, gx, n, hop, window, grad_x);
    if (want_y) backprop_scale(sy, gy, n, hop, window, grad_y);
  }
  return total;
}

}  // namespace synth_detail

// Sum over FFT sizes of mean |Sx - Sy| plus mean |log Sx - log Sy| (Hann,
// 75% overlap, log floor 1e-7).
template <typename S>
double multiscale_spectral_loss(std::span<const S> x, std::span<const S> y, const SpectralLossConfig& cfg = {}) {
  if (x.size() != y.size()) throw ContractViolation("multiscale_spectral_loss: length mismatch");
  return synth_detail::pair_loss<S>(x, y, cfg, {}, {});
}

inline double multiscale_spectral_loss(const std::vector<float>& x, const std::vector<float>& y,
                                       const SpectralLossConfig& cfg = {}) {
  return multiscale_spectral_loss(std::span<const float>(x), std::span<const float>(y), cfg);
}

namespace ad {

// Batch mean of the multi-scale spectral loss between rows of x and y
// ([batch x length] each). Differentiable with respect to both.
template <typename T>
Var<T> multiscale_spectral_loss(Tape<T>& tape, const Var<T>& x, const Var<T>& y, const SpectralLossConfig& cfg = {}) {
  if (x.shape() != y.shape())
    throw ContractViolation("multiscale_spectral_loss: shape mismatch " + shape_string(x.shape()) + " vs " +
                            shape_string(y.shape()));
  const std::size_t batch = x.value().rows(), length = x.value().cols();
  const bool need = tape.any_requires_grad({&x, &y});
  const bool gx_on = need && x.requires_grad(), gy_on = need && y.requires_grad();
  auto grad_x = std::make_shared<std::vector<double>>(gx_on ? batch * length : 0);
  auto grad_y = std::make_shared<std::vector<double>>(gy_on ? batch * length : 0);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto xs = x.value().data().subspan(b * length, length);
    const auto ys = y.value().data().subspan(b * length, length);
    std::span<double> gx = gx_on ? std::span(*grad_x).subspan(b * length, length) : std::span<double>();
    std::span<double> gy = gy_on ? std::span(*grad_y).subspan(b * length, length) : std::span<double>();
    total += synth_detail::pair_loss<T>(xs, ys, cfg, gx, gy);
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);
  Var<T> out = tape.output(Tensor<T>::scalar(static_cast<T>(total * inv_batch)), need);
  if (out.requires_grad())
    tape.push([xn = x.node(), yn = y.node(), on = out.node(), grad_x, grad_y, inv_batch] {
      if (!on->has_grad()) return;
      const double g = static_cast<double>(on->grad[0]) * inv_batch;
      if (!grad_x->empty()) {
        auto& gx = xn->grad_ref();
        for (std::size_t i = 0; i < grad_x->size(); ++i) gx[i] += static_cast<T>(g * (*grad_x)[i]);
      }
      if (!grad_y->empty()) {
        auto& gy = yn->grad_ref();
        for (std::size_t i = 0; i < grad_y->size(); ++i) gy[i] += static_cast<T>(g * (*grad_y)[i]);
      }
    });
  return out;
}

}  // namespace ad

}  // namespace footfall
