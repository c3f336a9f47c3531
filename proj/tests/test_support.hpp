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

// Test-only oracles: finite-difference gradients, a naive DFT and small
// signal builders. Nothing here calls into the code paths it is used to check.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "footfall/autodiff.hpp"
#include "footfall/random.hpp"

namespace footfall::testing {

// Relative error ||a - b|| / max(||a||, ||b||, floor).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

struct GradCheckResult {
  double worst_relative_error = 0.0;
  std::string worst_param;
};

// Compares analytic gradients of a scalar loss against central differences
// for every parameter in params. build(tape) must rebuild the loss from the
// current parameter values.
inline GradCheckResult gradient_check(const std::function<ad::Var<double>(ad::Tape<double>&)>& build,
                                      std::vector<ad::Var<double>> params, double step = 1e-4) {
  for (auto& p : params) p.zero_grad();
  {
    ad::Tape<double> tape;
    auto loss = build(tape);
    tape.backward(loss);
  }
  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    std::vector<double> analytic(p.grad().data().begin(), p.grad().data().end());
    std::vector<double> numeric(analytic.size());
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double orig = p.value()[i];
      p.mutable_value()[i] = orig + step;
      ad::Tape<double> t1(false);
      const double up = build(t1).value()[0];
      p.mutable_value()[i] = orig - step;
      ad::Tape<double> t2(false);
      const double down = build(t2).value()[0];
      p.mutable_value()[i] = orig;
      numeric[i] = (up - down) / (2.0 * step);
    }
    const double err = relative_error(analytic, numeric);
    if (err > result.worst_relative_error) {
      result.worst_relative_error = err;
      result.worst_param = "param " + std::to_string(pi);
    }
  }
  return result;
}

inline ad::Tensor<double> random_tensor(ad::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  ad::Tensor<double> t(std::move(shape));
  CounterRng rng(seed);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// O(N^2) DFT, X[k] = sum_n x[n] e^{-2 pi i k n / N}.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * i) % n) / static_cast<double>(n);
      acc += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// Bin of the largest |DFT| among bins 1 .. N/2 (naive DFT, so independent of FFTW).
inline std::size_t dft_peak_bin(const std::vector<double>& x) {
  const auto spec = naive_dft(x);
  std::size_t best = 1;
  for (std::size_t k = 1; k <= x.size() / 2; ++k)
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  return best;
}

inline std::vector<float> sine(double freq, int rate, std::size_t n, double amp = 1.0, double phase = 0.0) {
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate + phase));
  return out;
}

inline std::vector<float> white_noise(std::size_t n, std::uint64_t seed, double amp = 1.0) {
  std::vector<float> out(n);
  CounterRng rng(seed);
  for (auto& v : out) v = static_cast<float>(amp * rng.symmetric());
  return out;
}

// Pearson correlation.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace footfall::testing
