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

// Thin FFTW3 wrapper. Plans are created once per (kind, size) with
// FFTW_ESTIMATE, which keeps results deterministic run to run, and executed
// through the new-array interface on thread-local aligned scratch buffers so
// callers on different threads never share mutable state.

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>

#include "footfall/error.hpp"

namespace footfall::fft {

using Complex = std::complex<double>;

namespace detail {

enum class Kind { forward, backward, r2c, c2r };

struct PlanCache {
  std::mutex mutex;
  std::map<std::pair<Kind, std::size_t>, fftw_plan> plans;

  ~PlanCache() {
    for (auto& [key, plan] : plans) fftw_destroy_plan(plan);
  }
};

inline PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

template <typename T>
using AlignedBuffer = std::unique_ptr<T[], FftwFree>;

// Per-thread scratch sized to the largest transform seen so far.
struct Scratch {
  AlignedBuffer<fftw_complex> in;
  AlignedBuffer<fftw_complex> out;
  std::size_t capacity = 0;

  void reserve(std::size_t n) {
    if (n <= capacity) return;
    in.reset(fftw_alloc_complex(n));
    out.reset(fftw_alloc_complex(n));
    capacity = n;
  }
};

inline Scratch& scratch(std::size_t n) {
  thread_local Scratch s;
  s.reserve(n);
  return s;
}

inline fftw_plan get_plan(Kind kind, std::size_t n) {
  auto& cache = plan_cache();
  std::lock_guard lock(cache.mutex);
  auto it = cache.plans.find({kind, n});
  if (it != cache.plans.end()) return it->second;
  AlignedBuffer<fftw_complex> a(fftw_alloc_complex(n));
  AlignedBuffer<fftw_complex> b(fftw_alloc_complex(n));
  const int size = static_cast<int>(n);
  fftw_plan plan = nullptr;
  switch (kind) {
    case Kind::forward:
      plan = fftw_plan_dft_1d(size, a.get(), b.get(), FFTW_FORWARD, FFTW_ESTIMATE);
      break;
    case Kind::backward:
      plan = fftw_plan_dft_1d(size, a.get(), b.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
      break;
    case Kind::r2c:
      plan = fftw_plan_dft_r2c_1d(size, reinterpret_cast<double*>(a.get()), b.get(),
                                  FFTW_ESTIMATE);
      break;
    case Kind::c2r:
      plan = fftw_plan_dft_c2r_1d(size, a.get(), reinterpret_cast<double*>(b.get()),
                                  FFTW_ESTIMATE);
      break;
  }
  if (plan == nullptr) throw Error("fftw: failed to create plan of size " + std::to_string(n));
  cache.plans.emplace(std::pair{kind, n}, plan);
  return plan;
}

}  // namespace detail

// Unnormalized complex DFT, X[k] = sum_n x[n] e^{-2 pi i k n / N}.
inline void forward(std::span<const Complex> in, std::span<Complex> out) {
  const std::size_t n = in.size();
  if (out.size() != n) throw ContractViolation("fft::forward: size mismatch");
  if (n == 0) return;
  auto plan = detail::get_plan(detail::Kind::forward, n);
  auto& s = detail::scratch(n);
  std::memcpy(s.in.get(), static_cast<const void*>(in.data()), n * sizeof(Complex));
  fftw_execute_dft(plan, s.in.get(), s.out.get());
  std::memcpy(static_cast<void*>(out.data()), s.out.get(), n * sizeof(Complex));
}

// Unnormalized inverse, x[n] = sum_k X[k] e^{+2 pi i k n / N}.
inline void backward(std::span<const Complex> in, std::span<Complex> out) {
  const std::size_t n = in.size();
  if (out.size() != n) throw ContractViolation("fft::backward: size mismatch");
  if (n == 0) return;
  auto plan = detail::get_plan(detail::Kind::backward, n);
  auto& s = detail::scratch(n);
  std::memcpy(s.in.get(), static_cast<const void*>(in.data()), n * sizeof(Complex));
  fftw_execute_dft(plan, s.in.get(), s.out.get());
  std::memcpy(static_cast<void*>(out.data()), s.out.get(), n * sizeof(Complex));
}

// Real input of length N to the N/2 + 1 non-negative frequency bins.
inline void rfft(std::span<const double> in, std::span<Complex> out) {
  const std::size_t n = in.size();
  if (out.size() != n / 2 + 1) throw ContractViolation("fft::rfft: output must hold N/2+1 bins");
  auto plan = detail::get_plan(detail::Kind::r2c, n);
  auto& s = detail::scratch(n);
  auto* real_in = reinterpret_cast<double*>(s.in.get());
  std::memcpy(real_in, in.data(), n * sizeof(double));
  fftw_execute_dft_r2c(plan, real_in, s.out.get());
  std::memcpy(static_cast<void*>(out.data()), s.out.get(), (n / 2 + 1) * sizeof(Complex));
}

// Hermitian half-spectrum (N/2 + 1 bins) back to N real samples, unnormalized.
// Imaginary parts of the DC and Nyquist bins are ignored.
inline void irfft(std::span<const Complex> in, std::span<double> out) {
  const std::size_t n = out.size();
  if (in.size() != n / 2 + 1) throw ContractViolation("fft::irfft: input must hold N/2+1 bins");
  auto plan = detail::get_plan(detail::Kind::c2r, n);
  auto& s = detail::scratch(n);
  std::memcpy(s.in.get(), static_cast<const void*>(in.data()), (n / 2 + 1) * sizeof(Complex));
  auto* real_out = reinterpret_cast<double*>(s.out.get());
  fftw_execute_dft_c2r(plan, s.in.get(), real_out);
  std::memcpy(static_cast<void*>(out.data()), real_out, n * sizeof(double));
}

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace footfall::fft
