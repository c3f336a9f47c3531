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

// Synthetic footstep corpus for desk-scale training and evaluation. Each clip
// is a train of contact bursts: a heel/roll/ball shaped amplitude envelope with
// a short decay tail, applied to noise coloured by a fixed per-surface filter,
// over a faint noise floor. Gravel and grass add sparse grains.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

#include "footfall/audio.hpp"
#include "footfall/error.hpp"
#include "footfall/random.hpp"

namespace footfall {

inline const std::vector<std::string>& desk_surfaces() {
  static const std::vector<std::string> names{"dirt", "grass", "gravel", "wood"};
  return names;
}

struct DeskCorpusSpec {
  std::size_t clips = 64;
  double seconds = 1.0;
  int sample_rate = 16000;
  std::uint64_t seed = 1;
};

namespace corpus_detail {

struct Bump {
  double centre_hz, width_hz, gain;
};

// Log-domain spectral colour per surface: a tilt plus Gaussian bumps.
inline double colour(std::size_t surface, double f) {
  static const std::array<std::vector<Bump>, 4> bumps{{
      {{350.0, 250.0, 1.0}, {1200.0, 500.0, 0.35}},
      {{3200.0, 1500.0, 0.8}, {6000.0, 1200.0, 0.5}, {700.0, 300.0, 0.15}},
      {{1000.0, 400.0, 0.7}, {2600.0, 700.0, 0.9}, {5000.0, 900.0, 0.3}},
      {{220.0, 80.0, 1.0}, {800.0, 150.0, 0.7}, {1900.0, 300.0, 0.25}},
  }};
  static const std::array<double, 4> floor{0.04, 0.08, 0.06, 0.03};
  double g = floor[surface];
  for (const auto& b : bumps[surface]) g += b.gain * std::exp(-0.5 * std::pow((f - b.centre_hz) / b.width_hz, 2.0));
  return g;
}

// Linear-phase FIR by frequency sampling of the colour, Hann-windowed.
inline std::vector<double> colour_filter(std::size_t surface, int rate, std::size_t taps = 255) {
  const std::size_t n_fft = 512;
  std::vector<double> h(taps, 0.0);
  const auto centre = static_cast<double>(taps - 1) / 2.0;
  for (std::size_t n = 0; n < taps; ++n) {
    const double d = static_cast<double>(n) - centre;
    double acc = colour(surface, 0.0);
    for (std::size_t k = 1; k < n_fft / 2; ++k)
      acc += 2.0 * colour(surface, static_cast<double>(k) * rate / n_fft) *
             std::cos(2.0 * std::numbers::pi * static_cast<double>(k) * d / n_fft);
    acc += colour(surface, rate / 2.0) * std::cos(std::numbers::pi * d);
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(taps - 1));
    h[n] = w * acc / static_cast<double>(n_fft);
  }
  return h;
}

inline double contact_shape(double phase, double heel, double valley, double ball) {
  if (phase < 0.25) {
    const double s = phase / 0.25;
    return heel * (1.0 - (1.0 - s) * (1.0 - s));
  }
  if (phase < 0.7) {
    const double s = (phase - 0.25) / 0.45;
    return heel * 2.0 * (s - 0.5) * (s - 1.0) - valley * 4.0 * s * (s - 1.0) + ball * 2.0 * s * (s - 0.5);
  }
  const double s = (phase - 0.7) / 0.3;
  return ball * (1.0 - s * s);
}

}  // namespace corpus_detail

// One clip of the given surface; everything random is keyed by seed.
inline AudioClip desk_clip(std::size_t surface, std::uint64_t seed, double seconds = 1.0, int rate = 16000) {
  if (surface >= desk_surfaces().size()) throw ContractViolation("desk_clip: surface index out of range");
  const auto length = static_cast<std::size_t>(std::llround(seconds * rate));
  CounterRng rng(derive_key(seed, 0x636c));
  const double period = rng.uniform(0.4, 0.65);
  const double contact = rng.uniform(0.55, 0.8) * period;
  const double tail = rng.uniform(0.015, 0.04);
  double onset = -rng.uniform(0.0, period);

  std::vector<double> env(length, 0.0);
  while (onset < seconds) {
    const double level = rng.uniform(0.6, 1.0);
    const double heel = rng.uniform(0.75, 1.0), valley = rng.uniform(0.3, 0.65), ball = rng.uniform(0.6, 1.0);
    const double this_contact = contact * rng.uniform(0.9, 1.1);
    for (std::size_t i = 0; i < length; ++i) {
      const double t = static_cast<double>(i) / rate - onset;
      if (t >= 0.0 && t < this_contact)
        env[i] = std::max(env[i], level * corpus_detail::contact_shape(t / this_contact, heel, valley, ball));
    }
    onset += period * rng.uniform(0.92, 1.08);
  }
  // Exponential release after every contact.
  const double release = std::exp(-1.0 / (tail * rate));
  for (std::size_t i = 1; i < length; ++i) env[i] = std::max(env[i], env[i - 1] * release);

  const std::uint64_t noise_key = derive_key(seed, 0x6e6f);
  const auto h = corpus_detail::colour_filter(surface, rate);
  const std::size_t pad = h.size() - 1;
  std::vector<double> noise(length + pad);
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = CounterRng::symmetric_at(noise_key, i);

  const bool grainy = surface == 1 || surface == 2;
  const std::uint64_t grain_key = derive_key(seed, 0x6772);
  AudioClip clip{std::vector<float>(length), rate};
  std::vector<double> grains(length, 0.0);
  if (grainy) {
    const double density = surface == 2 ? 0.004 : 0.0015;
    for (std::size_t i = 0; i < length; ++i) {
      if (CounterRng::unit_at(grain_key, 2 * i) < density * env[i]) {
        const double amp = 0.8 * CounterRng::symmetric_at(grain_key, 2 * i + 1);
        for (std::size_t j = 0; j < 48 && i + j < length; ++j) grains[i + j] += amp * std::exp(-static_cast<double>(j) / 8.0);
      }
    }
  }
  const std::uint64_t floor_key = derive_key(seed, 0x666c);
  for (std::size_t i = 0; i < length; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) acc += h[j] * noise[i + pad - j];
    const double v = env[i] * (acc + grains[i]) + 1e-3 * CounterRng::symmetric_at(floor_key, i);
    clip.samples[i] = static_cast<float>(v);
  }
  const double top = peak(clip.samples);
  if (top > 0.0)
    for (auto& v : clip.samples) v = static_cast<float>(0.9 * v / top);
  return clip;
}

struct LabeledClip {
  AudioClip clip;
  std::size_t label = 0;
};

// Clip i uses surface i mod 4, so the label vocabulary appears in desk_surfaces() order.
inline std::vector<LabeledClip> desk_corpus(const DeskCorpusSpec& spec) {
  std::vector<LabeledClip> out;
  out.reserve(spec.clips);
  const std::size_t n_surfaces = desk_surfaces().size();
  for (std::size_t i = 0; i < spec.clips; ++i)
    out.push_back({desk_clip(i % n_surfaces, derive_key(spec.seed, i), spec.seconds, spec.sample_rate), i % n_surfaces});
  return out;
}

// Writes clip_NNNN.wav files and a manifest.jsonl into dir; returns the manifest path.
inline std::filesystem::path write_desk_corpus(const std::filesystem::path& dir, const DeskCorpusSpec& spec) {
  std::filesystem::create_directories(dir);
  const auto manifest_path = dir / "manifest.jsonl";
  std::ofstream manifest(manifest_path);
  if (!manifest) throw Error("cannot write " + manifest_path.string());
  const auto clips = desk_corpus(spec);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%04zu.wav", i);
    write_wav(dir / name, clips[i].clip);
    manifest << nlohmann::json{{"path", name}, {"label", desk_surfaces()[clips[i].label]}}.dump() << '\n';
  }
  return manifest_path;
}

}  // namespace footfall
