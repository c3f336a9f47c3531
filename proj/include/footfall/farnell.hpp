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

// Procedural footstep baseline: a piecewise-quadratic ground reaction force
// (GRF) curve generator and per-surface noise texture recipes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "footfall/audio.hpp"
#include "footfall/dsp.hpp"
#include "footfall/error.hpp"
#include "footfall/random.hpp"

namespace footfall {

// One step cycle: heel strike, roll from heel to ball, ball push-off.
// levels = (start, heel peak, valley, ball peak, end).
struct GRFParams {
  double step_period = 0.5;
  std::array<double, 3> segment_fractions{0.3, 0.4, 0.3};
  std::array<double, 5> levels{0.0, 1.0, 0.6, 0.9, 0.0};
  double jitter = 0.0;

  void validate() const {
    if (!(step_period > 0.0) || !std::isfinite(step_period)) throw ContractViolation("grf: step_period must be > 0");
    double total = 0.0;
    for (double f : segment_fractions) {
      if (!(f > 0.0)) throw ContractViolation("grf: segment fractions must be positive");
      total += f;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw ContractViolation("grf: segment fractions must sum to 1");
    for (double l : levels)
      if (!(l >= 0.0) || !std::isfinite(l)) throw ContractViolation("grf: levels must be finite and >= 0");
    if (levels[0] != 0.0 || levels[4] != 0.0) throw ContractViolation("grf: start and end levels must be 0");
    if (!(jitter >= 0.0 && jitter <= 0.2)) throw ContractViolation("grf: jitter must lie in [0, 0.2]");
  }

  double max_level() const { return *std::max_element(levels.begin(), levels.end()); }
};

inline nlohmann::json to_json(const GRFParams& p) {
  return {{"period", p.step_period},
          {"fractions", p.segment_fractions},
          {"levels", p.levels},
          {"jitter", p.jitter}};
}

// Missing keys keep their defaults.
inline GRFParams grf_params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("grf: expected an object");
  GRFParams p;
  try {
    if (j.contains("period")) p.step_period = j.at("period").get<double>();
    if (j.contains("fractions")) p.segment_fractions = j.at("fractions").get<std::array<double, 3>>();
    if (j.contains("levels")) p.levels = j.at("levels").get<std::array<double, 5>>();
    if (j.contains("jitter")) p.jitter = j.at("jitter").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("grf: ") + e.what());
  }
  return p;
}

// Value of segment 0 (heel), 1 (roll) or 2 (ball) at local position s in [0, 1].
// Heel rises to its peak with zero slope there, the roll passes through the
// valley at its midpoint, and the ball falls from its peak with zero initial slope.
inline double grf_segment(const GRFParams& p, int segment, double s) {
  const auto& l = p.levels;
  switch (segment) {
    case 0:
      return l[0] + (l[1] - l[0]) * (1.0 - (1.0 - s) * (1.0 - s));
    case 1:
      return l[1] * 2.0 * (s - 0.5) * (s - 1.0) - l[2] * 4.0 * s * (s - 1.0) + l[3] * 2.0 * s * (s - 0.5);
    case 2:
      return l[4] + (l[3] - l[4]) * (1.0 - s * s);
    default:
      throw ContractViolation("grf: segment index out of range");
  }
}

// Curve value at phase in [0, 1] of one period.
inline double grf_shape(const GRFParams& p, double phase) {
  const auto& f = p.segment_fractions;
  double v;
  if (phase <= f[0])
    v = grf_segment(p, 0, phase / f[0]);
  else if (phase <= f[0] + f[1])
    v = grf_segment(p, 1, (phase - f[0]) / f[1]);
  else
    v = grf_segment(p, 2, std::clamp(1.0 - (1.0 - phase) / f[2], 0.0, 1.0));
  return std::clamp(v, 0.0, p.max_level());
}

// Samples K = round(duration * control_rate) frames. Each period spans
// P = round(period * control_rate) frames whose phases run from 0 to 1
// inclusive, so both edge frames of every period sit at the zero boundary.
inline ControlSignal grf_curve(const GRFParams& p, double duration, double control_rate = 250.0,
                               std::uint64_t seed = 0) {
  p.validate();
  if (!(duration > 0.0)) throw ContractViolation("grf: duration must be > 0");
  if (!(control_rate > 0.0)) throw ContractViolation("grf: control_rate must be > 0");
  const auto frames = static_cast<std::size_t>(std::llround(duration * control_rate));
  ControlSignal out(control_rate, 1, frames);
  const std::uint64_t key = derive_key(seed, 0x6772);
  std::size_t k = 0;
  for (std::uint64_t period = 0; k < frames; ++period) {
    const double scale = 1.0 + p.jitter * CounterRng::symmetric_at(key, period);
    const auto len = std::max<long long>(3, std::llround(p.step_period * scale * control_rate));
    for (long long j = 0; j < len && k < frames; ++j, ++k)
      out.values[k] = grf_shape(p, static_cast<double>(j) / static_cast<double>(len - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Surface recipes

struct Resonance {
  double frequency = 1000.0;
  double q = 2.0;
  double gain_db = 6.0;
};

struct Crackle {
  double threshold = 0.3;
  double exponent = 2.0;
  double mix = 0.5;
};

struct SurfaceRecipe {
  std::string name;
  std::array<double, 2> band_edges{100.0, 4000.0};
  std::vector<Resonance> resonances;
  std::optional<Crackle> crackle;
  double gain = 1.0;

  void validate(int sample_rate = 16000) const {
    const double nyquist = sample_rate / 2.0;
    if (name.empty()) throw ConfigError("recipe: missing name");
    if (!(band_edges[0] > 0.0 && band_edges[0] < band_edges[1] && band_edges[1] < nyquist))
      throw ConfigError("recipe " + name + ": band edges must satisfy 0 < lo < hi < fs/2");
    for (const auto& r : resonances)
      if (!(r.frequency > 0.0 && r.frequency < nyquist && r.q > 0.0))
        throw ConfigError("recipe " + name + ": resonance outside (0, fs/2) or non-positive q");
    if (crackle && !(crackle->exponent > 0.0 && crackle->mix >= 0.0 && crackle->mix <= 1.0))
      throw ConfigError("recipe " + name + ": crackle needs exponent > 0 and mix in [0, 1]");
    if (!(gain > 0.0)) throw ConfigError("recipe " + name + ": gain must be positive");
  }
};

inline nlohmann::json to_json(const SurfaceRecipe& r) {
  nlohmann::json res = nlohmann::json::array();
  for (const auto& x : r.resonances) res.push_back({{"frequency", x.frequency}, {"q", x.q}, {"gain_db", x.gain_db}});
  nlohmann::json j = {{"name", r.name}, {"band_edges", r.band_edges}, {"resonances", res}, {"gain", r.gain}};
  j["crackle"] = r.crackle ? nlohmann::json{{"threshold", r.crackle->threshold},
                                            {"exponent", r.crackle->exponent},
                                            {"mix", r.crackle->mix}}
                           : nlohmann::json(nullptr);
  return j;
}

inline SurfaceRecipe surface_recipe_from_json(const nlohmann::json& j) {
  SurfaceRecipe r;
  try {
    r.name = j.at("name").get<std::string>();
    r.band_edges = j.at("band_edges").get<std::array<double, 2>>();
    for (const auto& x : j.value("resonances", nlohmann::json::array()))
      r.resonances.push_back({x.at("frequency").get<double>(), x.at("q").get<double>(), x.at("gain_db").get<double>()});
    if (j.contains("crackle") && !j.at("crackle").is_null()) {
      const auto& c = j.at("crackle");
      r.crackle = Crackle{c.at("threshold").get<double>(), c.at("exponent").get<double>(), c.value("mix", 0.5)};
    }
    r.gain = j.value("gain", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("recipe: ") + e.what());
  }
  r.validate();
  return r;
}

// Recipe file: {"recipes": [recipe, ...]}.
inline std::vector<SurfaceRecipe> load_recipes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open recipe file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("recipe file " + path.string() + ": " + e.what());
  }
  std::vector<SurfaceRecipe> out;
  for (const auto& r : j.at("recipes")) out.push_back(surface_recipe_from_json(r));
  if (out.empty()) throw ConfigError("recipe file " + path.string() + " lists no recipes");
  return out;
}

inline const SurfaceRecipe& find_recipe(const std::vector<SurfaceRecipe>& recipes, const std::string& name) {
  for (const auto& r : recipes)
    if (r.name == name) return r;
  throw VocabularyError("unknown surface '" + name + "'");
}

// Second-order IIR section, transposed direct form II.
class Biquad {
 public:
  Biquad(double b0, double b1, double b2, double a0, double a1, double a2)
      : b0_(b0 / a0), b1_(b1 / a0), b2_(b2 / a0), a1_(a1 / a0), a2_(a2 / a0) {}

  static Biquad lowpass(double f, double q, double fs) {
    const double w = 2.0 * std::numbers::pi * f / fs, c = std::cos(w), alpha = std::sin(w) / (2.0 * q);
    return {(1 - c) / 2, 1 - c, (1 - c) / 2, 1 + alpha, -2 * c, 1 - alpha};
  }
  static Biquad highpass(double f, double q, double fs) {
    const double w = 2.0 * std::numbers::pi * f / fs, c = std::cos(w), alpha = std::sin(w) / (2.0 * q);
    return {(1 + c) / 2, -(1 + c), (1 + c) / 2, 1 + alpha, -2 * c, 1 - alpha};
  }
  static Biquad peaking(double f, double q, double gain_db, double fs) {
    const double a = std::pow(10.0, gain_db / 40.0);
    const double w = 2.0 * std::numbers::pi * f / fs, c = std::cos(w), alpha = std::sin(w) / (2.0 * q);
    return {1 + alpha * a, -2 * c, 1 - alpha * a, 1 + alpha / a, -2 * c, 1 - alpha / a};
  }

  double operator()(double x) {
    const double y = b0_ * x + s1_;
    s1_ = b1_ * x - a1_ * y + s2_;
    s2_ = b2_ * x - a2_ * y;
    return y;
  }

 private:
  double b0_, b1_, b2_, a1_, a2_;
  double s1_ = 0.0, s2_ = 0.0;
};

// Linear interpolation of a control signal between frame centres onto the
// sample grid; holds the first and last frame values at the edges.
inline std::vector<double> upsample_control(const ControlSignal& gamma, std::size_t hop, std::size_t dim = 0) {
  const std::size_t frames = gamma.frames();
  std::vector<double> out(frames * hop);
  if (frames == 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double pos = (static_cast<double>(i) + 0.5) / static_cast<double>(hop) - 0.5;
    if (pos <= 0.0) {
      out[i] = gamma.at(0, dim);
    } else if (pos >= static_cast<double>(frames - 1)) {
      out[i] = gamma.at(frames - 1, dim);
    } else {
      const auto k = static_cast<std::size_t>(pos);
      const double a = pos - static_cast<double>(k);
      out[i] = (1.0 - a) * gamma.at(k, dim) + a * gamma.at(k + 1, dim);
    }
  }
  return out;
}

// Uniform noise through the recipe's band-pass and resonances, amplitude
// modulated by gamma, then the optional crackle stage.
inline AudioClip pa_synthesize(const SurfaceRecipe& recipe, const ControlSignal& gamma, std::uint64_t seed,
                               int sample_rate = 16000) {
  recipe.validate(sample_rate);
  const double rate = gamma.control_rate;
  if (!(rate > 0.0) || std::fmod(sample_rate, rate) != 0.0)
    throw ContractViolation("pa_synthesize: sample rate must be a multiple of the control rate");
  for (double v : gamma.values)
    if (!std::isfinite(v)) throw ContractViolation("pa_synthesize: non-finite gamma");
  const auto hop = static_cast<std::size_t>(sample_rate / rate);
  const auto env = upsample_control(gamma, hop);
  const double fs = sample_rate;
  const double q = std::numbers::sqrt2 / 2.0;
  std::vector<Biquad> chain{Biquad::highpass(recipe.band_edges[0], q, fs), Biquad::highpass(recipe.band_edges[0], q, fs),
                            Biquad::lowpass(recipe.band_edges[1], q, fs), Biquad::lowpass(recipe.band_edges[1], q, fs)};
  for (const auto& r : recipe.resonances) chain.push_back(Biquad::peaking(r.frequency, r.q, r.gain_db, fs));
  const std::uint64_t key = derive_key(seed, 0x7061);
  AudioClip out{std::vector<float>(env.size()), sample_rate};
  for (std::size_t i = 0; i < env.size(); ++i) {
    double x = CounterRng::symmetric_at(key, i);
    for (auto& section : chain) x = section(x);
    double y = recipe.gain * env[i] * x;
    if (recipe.crackle) {
      const auto& c = *recipe.crackle;
      const double grain = std::pow(std::max(y - c.threshold, 0.0), c.exponent);
      y = (1.0 - c.mix) * y + c.mix * grain;
    }
    out.samples[i] = static_cast<float>(y);
  }
  return out;
}

}  // namespace footfall
