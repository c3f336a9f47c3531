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


#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "footfall/audio.hpp"
#include "footfall/farnell.hpp"
#include "test_support.hpp"

namespace footfall {
namespace {

std::vector<SurfaceRecipe> shipped() { return load_recipes(std::string(FOOTFALL_DATA_DIR) + "/recipes.json"); }

ControlSignal constant_gamma(std::size_t frames, double v) {
  ControlSignal g(250.0, 1, frames);
  for (auto& x : g.values) x = v;
  return g;
}

// Fraction of signal energy in [lo, hi] Hz, averaged periodogram over
// 1024-sample segments computed with the naive DFT.
double band_energy_fraction(const std::vector<float>& x, double lo, double hi, int rate) {
  const std::size_t n = 1024;
  std::vector<double> power(n / 2 + 1, 0.0);
  for (std::size_t start = 0; start + n <= x.size(); start += n) {
    std::vector<double> seg(x.begin() + static_cast<long>(start), x.begin() + static_cast<long>(start + n));
    const auto spec = testing::naive_dft(seg);
    for (std::size_t k = 0; k <= n / 2; ++k) power[k] += std::norm(spec[k]);
  }
  double in = 0.0, total = 0.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * rate / static_cast<double>(n);
    total += power[k];
    if (f >= lo && f <= hi) in += power[k];
  }
  return in / total;
}

TEST(GrfCurve, ExactPeriodicityWithoutJitter) {
  const GRFParams p;
  const auto g = grf_curve(p, 3.0, 250.0, 5);
  ASSERT_EQ(g.frames(), 750u);
  const std::size_t period = 125;
  for (std::size_t k = 0; k + period < g.frames(); ++k) EXPECT_NEAR(g.values[k + period], g.values[k], 1e-9);
}

TEST(GrfCurve, BoundariesAreZero) {
  const auto g = grf_curve(GRFParams{}, 1.0);
  ASSERT_EQ(g.frames(), 250u);
  EXPECT_EQ(g.values.front(), 0.0);
  EXPECT_EQ(g.values[124], 0.0);
  EXPECT_EQ(g.values[125], 0.0);
  EXPECT_EQ(g.values.back(), 0.0);
}

TEST(GrfCurve, TwoLocalMaximaPerPeriod) {
  const auto g = grf_curve(GRFParams{}, 2.0);
  const std::size_t period = 125;
  for (std::size_t start = 0; start + period <= g.frames(); start += period) {
    int maxima = 0;
    for (std::size_t k = start + 1; k + 1 < start + period; ++k)
      if (g.values[k] > g.values[k - 1] && g.values[k] >= g.values[k + 1]) ++maxima;
    EXPECT_EQ(maxima, 2) << "period starting at frame " << start;
  }
}

TEST(GrfCurve, SegmentJoinsAreContinuous) {
  const GRFParams p;
  EXPECT_DOUBLE_EQ(grf_segment(p, 0, 0.0), p.levels[0]);
  EXPECT_DOUBLE_EQ(grf_segment(p, 0, 1.0), grf_segment(p, 1, 0.0));
  EXPECT_DOUBLE_EQ(grf_segment(p, 1, 0.5), p.levels[2]);
  EXPECT_DOUBLE_EQ(grf_segment(p, 1, 1.0), grf_segment(p, 2, 0.0));
  EXPECT_DOUBLE_EQ(grf_segment(p, 2, 1.0), p.levels[4]);
  const double join0 = p.segment_fractions[0], join1 = join0 + p.segment_fractions[1];
  EXPECT_NEAR(grf_shape(p, join0 - 1e-12), grf_shape(p, join0 + 1e-12), 1e-9);
  EXPECT_NEAR(grf_shape(p, join1 - 1e-12), grf_shape(p, join1 + 1e-12), 1e-9);
}

TEST(GrfCurve, NonNegativeAndBounded) {
  GRFParams p;
  p.jitter = 0.2;
  p.levels = {0.0, 0.4, 0.05, 1.3, 0.0};
  p.segment_fractions = {0.2, 0.5, 0.3};
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto g = grf_curve(p, 4.0, 250.0, seed);
    for (double v : g.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.3);
    }
  }
}

TEST(GrfCurve, JitterIsSeeded) {
  GRFParams p;
  p.jitter = 0.1;
  EXPECT_EQ(grf_curve(p, 2.0, 250.0, 1).values, grf_curve(p, 2.0, 250.0, 1).values);
  EXPECT_NE(grf_curve(p, 2.0, 250.0, 1).values, grf_curve(p, 2.0, 250.0, 2).values);
}

TEST(GrfCurve, DurationSetsFrameCount) { EXPECT_EQ(grf_curve(GRFParams{}, 2.0, 250.0, 7).frames(), 500u); }

TEST(GrfParams, ValidationRejectsBadInput) {
  GRFParams p;
  p.segment_fractions = {0.3, 0.3, 0.3};
  EXPECT_THROW(p.validate(), ContractViolation);
  p = GRFParams{};
  p.levels[0] = 0.1;
  EXPECT_THROW(p.validate(), ContractViolation);
  p = GRFParams{};
  p.jitter = 0.3;
  EXPECT_THROW(p.validate(), ContractViolation);
  p = GRFParams{};
  p.levels[2] = -0.1;
  EXPECT_THROW(p.validate(), ContractViolation);
  EXPECT_THROW(grf_curve(GRFParams{}, 0.0), ContractViolation);
}

TEST(GrfParams, JsonRoundTrip) {
  GRFParams p;
  p.step_period = 0.6;
  p.jitter = 0.05;
  const auto back = grf_params_from_json(to_json(p));
  EXPECT_EQ(back.step_period, 0.6);
  EXPECT_EQ(back.jitter, 0.05);
  EXPECT_EQ(back.levels, p.levels);
  EXPECT_THROW(grf_params_from_json(nlohmann::json::array()), FormatError);
}

TEST(Recipes, ShippedFileLoads) {
  const auto recipes = shipped();
  ASSERT_EQ(recipes.size(), 4u);
  for (const char* name : {"dirt", "grass", "gravel", "wood"}) EXPECT_NO_THROW(find_recipe(recipes, name));
  EXPECT_THROW(find_recipe(recipes, "snow"), VocabularyError);
}

TEST(Recipes, InvalidBandEdgesRejected) {
  auto j = to_json(shipped()[0]);
  j["band_edges"] = {100.0, 9000.0};
  EXPECT_THROW(surface_recipe_from_json(j), ConfigError);
}

TEST(PaSynthesize, ZeroGammaIsSilent) {
  for (const auto& r : shipped()) {
    const auto out = pa_synthesize(r, constant_gamma(250, 0.0), 3);
    ASSERT_EQ(out.samples.size(), 16000u);
    for (float s : out.samples) ASSERT_EQ(s, 0.0f) << r.name;
  }
}

TEST(PaSynthesize, RmsScalesWithGammaForLinearRecipes) {
  const auto g = grf_curve(GRFParams{}, 1.0);
  auto g2 = g;
  for (auto& v : g2.values) v *= 2.0;
  for (const auto& r : shipped()) {
    if (r.crackle) continue;
    const double a = rms(pa_synthesize(r, g, 4).samples), b = rms(pa_synthesize(r, g2, 4).samples);
    EXPECT_NEAR(b / a, 2.0, 0.1) << r.name;
  }
}

TEST(PaSynthesize, Deterministic) {
  const auto g = grf_curve(GRFParams{}, 1.0);
  for (const auto& r : shipped()) {
    EXPECT_EQ(pa_synthesize(r, g, 11).samples, pa_synthesize(r, g, 11).samples);
    EXPECT_NE(pa_synthesize(r, g, 11).samples, pa_synthesize(r, g, 12).samples);
  }
}

TEST(PaSynthesize, EnergyInPassbandForLinearRecipes) {
  for (const auto& r : shipped()) {
    if (r.crackle) continue;
    const auto out = pa_synthesize(r, constant_gamma(250, 1.0), 2);
    EXPECT_GE(band_energy_fraction(out.samples, r.band_edges[0], r.band_edges[1], 16000), 0.8) << r.name;
  }
}

TEST(PaSynthesize, LengthFollowsControlFrames) {
  const auto r = shipped()[0];
  EXPECT_EQ(pa_synthesize(r, constant_gamma(37, 0.5), 1).samples.size(), 37u * 64u);
  ControlSignal bad = constant_gamma(10, 1.0);
  bad.values[3] = std::nan("");
  EXPECT_THROW(pa_synthesize(r, bad, 1), ContractViolation);
}

TEST(UpsampleControl, InterpolatesBetweenFrameCentres) {
  ControlSignal g(250.0, 1, 2);
  g.values = {0.0, 1.0};
  const auto up = upsample_control(g, 4);
  ASSERT_EQ(up.size(), 8u);
  EXPECT_DOUBLE_EQ(up[0], 0.0);
  EXPECT_DOUBLE_EQ(up[1], 0.0);
  EXPECT_DOUBLE_EQ(up[2], 0.125);
  EXPECT_DOUBLE_EQ(up[5], 0.875);
  EXPECT_DOUBLE_EQ(up[7], 1.0);
}

}  // namespace
}  // namespace footfall
