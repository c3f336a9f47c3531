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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "footfall/metrics.hpp"
#include "test_support.hpp"

namespace footfall {
namespace {

RowMatrix gaussian(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double shift0 = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = normal(rng) + (j == 0 ? shift0 : 0.0);
  return m;
}

RowMatrix filled(Eigen::Index n, Eigen::Index d, double v) { return RowMatrix::Constant(n, d, v); }

TEST(MatrixSqrt, Identity) {
  const RowMatrix i = RowMatrix::Identity(4, 4);
  EXPECT_LT((matrix_sqrt_psd(i) - i).norm(), 1e-12);
}

TEST(MatrixSqrt, Diagonal) {
  RowMatrix m = RowMatrix::Zero(2, 2);
  m(0, 0) = 4.0;
  m(1, 1) = 9.0;
  const RowMatrix r = matrix_sqrt_psd(m);
  EXPECT_NEAR(r(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(r(1, 1), 3.0, 1e-12);
  EXPECT_NEAR(r(0, 1), 0.0, 1e-12);
}

TEST(MatrixSqrt, SquaringOracleOnRandomGram) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const RowMatrix a = gaussian(5, 5, seed);
    const RowMatrix m = a.transpose() * a;
    const RowMatrix r = matrix_sqrt_psd(m);
    EXPECT_LT((r * r - m).norm() / m.norm(), 1e-6);
  }
}

TEST(MatrixSqrt, AsymmetricRejected) {
  RowMatrix m = RowMatrix::Identity(3, 3);
  m(0, 2) = 0.1;
  EXPECT_THROW(matrix_sqrt_psd(m), ContractViolation);
}

TEST(MatrixSqrt, NegativeEigenvaluesClamped) {
  RowMatrix m = RowMatrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1e-12;
  const RowMatrix r = matrix_sqrt_psd(m);
  EXPECT_NEAR(r(1, 1), 0.0, 1e-15);
}

TEST(Fad, SelfDistanceIsZero) {
  const RowMatrix a = gaussian(200, 6, 1);
  EXPECT_LT(std::fabs(fad(a, a)), 1e-6);
}

TEST(Fad, SelfDistanceRankDeficientLargeScale) {
  RowMatrix a = gaussian(4, 27, 15);
  a *= 300.0;
  a.col(0).array() -= 400.0;
  EXPECT_LT(std::fabs(fad(a, a)), 1e-6);
}

TEST(Fad, PointMassClosedForm) { EXPECT_DOUBLE_EQ(fad(filled(10, 2, 0.0), filled(10, 2, 1.0)), 2.0); }

TEST(Fad, GaussianShift) {
  const double v = fad(gaussian(10000, 2, 2), gaussian(10000, 2, 3, 3.0));
  EXPECT_NEAR(v, 9.0, 0.5);
}

TEST(Fad, Symmetric) {
  const RowMatrix a = gaussian(300, 5, 4), b = gaussian(250, 5, 5, 0.7);
  EXPECT_NEAR(fad(a, b), fad(b, a), 1e-9);
}

TEST(Fad, MonotoneInMeanShift) {
  const RowMatrix a = gaussian(500, 3, 6), b = gaussian(500, 3, 7);
  Eigen::RowVectorXd v(3);
  v << 0.3, -0.2, 0.1;
  double previous = fad(a, b);
  for (int t = 1; t <= 3; ++t) {
    RowMatrix shifted = b;
    shifted.rowwise() += static_cast<double>(t) * v;
    const double now = fad(a, shifted);
    EXPECT_GT(now, previous);
    previous = now;
  }
}

TEST(Fad, TooFewRowsRejected) { EXPECT_THROW(fad(filled(1, 2, 0.0), filled(3, 2, 0.0)), ContractViolation); }

TEST(Mmd, LinearKernelConstantSets) { EXPECT_DOUBLE_EQ(mmd2(filled(7, 1, 0.0), filled(9, 1, 1.0), Kernel::linear), 1.0); }

TEST(Mmd, IdenticalDistributionsWithinPermutationNull) {
  const RowMatrix a = gaussian(500, 1, 8), b = gaussian(500, 1, 9);
  const double observed = mmd2(a, b, Kernel::rbf);
  EXPECT_LT(std::fabs(observed), 0.01);

  RowMatrix pooled(1000, 1);
  pooled << a, b;
  std::mt19937_64 rng(10);
  std::vector<Eigen::Index> order(1000);
  std::vector<double> null;
  for (int p = 0; p < 100; ++p) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    RowMatrix x(500, 1), y(500, 1);
    for (Eigen::Index i = 0; i < 500; ++i) {
      x(i, 0) = pooled(order[static_cast<std::size_t>(i)], 0);
      y(i, 0) = pooled(order[static_cast<std::size_t>(i + 500)], 0);
    }
    null.push_back(std::fabs(mmd2(x, y, Kernel::rbf)));
  }
  std::sort(null.begin(), null.end());
  EXPECT_LE(std::fabs(observed), null[98]);
}

TEST(Mmd, DetectsShift) {
  const RowMatrix a = gaussian(300, 2, 11), b = gaussian(300, 2, 12, 1.0);
  EXPECT_GT(mmd2(a, b), 0.05);
}

TEST(Mmd, InvariantUnderRelabeling) {
  const RowMatrix a = gaussian(50, 3, 13), b = gaussian(40, 3, 14, 0.5);
  RowMatrix ra = a.colwise().reverse();
  RowMatrix rb = b.colwise().reverse();
  for (Kernel k : {Kernel::rbf, Kernel::linear}) EXPECT_NEAR(mmd2(a, b, k), mmd2(ra, rb, k), 1e-12);
}

TEST(Mmd, TooFewRowsRejected) { EXPECT_THROW(mmd2(filled(1, 2, 0.0), filled(3, 2, 0.0)), ContractViolation); }

TEST(Mmd, KernelNames) {
  EXPECT_EQ(kernel_from_string("rbf"), Kernel::rbf);
  EXPECT_EQ(kernel_from_string("linear"), Kernel::linear);
  EXPECT_THROW(kernel_from_string("poly"), ConfigError);
}

TEST(MedianDistance, OddAndEvenCounts) {
  RowMatrix m(3, 1);
  m << 0.0, 1.0, 3.0;  // distances 1, 3, 2
  EXPECT_DOUBLE_EQ(median_pairwise_distance(m), 2.0);
  RowMatrix e(4, 1);
  e << 0.0, 1.0, 2.0, 10.0;  // distances 1, 2, 10, 1, 9, 8
  EXPECT_DOUBLE_EQ(median_pairwise_distance(e), 5.0);
}

AudioClip clip_of(std::vector<float> x) { return {std::move(x), 16000}; }

TEST(Embedding, ShapeAndId) {
  const auto set = embed_clips({clip_of(testing::white_noise(16000, 1, 0.1)), clip_of(testing::sine(440, 16000, 8000))});
  EXPECT_EQ(set.matrix.rows(), 2);
  EXPECT_EQ(set.matrix.cols(), 27);
  EXPECT_EQ(set.embedder, "mfcc-stats-27");
}

TEST(Embedding, IdenticalClipsIdenticalRows) {
  const auto x = testing::white_noise(8000, 3, 0.2);
  const auto set = embed_clips({clip_of(x), clip_of(x)});
  EXPECT_EQ((set.matrix.row(0) - set.matrix.row(1)).norm(), 0.0);
}

TEST(Embedding, SilentClipAtFloor) {
  const auto set = embed_clips({clip_of(std::vector<float>(8000, 0.f))});
  const double c0 = std::sqrt(128.0) * std::log(1e-5);
  EXPECT_NEAR(set.matrix(0, 0), c0, 1e-9 * std::fabs(c0));
  for (int j = 1; j < 13; ++j) EXPECT_NEAR(set.matrix(0, j), 0.0, 1e-9);
  for (int j = 13; j < 26; ++j) EXPECT_NEAR(set.matrix(0, j), 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(set.matrix(0, 26), std::log(1e-8));
}

TEST(Embedding, ShortClipsSkippedWithWarning) {
  const auto set = embed_clips({clip_of(testing::white_noise(1000, 1)), clip_of(testing::white_noise(8000, 2))});
  EXPECT_EQ(set.matrix.rows(), 1);
  ASSERT_EQ(set.warnings.size(), 1u);
}

TEST(Embedding, NoiseVersusSineSeparation) {
  const auto set = embed_clips({clip_of(testing::white_noise(16000, 21, 0.3)),
                                clip_of(testing::white_noise(16000, 22, 0.3)),
                                clip_of(testing::sine(1000, 16000, 16000, 0.3))});
  const double same = (set.matrix.row(0) - set.matrix.row(1)).norm();
  const double different = (set.matrix.row(0) - set.matrix.row(2)).norm();
  EXPECT_GT(different, 10.0 * same);
}

TEST(Report, PairsJsonAndCsv) {
  auto a = embedding_set(gaussian(40, 3, 31), "a");
  auto b = embedding_set(gaussian(40, 3, 32, 1.0), "b");
  auto c = embedding_set(gaussian(40, 3, 33), "c");
  const auto report = evaluate({a, b, c}, Kernel::rbf);
  ASSERT_EQ(report.pairs.size(), 3u);
  EXPECT_NEAR(report.find("a", "b").fad, report.find("b", "a").fad, 0.0);
  EXPECT_NEAR(report.find("a", "b").fad, fad(b, a), 1e-9);
  const auto j = to_json(report);
  EXPECT_EQ(j.at("kernel"), "rbf");
  EXPECT_EQ(j.at("pairs").size(), 3u);
  EXPECT_EQ(j.at("config_hash").get<std::string>().size(), 16u);
  const auto csv = to_csv(report);
  EXPECT_EQ(csv.rfind("set_a,set_b,fad,mmd2,embedder,kernel,config_hash\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  const auto self = evaluate({a, embedding_set(a.matrix, "a2")});
  EXPECT_LT(std::fabs(self.pairs[0].fad), 1e-6);
}

TEST(Report, MixedEmbeddersRejected) {
  auto a = embedding_set(gaussian(10, 2, 1), "a", "x");
  auto b = embedding_set(gaussian(10, 2, 2), "b", "y");
  EXPECT_THROW(evaluate({a, b}), ContractViolation);
}

}  // namespace
}  // namespace footfall
