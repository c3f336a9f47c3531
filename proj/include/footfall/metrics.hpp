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

// Distribution distances between sets of clips: Frechet distance between
// Gaussians fitted to clip embeddings, and the unbiased squared maximum mean
// discrepancy.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "footfall/audio.hpp"
#include "footfall/dsp.hpp"
#include "footfall/error.hpp"
#include "footfall/hash.hpp"

namespace footfall {

struct EmbeddingSet {
  RowMatrix matrix;  // clips x dims
  std::string embedder;
  std::string name;
  std::vector<std::string> warnings;

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
};

struct EmbedderConfig {
  MfccConfig mfcc;
  double min_seconds = 0.25;
  double rms_floor = 1e-8;

  std::string id() const { return "mfcc-stats-" + std::to_string(mfcc.n_coeffs * 2 + 1); }
};

// Row per clip: MFCC means, MFCC standard deviations, log RMS.
inline std::vector<double> embed_clip(const AudioClip& clip, const MfccExtractor& mfcc, const EmbedderConfig& cfg) {
  const RowMatrix m = mfcc(clip.samples);
  const auto c = static_cast<std::size_t>(m.cols());
  std::vector<double> row(2 * c + 1);
  const double n = static_cast<double>(m.rows());
  for (std::size_t j = 0; j < c; ++j) {
    const auto col = m.col(static_cast<Eigen::Index>(j));
    const double mean = col.sum() / n;
    row[j] = mean;
    row[c + j] = std::sqrt((col.array() - mean).square().sum() / n);
  }
  row[2 * c] = std::log(std::max(rms(clip.samples), cfg.rms_floor));
  return row;
}

// Clips shorter than cfg.min_seconds are skipped with a warning.
inline EmbeddingSet embed_clips(const std::vector<AudioClip>& clips, std::string name = {},
                                const EmbedderConfig& cfg = {}) {
  const MfccExtractor mfcc(cfg.mfcc);
  EmbeddingSet set;
  set.name = std::move(name);
  set.embedder = cfg.id();
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto& clip = clips[i];
    if (clip.sample_rate != cfg.mfcc.sample_rate)
      throw ContractViolation("embed_clips: clip rate " + std::to_string(clip.sample_rate) + " != " +
                              std::to_string(cfg.mfcc.sample_rate));
    if (clip.duration() < cfg.min_seconds) {
      set.warnings.push_back("clip " + std::to_string(i) + " shorter than " + std::to_string(cfg.min_seconds) +
                             " s; skipped");
      continue;
    }
    rows.push_back(embed_clip(clip, mfcc, cfg));
  }
  const auto dims = static_cast<Eigen::Index>(2 * cfg.mfcc.n_coeffs + 1);
  set.matrix.resize(static_cast<Eigen::Index>(rows.size()), dims);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (Eigen::Index c = 0; c < dims; ++c) set.matrix(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  return set;
}

inline EmbeddingSet embedding_set(RowMatrix m, std::string name = {}, std::string embedder = "raw") {
  EmbeddingSet s;
  s.matrix = std::move(m);
  s.name = std::move(name);
  s.embedder = std::move(embedder);
  return s;
}

// Square root of a symmetric positive semi-definite matrix. Eigenvalues that
// are negative or below dims * epsilon * the largest magnitude are rounding
// noise and are set to zero.
inline RowMatrix matrix_sqrt_psd(const RowMatrix& m, double symmetry_tolerance = 1e-8) {
  if (m.rows() != m.cols()) throw ContractViolation("matrix_sqrt_psd: matrix is not square");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (asym > symmetry_tolerance * scale)
    throw ContractViolation("matrix_sqrt_psd: matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("matrix_sqrt_psd: eigendecomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double noise = static_cast<double>(m.rows()) * std::numeric_limits<double>::epsilon() *
                       (lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0);
  const Eigen::VectorXd root = lambda.unaryExpr([noise](double l) { return l > noise ? std::sqrt(l) : 0.0; });
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

namespace metrics_detail {

struct Moments {
  Eigen::RowVectorXd mean;
  RowMatrix cov;
};

// Sample mean and unbiased covariance.
inline Moments moments(const RowMatrix& x) {
  Moments m;
  m.mean = x.colwise().mean();
  const RowMatrix centred = x.rowwise() - m.mean;
  m.cov = centred.transpose() * centred / static_cast<double>(x.rows() - 1);
  return m;
}

// Tr((A B)^{1/2}) as Tr((A^{1/2} B A^{1/2})^{1/2}).
inline double trace_sqrt_product(const RowMatrix& a, const RowMatrix& b) {
  const RowMatrix ra = matrix_sqrt_psd(a);
  RowMatrix inner = ra * b * ra;
  inner = 0.5 * (inner + inner.transpose()).eval();
  return matrix_sqrt_psd(inner).trace();
}

inline std::string eigen_range(const RowMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  char buf[96];
  std::snprintf(buf, sizeof(buf), "eigenvalues in [%.3g, %.3g]", eig.eigenvalues().minCoeff(),
                eig.eigenvalues().maxCoeff());
  return buf;
}

}  // namespace metrics_detail

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}). The cross term is the
// mean of both orderings so that fad(a, b) == fad(b, a).
inline double fad(const RowMatrix& a, const RowMatrix& b) {
  if (a.rows() < 2 || b.rows() < 2) throw ContractViolation("fad: each set needs at least 2 rows");
  if (a.cols() != b.cols()) throw ContractViolation("fad: embedding dimensions differ");
  const auto ma = metrics_detail::moments(a), mb = metrics_detail::moments(b);
  const double cross =
      0.5 * (metrics_detail::trace_sqrt_product(ma.cov, mb.cov) + metrics_detail::trace_sqrt_product(mb.cov, ma.cov));
  const double value = (ma.mean - mb.mean).squaredNorm() + ma.cov.trace() + mb.cov.trace() - 2.0 * cross;
  if (!std::isfinite(value))
    throw NumericalError("fad: non-finite result; covariance A " + metrics_detail::eigen_range(ma.cov) +
                         ", covariance B " + metrics_detail::eigen_range(mb.cov));
  return value;
}

inline double fad(const EmbeddingSet& a, const EmbeddingSet& b) { return fad(a.matrix, b.matrix); }

enum class Kernel { rbf, linear };

inline std::string to_string(Kernel k) { return k == Kernel::rbf ? "rbf" : "linear"; }

inline Kernel kernel_from_string(const std::string& s) {
  if (s == "rbf") return Kernel::rbf;
  if (s == "linear") return Kernel::linear;
  throw ConfigError("unknown kernel '" + s + "' (expected rbf or linear)");
}

// Median Euclidean distance over all distinct pairs of the pooled rows.
inline double median_pairwise_distance(const RowMatrix& pooled) {
  const Eigen::Index n = pooled.rows();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((pooled.row(i) - pooled.row(j)).norm());
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
  return med;
}

// Unbiased U-statistic estimate of MMD^2. The rbf kernel is
// exp(-|x - y|^2 / (2 sigma^2)) with sigma the pooled median distance.
inline double mmd2(const RowMatrix& a, const RowMatrix& b, Kernel kernel = Kernel::rbf) {
  if (a.rows() < 2 || b.rows() < 2) throw ContractViolation("mmd2: each set needs at least 2 rows");
  if (a.cols() != b.cols()) throw ContractViolation("mmd2: embedding dimensions differ");
  const RowMatrix gaa = a * a.transpose(), gbb = b * b.transpose(), gab = a * b.transpose();
  const Eigen::VectorXd na = gaa.diagonal(), nb = gbb.diagonal();
  double gamma = 0.0;
  if (kernel == Kernel::rbf) {
    RowMatrix pooled(a.rows() + b.rows(), a.cols());
    pooled << a, b;
    const double sigma = median_pairwise_distance(pooled);
    gamma = sigma > 0.0 ? 1.0 / (2.0 * sigma * sigma) : 0.0;
  }
  auto k = [&](double dot, double n1, double n2) {
    return kernel == Kernel::linear ? dot : std::exp(-gamma * std::max(n1 + n2 - 2.0 * dot, 0.0));
  };
  const auto m = a.rows(), n = b.rows();
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) saa += k(gaa(i, j), na[i], na[j]);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) sbb += k(gbb(i, j), nb[i], nb[j]);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sab += k(gab(i, j), na[i], nb[j]);
  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  return saa / (dm * (dm - 1.0)) + sbb / (dn * (dn - 1.0)) - 2.0 * sab / (dm * dn);
}

inline double mmd2(const EmbeddingSet& a, const EmbeddingSet& b, Kernel kernel = Kernel::rbf) {
  return mmd2(a.matrix, b.matrix, kernel);
}

// ---------------------------------------------------------------------------
// Reports

struct PairScore {
  std::string a, b;
  double fad = 0.0;
  double mmd2 = 0.0;
};

struct EvalReport {
  std::string embedder;
  Kernel kernel = Kernel::rbf;
  std::vector<std::string> sets;
  std::vector<std::size_t> sizes;
  std::vector<PairScore> pairs;
  std::string config_hash;

  const PairScore& find(const std::string& a, const std::string& b) const {
    for (const auto& p : pairs)
      if ((p.a == a && p.b == b) || (p.a == b && p.b == a)) return p;
    throw ContractViolation("report has no pair " + a + " / " + b);
  }
};

// Every unordered pair of distinct sets, in input order.
inline EvalReport evaluate(const std::vector<EmbeddingSet>& sets, Kernel kernel = Kernel::rbf) {
  EvalReport r;
  r.kernel = kernel;
  r.embedder = sets.empty() ? "" : sets.front().embedder;
  for (const auto& s : sets) {
    if (s.embedder != r.embedder) throw ContractViolation("evaluate: sets use different embedders");
    r.sets.push_back(s.name);
    r.sizes.push_back(s.size());
  }
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j)
      r.pairs.push_back({sets[i].name, sets[j].name, fad(sets[i], sets[j]), mmd2(sets[i], sets[j], kernel)});
  r.config_hash = config_hash({{"embedder", r.embedder}, {"kernel", to_string(kernel)}, {"sets", r.sets}, {"sizes", r.sizes}});
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : r.pairs) pairs.push_back({{"a", p.a}, {"b", p.b}, {"fad", p.fad}, {"mmd2", p.mmd2}});
  return {{"embedder", r.embedder}, {"kernel", to_string(r.kernel)}, {"sets", r.sets},
          {"sizes", r.sizes},       {"pairs", pairs},                {"config_hash", r.config_hash}};
}

inline std::string to_csv(const EvalReport& r) {
  std::string out = "set_a,set_b,fad,mmd2,embedder,kernel,config_hash\n";
  char buf[128];
  for (const auto& p : r.pairs) {
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,", p.fad, p.mmd2);
    out += p.a + "," + p.b + buf + r.embedder + "," + to_string(r.kernel) + "," + r.config_hash + "\n";
  }
  return out;
}

}  // namespace footfall
