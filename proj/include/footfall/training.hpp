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

// Dataset assembly and the two training stages: the audio autoencoder
// (encoder + decoder) on the multi-scale spectral loss, then the control
// encoder regressing the frozen encoder's latents.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "footfall/adam.hpp"
#include "footfall/audio.hpp"
#include "footfall/corpus.hpp"
#include "footfall/autodiff.hpp"
#include "footfall/dsp.hpp"
#include "footfall/error.hpp"
#include "footfall/hash.hpp"
#include "footfall/models.hpp"
#include "footfall/random.hpp"
#include "footfall/synth.hpp"

namespace footfall {

struct TrainingItem {
  AudioClip clip;  // padded to frames * hop samples
  std::size_t label = 0;
  ControlSignal gamma;
  ControlSignal u;
  std::string source;
};

struct Dataset {
  std::vector<std::string> vocabulary;
  std::vector<TrainingItem> items;
  std::vector<std::string> warnings;
};

// Resampled, peak-normalized and padded to a whole number of control frames,
// with its control proxy and seeded control noise.
inline TrainingItem make_item(AudioClip clip, std::size_t label, std::size_t index, const AnalysisConfig& cfg,
                              std::uint64_t seed, std::size_t gamma_dims = 1) {
  if (clip.sample_rate != cfg.sample_rate) clip = resample(clip, cfg.sample_rate);
  peak_normalize(clip);
  const std::size_t frames = cfg.frames_for(clip.samples.size());
  clip.samples.resize(frames * static_cast<std::size_t>(cfg.hop()), 0.f);
  TrainingItem item;
  item.gamma = control_proxy(clip, cfg);
  item.u = control_noise(frames, gamma_dims, derive_key(seed, index), cfg.control_rate);
  item.clip = std::move(clip);
  item.label = label;
  return item;
}

// Unreadable files are skipped with a warning; fails only when none load.
inline Dataset build_dataset(const DatasetManifest& manifest, const AnalysisConfig& cfg, std::uint64_t seed) {
  if (manifest.entries.empty()) throw ConfigError("dataset: manifest is empty");
  Dataset ds;
  ds.vocabulary = manifest.vocabulary;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    AudioClip clip;
    try {
      clip = read_wav(e.path);
    } catch (const Error& err) {
      ds.warnings.push_back("skipping " + e.path.string() + ": " + err.what());
      continue;
    }
    auto item = make_item(std::move(clip), static_cast<std::size_t>(e.label_id), i, cfg, seed);
    item.source = e.path.string();
    ds.items.push_back(std::move(item));
  }
  if (ds.items.empty()) throw ConfigError("dataset: no readable files in manifest");
  return ds;
}

inline Dataset build_dataset(const std::vector<LabeledClip>& clips, std::vector<std::string> vocabulary,
                             const AnalysisConfig& cfg, std::uint64_t seed) {
  if (clips.empty()) throw ConfigError("dataset: no clips");
  Dataset ds;
  ds.vocabulary = std::move(vocabulary);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (clips[i].label >= ds.vocabulary.size()) throw VocabularyError("dataset: label id outside vocabulary");
    ds.items.push_back(make_item(clips[i].clip, clips[i].label, i, cfg, seed));
  }
  return ds;
}

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 8;
  std::size_t steps = 2000;
  double excerpt_seconds = 1.0;
  std::uint64_t init_seed = 1;
  std::uint64_t data_seed = 2;
  std::uint64_t synth_seed = 3;
  double magnitude_weight = 1.0;
  double log_magnitude_weight = 1.0;

  ad::AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }

  std::size_t excerpt_frames(int control_rate) const {
    const double f = excerpt_seconds * control_rate;
    const auto k = static_cast<std::size_t>(std::llround(f));
    if (k == 0 || std::fabs(f - static_cast<double>(k)) > 1e-9)
      throw ConfigError("train: excerpt_seconds * control_rate must be a positive integer");
    return k;
  }

  void validate() const {
    if (!(learning_rate > 0.0) || batch_size == 0 || !(excerpt_seconds > 0.0))
      throw ConfigError("train: learning_rate, batch_size and excerpt_seconds must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && epsilon > 0.0))
      throw ConfigError("train: Adam betas must lie in (0, 1) and epsilon must be positive");
    if (magnitude_weight < 0.0 || log_magnitude_weight < 0.0)
      throw ConfigError("train: loss weights must be non-negative");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"epsilon", c.epsilon},
          {"batch_size", c.batch_size},       {"steps", c.steps},
          {"excerpt_seconds", c.excerpt_seconds}, {"init_seed", c.init_seed},
          {"data_seed", c.data_seed},         {"synth_seed", c.synth_seed},
          {"magnitude_weight", c.magnitude_weight}, {"log_magnitude_weight", c.log_magnitude_weight}};
}

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;
  std::string config_hash;
  double seconds = 0.0;
};

// Called after every step with (step, loss).
using StepCallback = std::function<void(std::size_t, double)>;

namespace train_detail {

struct Excerpt {
  std::size_t item, offset;  // offset in control frames
};

inline std::vector<Excerpt> sample_batch(const Dataset& ds, std::size_t frames, std::size_t batch,
                                         std::uint64_t seed, std::size_t step) {
  CounterRng rng(derive_key(seed, step));
  std::vector<Excerpt> out(batch);
  for (auto& e : out) {
    e.item = static_cast<std::size_t>(rng.below(ds.items.size()));
    const std::size_t available = ds.items[e.item].gamma.frames();
    e.offset = available > frames ? static_cast<std::size_t>(rng.below(available - frames + 1)) : 0;
  }
  return out;
}

inline void check_finite(double loss, std::size_t step, const char* stage) {
  if (!std::isfinite(loss))
    throw TrainingError(std::string(stage) + ": non-finite loss", step);
}

inline void check_vocabulary(const Dataset& ds) {
  if (ds.items.empty()) throw ConfigError("train: dataset is empty");
  if (ds.vocabulary.empty()) throw ConfigError("train: dataset has no labels");
}

}  // namespace train_detail

inline SpectralLossConfig spectral_loss_config(const TrainConfig& tc) {
  SpectralLossConfig cfg;
  cfg.magnitude_weight = tc.magnitude_weight;
  cfg.log_magnitude_weight = tc.log_magnitude_weight;
  return cfg;
}

// Per-coefficient MFCC mean and std over every frame of every item.
inline void fit_mfcc_stats(const Dataset& ds, Checkpoint& ckpt) {
  const auto& cfg = ckpt.config;
  const MfccExtractor mfcc(cfg.mfcc());
  std::vector<double> sum(cfg.mfcc_coeffs, 0.0), sq(cfg.mfcc_coeffs, 0.0);
  double count = 0.0;
  for (const auto& item : ds.items) {
    const RowMatrix m = mfcc(item.clip.samples);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < cfg.mfcc_coeffs; ++c) {
        const double v = m(r, static_cast<Eigen::Index>(c));
        sum[c] += v;
        sq[c] += v * v;
      }
    count += static_cast<double>(m.rows());
  }
  for (std::size_t c = 0; c < cfg.mfcc_coeffs; ++c) {
    const double mean = sum[c] / count;
    ckpt.stats.mfcc_mean[c] = static_cast<float>(mean);
    ckpt.stats.mfcc_std[c] = static_cast<float>(std::max(std::sqrt(std::max(sq[c] / count - mean * mean, 0.0)), 1e-6));
  }
}

// Gamma mean/std over all frames and the mean per-item gamma peak.
inline void fit_gamma_stats(const Dataset& ds, Checkpoint& ckpt) {
  const std::size_t dims = ckpt.config.gamma_dims;
  std::vector<double> sum(dims, 0.0), sq(dims, 0.0);
  double count = 0.0, peaks = 0.0;
  for (const auto& item : ds.items) {
    double item_peak = 0.0;
    for (std::size_t k = 0; k < item.gamma.frames(); ++k)
      for (std::size_t d = 0; d < dims; ++d) {
        const double v = item.gamma.at(k, d);
        sum[d] += v;
        sq[d] += v * v;
        item_peak = std::max(item_peak, v);
      }
    count += static_cast<double>(item.gamma.frames());
    peaks += item_peak;
  }
  for (std::size_t d = 0; d < dims; ++d) {
    const double mean = sum[d] / count;
    ckpt.stats.gamma_mean[d] = static_cast<float>(mean);
    ckpt.stats.gamma_std[d] = static_cast<float>(std::max(std::sqrt(std::max(sq[d] / count - mean * mean, 0.0)), 1e-6));
  }
  ckpt.stats.gamma_peak = static_cast<float>(std::max(peaks / static_cast<double>(ds.items.size()), 1e-6));
}

inline TrainResult train_stage1(const Dataset& ds, ModelConfig model, const TrainConfig& tc,
                                const StepCallback& on_step = {}) {
  train_detail::check_vocabulary(ds);
  tc.validate();
  model.vocabulary = ds.vocabulary;
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  result.checkpoint = Checkpoint::initialize(model, tc.init_seed);
  Checkpoint& ckpt = result.checkpoint;
  fit_mfcc_stats(ds, ckpt);

  std::vector<ad::Tensor<float>> features;
  features.reserve(ds.items.size());
  for (const auto& item : ds.items) features.push_back(normalized_features(item.clip, ckpt));

  const std::size_t frames = tc.excerpt_frames(model.control_rate), batch = tc.batch_size, hop = model.hop();
  const std::size_t coeffs = model.mfcc_coeffs, length = frames * hop;
  const FirDesign design(model.bands, model.ir_length);
  const auto loss_cfg = spectral_loss_config(tc);
  auto params = parameters(ckpt.encoder);
  for (auto& p : parameters(ckpt.decoder)) params.push_back(p);
  ad::Adam<float> opt(params, tc.adam());

  for (std::size_t step = 0; step < tc.steps; ++step) {
    const auto batch_items = train_detail::sample_batch(ds, frames, batch, tc.data_seed, step);
    ad::Tensor<float> x(ad::Shape{frames * batch, coeffs});
    ad::Tensor<float> target(ad::Shape{batch, length});
    std::vector<std::uint64_t> seeds(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& e = batch_items[b];
      const auto& f = features[e.item];
      const auto& audio = ds.items[e.item].clip.samples;
      for (std::size_t t = 0; t < frames && e.offset + t < f.rows(); ++t)
        for (std::size_t c = 0; c < coeffs; ++c) x.at(t * batch + b, c) = f.at(e.offset + t, c);
      for (std::size_t i = 0; i < length && e.offset * hop + i < audio.size(); ++i)
        target.at(b, i) = audio[e.offset * hop + i];
      seeds[b] = derive_key(tc.synth_seed, step * batch + b);
    }
    opt.zero_grad();
    ad::Tape<float> tape;
    auto z = encoder_forward(tape, ckpt.encoder, ad::Var<float>::constant(std::move(x)), frames, batch);
    auto mags = decoder_forward(tape, ckpt.decoder, z, frames, batch, model.magnitude_scale);
    auto audio = ad::filtered_noise(tape, mags, design, seeds, frames, hop);
    auto loss = ad::multiscale_spectral_loss(tape, audio, ad::Var<float>::constant(std::move(target)), loss_cfg);
    const double value = loss.value()[0];
    train_detail::check_finite(value, step, "stage 1");
    tape.backward(loss);
    opt.step();
    result.losses.push_back(value);
    if (on_step) on_step(step, value);
  }

  nlohmann::json hashed = {{"model", to_json(model)}, {"train", to_json(tc)}};
  result.config_hash = config_hash(hashed);
  ckpt.training["stage1"] = {{"config", to_json(tc)},
                             {"config_hash", result.config_hash},
                             {"optimizer", "adam"},
                             {"final_loss", result.losses.empty() ? 0.0 : result.losses.back()}};
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

inline TrainResult train_stage2(const Dataset& ds, const Checkpoint& stage1, const TrainConfig& tc,
                                const StepCallback& on_step = {}) {
  train_detail::check_vocabulary(ds);
  tc.validate();
  if (ds.vocabulary != stage1.config.vocabulary)
    throw ConfigError("stage 2: dataset label vocabulary differs from the stage 1 checkpoint");
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  result.checkpoint = stage1.clone();
  Checkpoint& ckpt = result.checkpoint;
  const auto& model = ckpt.config;
  fit_gamma_stats(ds, ckpt);
  ckpt.control = init_control<float>(model, derive_key(tc.init_seed, 2));

  std::vector<LatentSequence> targets;
  std::vector<ad::Tensor<float>> controls;
  for (const auto& item : ds.items) {
    targets.push_back(encode_audio(item.clip, ckpt));
    controls.push_back(control_inputs(item.gamma, item.u, ckpt.stats, model.gamma_dims));
  }

  const std::size_t frames = tc.excerpt_frames(model.control_rate), batch = tc.batch_size;
  const std::size_t latent = model.latent_dim, cdims = model.control_dims();
  ad::Adam<float> opt(parameters(*ckpt.control), tc.adam());
  for (std::size_t step = 0; step < tc.steps; ++step) {
    const auto batch_items = train_detail::sample_batch(ds, frames, batch, tc.data_seed, step);
    ad::Tensor<float> v(ad::Shape{frames * batch, cdims});
    ad::Tensor<float> z(ad::Shape{frames * batch, latent});
    std::vector<std::size_t> labels(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& e = batch_items[b];
      labels[b] = ds.items[e.item].label;
      const auto& c = controls[e.item];
      const auto& zt = targets[e.item];
      for (std::size_t t = 0; t < frames && e.offset + t < zt.frames; ++t) {
        for (std::size_t d = 0; d < cdims; ++d) v.at(t * batch + b, d) = c.at(e.offset + t, d);
        for (std::size_t d = 0; d < latent; ++d) z.at(t * batch + b, d) = zt.at(e.offset + t, d);
      }
    }
    opt.zero_grad();
    ad::Tape<float> tape;
    auto zhat = control_forward(tape, *ckpt.control, ad::Var<float>::constant(std::move(v)), labels, frames);
    auto loss = ad::mse(tape, zhat, z);
    const double value = loss.value()[0];
    train_detail::check_finite(value, step, "stage 2");
    tape.backward(loss);
    opt.step();
    result.losses.push_back(value);
    if (on_step) on_step(step, value);
  }

  nlohmann::json hashed = {{"model", to_json(model)}, {"train", to_json(tc)}};
  result.config_hash = config_hash(hashed);
  ckpt.training["stage2"] = {{"config", to_json(tc)},
                             {"config_hash", result.config_hash},
                             {"optimizer", "adam"},
                             {"final_loss", result.losses.empty() ? 0.0 : result.losses.back()}};
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// "step,loss" rows; losses printed with 17 significant digits.
inline std::string loss_csv(const std::vector<double>& losses) {
  std::string out = "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, losses[i]);
    out += buf;
  }
  return out;
}

inline void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << loss_csv(losses);
}

// Mean of the first and last `window` entries.
inline std::pair<double, double> smoothed_endpoints(const std::vector<double>& losses, std::size_t window = 100) {
  if (losses.empty()) return {0.0, 0.0};
  const std::size_t w = std::min(window, losses.size());
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    head += losses[i];
    tail += losses[losses.size() - w + i];
  }
  return {head / static_cast<double>(w), tail / static_cast<double>(w)};
}

}  // namespace footfall
