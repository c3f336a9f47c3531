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

// Audio encoder, decoder and control encoder, their batched forward passes and
// the checkpoint that carries weights, feature statistics and configuration.
//
// Sequences are time-major: row t * batch + b holds frame t of item b.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "footfall/audio.hpp"
#include "footfall/autodiff.hpp"
#include "footfall/dsp.hpp"
#include "footfall/error.hpp"
#include "footfall/random.hpp"
#include "footfall/synth.hpp"
#include "footfall/tensor_io.hpp"

namespace footfall {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "footfall-checkpoint";

struct ModelConfig {
  int sample_rate = 16000;
  int control_rate = 250;
  std::size_t mfcc_coeffs = 13;
  std::size_t mfcc_fft = 1024;
  std::size_t mfcc_mels = 128;
  std::size_t latent_dim = 512;
  std::size_t hidden = 256;
  std::size_t bands = 65;
  std::size_t ir_length = 129;
  std::size_t gamma_dims = 1;
  double magnitude_scale = 2.0;
  int smooth_iterations = 5500;
  double smooth_lambda = 0.25;
  std::vector<std::string> vocabulary;

  std::size_t hop() const { return static_cast<std::size_t>(analysis().hop()); }
  std::size_t control_dims() const { return 2 * gamma_dims; }

  AnalysisConfig analysis() const {
    AnalysisConfig a;
    a.sample_rate = sample_rate;
    a.control_rate = control_rate;
    a.smooth_iterations = smooth_iterations;
    a.smooth_lambda = smooth_lambda;
    return a;
  }

  MfccConfig mfcc() const {
    MfccConfig m;
    m.sample_rate = sample_rate;
    m.fft_size = mfcc_fft;
    m.hop = hop();
    m.n_mels = static_cast<int>(mfcc_mels);
    m.n_coeffs = static_cast<int>(mfcc_coeffs);
    m.f_hi = sample_rate / 2.0;
    return m;
  }

  void validate() const {
    analysis().hop();
    if (mfcc_coeffs == 0 || latent_dim == 0 || hidden == 0 || gamma_dims == 0)
      throw ConfigError("model: dimensions must be positive");
    if (magnitude_scale <= 0.0) throw ConfigError("model: magnitude_scale must be positive");
    if (vocabulary.empty()) throw ConfigError("model: empty label vocabulary");
    FirDesign(bands, ir_length);
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"sample_rate", c.sample_rate},         {"control_rate", c.control_rate},
          {"mfcc_coeffs", c.mfcc_coeffs},         {"mfcc_fft", c.mfcc_fft},
          {"mfcc_mels", c.mfcc_mels},             {"latent_dim", c.latent_dim},
          {"hidden", c.hidden},                   {"bands", c.bands},
          {"ir_length", c.ir_length},             {"gamma_dims", c.gamma_dims},
          {"magnitude_scale", c.magnitude_scale}, {"smooth_iterations", c.smooth_iterations},
          {"smooth_lambda", c.smooth_lambda},     {"vocabulary", c.vocabulary}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.sample_rate = j.at("sample_rate").get<int>();
    c.control_rate = j.at("control_rate").get<int>();
    c.mfcc_coeffs = j.at("mfcc_coeffs").get<std::size_t>();
    c.mfcc_fft = j.at("mfcc_fft").get<std::size_t>();
    c.mfcc_mels = j.at("mfcc_mels").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.bands = j.at("bands").get<std::size_t>();
    c.ir_length = j.at("ir_length").get<std::size_t>();
    c.gamma_dims = j.at("gamma_dims").get<std::size_t>();
    c.magnitude_scale = j.at("magnitude_scale").get<double>();
    c.smooth_iterations = j.at("smooth_iterations").get<int>();
    c.smooth_lambda = j.at("smooth_lambda").get<double>();
    c.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Weights

template <typename T>
struct EncoderWeights {
  ad::GruParams<T> gru;
  ad::LinearParams<T> out;
};

template <typename T>
struct DecoderWeights {
  ad::GruParams<T> gru;
  ad::LinearParams<T> out;
};

template <typename T>
struct ControlWeights {
  ad::Var<T> embedding;  // vocabulary x control_dims
  ad::GruParams<T> gru;
  ad::LinearParams<T> out;
};

namespace model_detail {

template <typename T>
ad::Var<T> uniform_matrix(std::size_t rows, std::size_t cols, std::size_t fan_in, std::uint64_t key) {
  ad::Tensor<T> t(ad::Shape{rows, cols});
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<T>(bound * CounterRng::symmetric_at(key, i));
  return ad::Var<T>::parameter(std::move(t));
}

template <typename T>
ad::Var<T> zeros(std::size_t n) {
  return ad::Var<T>::parameter(ad::Tensor<T>(ad::Shape{n}));
}

template <typename T>
ad::GruParams<T> init_gru(std::size_t in, std::size_t hidden, std::uint64_t key) {
  return {uniform_matrix<T>(in, 3 * hidden, in, derive_key(key, 1)),
          uniform_matrix<T>(hidden, 3 * hidden, hidden, derive_key(key, 2)), zeros<T>(3 * hidden)};
}

template <typename T>
ad::LinearParams<T> init_linear(std::size_t in, std::size_t out, std::uint64_t key) {
  return {uniform_matrix<T>(in, out, in, derive_key(key, 1)), zeros<T>(out)};
}

}  // namespace model_detail

template <typename T>
EncoderWeights<T> init_encoder(const ModelConfig& c, std::uint64_t seed) {
  return {model_detail::init_gru<T>(c.mfcc_coeffs, c.hidden, derive_key(seed, 11)),
          model_detail::init_linear<T>(c.hidden, c.latent_dim, derive_key(seed, 12))};
}

template <typename T>
DecoderWeights<T> init_decoder(const ModelConfig& c, std::uint64_t seed) {
  return {model_detail::init_gru<T>(c.latent_dim, c.hidden, derive_key(seed, 21)),
          model_detail::init_linear<T>(c.hidden, c.bands, derive_key(seed, 22))};
}

// The label embedding starts at ones so that every label initially passes
// the control vector through unchanged.
template <typename T>
ControlWeights<T> init_control(const ModelConfig& c, std::uint64_t seed) {
  return {ad::Var<T>::parameter(ad::Tensor<T>(ad::Shape{c.vocabulary.size(), c.control_dims()}, T(1))),
          model_detail::init_gru<T>(c.control_dims(), c.hidden, derive_key(seed, 31)),
          model_detail::init_linear<T>(c.hidden, c.latent_dim, derive_key(seed, 32))};
}

template <typename T>
std::vector<ad::Var<T>> parameters(const EncoderWeights<T>& w) {
  return {w.gru.w, w.gru.u, w.gru.b, w.out.w, w.out.b};
}
template <typename T>
std::vector<ad::Var<T>> parameters(const DecoderWeights<T>& w) {
  return {w.gru.w, w.gru.u, w.gru.b, w.out.w, w.out.b};
}
template <typename T>
std::vector<ad::Var<T>> parameters(const ControlWeights<T>& w) {
  return {w.embedding, w.gru.w, w.gru.u, w.gru.b, w.out.w, w.out.b};
}

// ---------------------------------------------------------------------------
// Batched forward passes

// features: [(steps*batch) x mfcc_coeffs], already normalized -> latents in (-1, 1).
template <typename T>
ad::Var<T> encoder_forward(ad::Tape<T>& tape, const EncoderWeights<T>& w, const ad::Var<T>& features,
                           std::size_t steps, std::size_t batch) {
  auto h = ad::gru_sequence(tape, features, w.gru, steps, batch);
  return ad::tanh(tape, ad::linear(tape, h, w.out.w, w.out.b));
}

// latents -> non-negative filter magnitudes [(steps*batch) x bands].
template <typename T>
ad::Var<T> decoder_forward(ad::Tape<T>& tape, const DecoderWeights<T>& w, const ad::Var<T>& latents,
                           std::size_t steps, std::size_t batch, double magnitude_scale) {
  auto h = ad::gru_sequence(tape, latents, w.gru, steps, batch);
  return ad::scale(tape, ad::softplus(tape, ad::linear(tape, h, w.out.w, w.out.b)), static_cast<T>(magnitude_scale));
}

// controls: [(steps*batch) x control_dims] normalized (gamma, u); labels[b] per item.
template <typename T>
ad::Var<T> control_forward(ad::Tape<T>& tape, const ControlWeights<T>& w, const ad::Var<T>& controls,
                           const std::vector<std::size_t>& labels, std::size_t steps) {
  const std::size_t batch = labels.size();
  const std::size_t vocab = w.embedding.value().rows();
  std::vector<std::size_t> ids(steps * batch);
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] >= vocab)
      throw VocabularyError("label id " + std::to_string(labels[b]) + " outside vocabulary of " +
                            std::to_string(vocab));
    for (std::size_t t = 0; t < steps; ++t) ids[t * batch + b] = labels[b];
  }
  auto v = ad::mul(tape, controls, ad::gather_rows(tape, w.embedding, std::move(ids)));
  auto h = ad::gru_sequence(tape, v, w.gru, steps, batch);
  return ad::tanh(tape, ad::linear(tape, h, w.out.w, w.out.b));
}

// ---------------------------------------------------------------------------
// Checkpoint

struct FeatureStats {
  std::vector<float> mfcc_mean, mfcc_std;
  std::vector<float> gamma_mean, gamma_std;
  float gamma_peak = 1.0f;
};

class Checkpoint {
 public:
  ModelConfig config;
  FeatureStats stats;
  EncoderWeights<float> encoder;
  DecoderWeights<float> decoder;
  std::optional<ControlWeights<float>> control;
  nlohmann::json training = nlohmann::json::object();  // optimizer, seeds, hashes, steps

  // Fresh weights for every network; statistics are identity.
  static Checkpoint initialize(ModelConfig cfg, std::uint64_t seed) {
    cfg.validate();
    Checkpoint c;
    c.config = std::move(cfg);
    c.encoder = init_encoder<float>(c.config, seed);
    c.decoder = init_decoder<float>(c.config, seed);
    c.stats.mfcc_mean.assign(c.config.mfcc_coeffs, 0.f);
    c.stats.mfcc_std.assign(c.config.mfcc_coeffs, 1.f);
    c.stats.gamma_mean.assign(c.config.gamma_dims, 0.f);
    c.stats.gamma_std.assign(c.config.gamma_dims, 1.f);
    return c;
  }

  bool has_control() const { return control.has_value(); }

  std::size_t label_id(const std::string& label) const {
    for (std::size_t i = 0; i < config.vocabulary.size(); ++i)
      if (config.vocabulary[i] == label) return i;
    throw VocabularyError("unknown label '" + label + "'");
  }

  TensorFile to_tensor_file() const {
    TensorFile f;
    f.metadata = {{"format", kCheckpointFormat},
                  {"version", kCheckpointVersion},
                  {"config", to_json(config)},
                  {"has_control", has_control()},
                  {"gamma_peak", stats.gamma_peak},
                  {"training", training}};
    auto put = [&](const std::string& name, const ad::Var<float>& v) { f.tensors[name] = v.value(); };
    auto put_vec = [&](const std::string& name, const std::vector<float>& v) {
      f.tensors[name] = ad::Tensor<float>(ad::Shape{v.size()}, v);
    };
    auto put_gru = [&](const std::string& p, const ad::GruParams<float>& g) {
      put(p + ".gru.w", g.w);
      put(p + ".gru.u", g.u);
      put(p + ".gru.b", g.b);
    };
    put_gru("encoder", encoder.gru);
    put("encoder.out.w", encoder.out.w);
    put("encoder.out.b", encoder.out.b);
    put_gru("decoder", decoder.gru);
    put("decoder.out.w", decoder.out.w);
    put("decoder.out.b", decoder.out.b);
    if (control) {
      put("control.embedding", control->embedding);
      put_gru("control", control->gru);
      put("control.out.w", control->out.w);
      put("control.out.b", control->out.b);
    }
    put_vec("stats.mfcc_mean", stats.mfcc_mean);
    put_vec("stats.mfcc_std", stats.mfcc_std);
    put_vec("stats.gamma_mean", stats.gamma_mean);
    put_vec("stats.gamma_std", stats.gamma_std);
    return f;
  }

  static Checkpoint from_tensor_file(const TensorFile& f) {
    const auto& meta = f.metadata;
    if (meta.value("format", "") != kCheckpointFormat) throw FormatError("checkpoint: not a footfall checkpoint");
    if (!meta.contains("version")) throw FormatError("checkpoint: missing version");
    if (meta.at("version").get<int>() != kCheckpointVersion)
      throw FormatError("checkpoint: unsupported version " + meta.at("version").dump());
    Checkpoint c;
    c.config = model_config_from_json(meta.at("config"));
    c.training = meta.value("training", nlohmann::json::object());
    c.stats.gamma_peak = meta.value("gamma_peak", 1.0f);
    const auto& cfg = c.config;
    auto get = [&](const std::string& name, const ad::Shape& shape) {
      auto it = f.tensors.find(name);
      if (it == f.tensors.end()) throw FormatError("checkpoint: missing tensor " + name);
      if (it->second.shape() != shape)
        throw FormatError("checkpoint: tensor " + name + " has shape " + ad::shape_string(it->second.shape()) +
                          ", config expects " + ad::shape_string(shape));
      return ad::Var<float>::parameter(it->second);
    };
    auto get_vec = [&](const std::string& name, std::size_t n) {
      const auto v = get(name, ad::Shape{n});
      return std::vector<float>(v.value().data().begin(), v.value().data().end());
    };
    auto get_gru = [&](const std::string& p, std::size_t in) {
      return ad::GruParams<float>{get(p + ".gru.w", {in, 3 * cfg.hidden}), get(p + ".gru.u", {cfg.hidden, 3 * cfg.hidden}),
                                  get(p + ".gru.b", {3 * cfg.hidden})};
    };
    c.encoder.gru = get_gru("encoder", cfg.mfcc_coeffs);
    c.encoder.out = {get("encoder.out.w", {cfg.hidden, cfg.latent_dim}), get("encoder.out.b", {cfg.latent_dim})};
    c.decoder.gru = get_gru("decoder", cfg.latent_dim);
    c.decoder.out = {get("decoder.out.w", {cfg.hidden, cfg.bands}), get("decoder.out.b", {cfg.bands})};
    if (meta.value("has_control", false)) {
      ControlWeights<float> w;
      w.embedding = get("control.embedding", {cfg.vocabulary.size(), cfg.control_dims()});
      w.gru = get_gru("control", cfg.control_dims());
      w.out = {get("control.out.w", {cfg.hidden, cfg.latent_dim}), get("control.out.b", {cfg.latent_dim})};
      c.control = std::move(w);
    }
    c.stats.mfcc_mean = get_vec("stats.mfcc_mean", cfg.mfcc_coeffs);
    c.stats.mfcc_std = get_vec("stats.mfcc_std", cfg.mfcc_coeffs);
    c.stats.gamma_mean = get_vec("stats.gamma_mean", cfg.gamma_dims);
    c.stats.gamma_std = get_vec("stats.gamma_std", cfg.gamma_dims);
    for (float s : c.stats.mfcc_std)
      if (!(s > 0.f)) throw FormatError("checkpoint: non-positive MFCC std");
    for (float s : c.stats.gamma_std)
      if (!(s > 0.f)) throw FormatError("checkpoint: non-positive gamma std");
    return c;
  }

  void save(const std::filesystem::path& path) const { write_tensor_file(path, to_tensor_file()); }
  static Checkpoint load(const std::filesystem::path& path) { return from_tensor_file(read_tensor_file(path)); }

  // Deep copy; Vars share nodes, so plain copies alias the same weights.
  Checkpoint clone() const { return from_tensor_file(to_tensor_file()); }
};

// ---------------------------------------------------------------------------
// Inference

struct LatentSequence {
  std::size_t frames = 0;
  std::size_t dims = 0;
  std::vector<float> values;  // frames x dims

  float at(std::size_t k, std::size_t d) const { return values[k * dims + d]; }
  float max_abs() const {
    float m = 0.f;
    for (float v : values) m = std::max(m, std::fabs(v));
    return m;
  }
};

struct ControlTuple {
  std::size_t label = 0;
  ControlSignal gamma;
  ControlSignal noise;
};

// Normalized MFCC features of a clip, [frames x coeffs] in float.
inline ad::Tensor<float> normalized_features(const AudioClip& clip, const Checkpoint& ckpt) {
  const auto& cfg = ckpt.config;
  if (clip.sample_rate != cfg.sample_rate)
    throw ContractViolation("encode_audio: clip rate " + std::to_string(clip.sample_rate) + " != model rate " +
                            std::to_string(cfg.sample_rate));
  const RowMatrix m = MfccExtractor(cfg.mfcc())(clip.samples);
  ad::Tensor<float> out(ad::Shape{static_cast<std::size_t>(m.rows()), cfg.mfcc_coeffs});
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < cfg.mfcc_coeffs; ++c)
      out.at(r, c) = static_cast<float>((m(r, static_cast<Eigen::Index>(c)) - ckpt.stats.mfcc_mean[c]) /
                                        ckpt.stats.mfcc_std[c]);
  return out;
}

inline LatentSequence encode_audio(const AudioClip& clip, const Checkpoint& ckpt) {
  auto features = normalized_features(clip, ckpt);
  const std::size_t frames = features.rows();
  ad::Tape<float> tape(false);
  auto z = encoder_forward(tape, ckpt.encoder, ad::Var<float>::constant(std::move(features)), frames, 1);
  return {frames, ckpt.config.latent_dim, z.value().storage()};
}

inline std::vector<float> decoder_magnitudes(const LatentSequence& z, const Checkpoint& ckpt) {
  if (z.dims != ckpt.config.latent_dim)
    throw ContractViolation("decode: latent dims " + std::to_string(z.dims) + " != " +
                            std::to_string(ckpt.config.latent_dim));
  ad::Tape<float> tape(false);
  auto zin = ad::Var<float>::constant(ad::Tensor<float>(ad::Shape{z.frames, z.dims}, z.values));
  return decoder_forward(tape, ckpt.decoder, zin, z.frames, 1, ckpt.config.magnitude_scale).value().storage();
}

inline AudioClip decode(const LatentSequence& z, const NoiseSpec& noise, const Checkpoint& ckpt) {
  const auto mags = decoder_magnitudes(z, ckpt);
  const FirDesign design(ckpt.config.bands, ckpt.config.ir_length);
  return {filtered_noise<float>(mags, z.frames, design, noise, ckpt.config.hop()), ckpt.config.sample_rate};
}

// Row-major [frames x control_dims]: normalized gamma followed by raw u.
inline ad::Tensor<float> control_inputs(const ControlSignal& gamma, const ControlSignal& noise,
                                        const FeatureStats& stats, std::size_t gamma_dims) {
  if (gamma.dims != gamma_dims || noise.dims != gamma_dims)
    throw ContractViolation("encode_control: gamma and u must have " + std::to_string(gamma_dims) + " dims");
  if (gamma.frames() != noise.frames()) throw ContractViolation("encode_control: gamma and u differ in length");
  if (gamma.control_rate != noise.control_rate)
    throw ContractViolation("encode_control: gamma and u differ in control rate");
  const std::size_t frames = gamma.frames();
  ad::Tensor<float> out(ad::Shape{frames, 2 * gamma_dims});
  for (std::size_t k = 0; k < frames; ++k)
    for (std::size_t d = 0; d < gamma_dims; ++d) {
      out.at(k, d) = static_cast<float>((gamma.at(k, d) - stats.gamma_mean[d]) / stats.gamma_std[d]);
      out.at(k, gamma_dims + d) = static_cast<float>(noise.at(k, d));
    }
  return out;
}

inline LatentSequence encode_control(const ControlTuple& tuple, const Checkpoint& ckpt) {
  if (!ckpt.control) throw StageError("checkpoint has no control encoder; run stage 2 first");
  if (tuple.gamma.control_rate != ckpt.config.control_rate)
    throw ContractViolation("encode_control: control rate must be " + std::to_string(ckpt.config.control_rate));
  auto v = control_inputs(tuple.gamma, tuple.noise, ckpt.stats, ckpt.config.gamma_dims);
  const std::size_t frames = v.rows();
  ad::Tape<float> tape(false);
  auto z = control_forward(tape, *ckpt.control, ad::Var<float>::constant(std::move(v)), {tuple.label}, frames);
  return {frames, ckpt.config.latent_dim, z.value().storage()};
}

// Uniform [-1, 1) control noise u for the given number of frames.
inline ControlSignal control_noise(std::size_t frames, std::size_t dims, std::uint64_t seed, double rate = 250.0) {
  ControlSignal u(rate, dims, frames);
  for (std::size_t i = 0; i < u.values.size(); ++i) u.values[i] = CounterRng::symmetric_at(derive_key(seed, 0x75), i);
  return u;
}

inline AudioClip synthesize(std::size_t label, const ControlSignal& gamma, const ControlSignal& noise,
                            std::uint64_t synth_seed, const Checkpoint& ckpt) {
  return decode(encode_control(ControlTuple{label, gamma, noise}, ckpt), NoiseSpec{synth_seed}, ckpt);
}

}  // namespace footfall
