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

// Audio clips, RIFF/WAVE I/O, band-limited resampling and dataset manifests.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "footfall/error.hpp"

namespace footfall {

static_assert(std::endian::native == std::endian::little,
              "WAV and checkpoint codecs assume a little-endian host");

struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 16000;

  std::size_t length() const noexcept { return samples.size(); }
  double duration() const noexcept {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
  bool empty() const noexcept { return samples.empty(); }
};

inline double peak(std::span<const float> x) {
  double p = 0.0;
  for (float v : x) p = std::max(p, static_cast<double>(std::fabs(v)));
  return p;
}

inline double rms(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

// Scales a non-silent clip so that max |s| = 1. Silent clips are unchanged.
inline void peak_normalize(AudioClip& clip) {
  const double p = peak(clip.samples);
  if (p <= 0.0) return;
  const double g = 1.0 / p;
  for (float& v : clip.samples) v = static_cast<float>(v * g);
}

// ---------------------------------------------------------------------------
// RIFF/WAVE

namespace wav_detail {

inline std::uint16_t u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

constexpr std::uint16_t kPcm = 1;
constexpr std::uint16_t kFloat = 3;
constexpr std::uint16_t kExtensible = 0xFFFE;

}  // namespace wav_detail

// Decodes a RIFF/WAVE byte stream (PCM16 or float32, 1-2 channels) into a
// mono clip. Channels are averaged; PCM16 is scaled by 1/32768.
inline AudioClip decode_wav(std::string_view bytes) {
  using namespace wav_detail;
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0)
    throw FormatError("wav: missing RIFF/WAVE header");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* payload = nullptr;
  std::size_t payload_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const unsigned char* chunk = data + pos;
    const std::uint32_t chunk_size = u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (chunk_size > size - body) throw FormatError("wav: chunk runs past end of file");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError("wav: fmt chunk too short");
      format = u16(data + body);
      channels = u16(data + body + 2);
      rate = u32(data + body + 4);
      bits = u16(data + body + 14);
      if (format == kExtensible) {
        if (chunk_size < 40) throw FormatError("wav: extensible fmt chunk too short");
        format = u16(data + body + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      payload = data + body;
      payload_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  if (!have_fmt) throw FormatError("wav: no fmt chunk");
  if (payload == nullptr) throw FormatError("wav: no data chunk");
  if (rate == 0) throw FormatError("wav: zero sample rate");
  if (channels < 1 || channels > 2)
    throw UnsupportedError("wav: " + std::to_string(channels) + " channels (1-2 supported)");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  if (format == kPcm && bits == 16) {
    const std::size_t frames = payload_size / (2u * channels);
    clip.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
      double acc = 0.0;
      for (std::size_t c = 0; c < channels; ++c)
        acc += static_cast<std::int16_t>(u16(payload + 2 * (i * channels + c))) / 32768.0;
      clip.samples[i] = static_cast<float>(acc / channels);
    }
  } else if (format == kFloat && bits == 32) {
    const std::size_t frames = payload_size / (4u * channels);
    clip.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
      if (channels == 1) {
        std::memcpy(&clip.samples[i], payload + 4 * i, 4);
      } else {
        float l, r;
        std::memcpy(&l, payload + 8 * i, 4);
        std::memcpy(&r, payload + 8 * i + 4, 4);
        clip.samples[i] = static_cast<float>((static_cast<double>(l) + r) / 2.0);
      }
    }
  } else {
    throw UnsupportedError("wav: encoding format " + std::to_string(format) + " with " +
                           std::to_string(bits) + " bits (PCM16 or float32 supported)");
  }
  for (float v : clip.samples)
    if (!std::isfinite(v)) throw FormatError("wav: non-finite sample");
  return clip;
}

// Float32 mono RIFF/WAVE.
inline std::string encode_wav(const AudioClip& clip) {
  using namespace wav_detail;
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 4);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, kFloat);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put32(out, static_cast<std::uint32_t>(clip.sample_rate) * 4);
  put16(out, 4);
  put16(out, 32);
  out += "data";
  put32(out, data_bytes);
  const auto* raw = reinterpret_cast<const char*>(clip.samples.data());
  out.append(raw, raw + data_bytes);
  return out;
}

inline AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const UnsupportedError& e) {
    throw UnsupportedError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const std::string bytes = encode_wav(clip);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

// ---------------------------------------------------------------------------
// Resampling

struct ResamplerSpec {
  double kaiser_beta = 8.0;
  // Passband edge as a fraction of the lower of the two sample rates.
  double cutoff = 0.45;
  // Zero crossings of the low-pass kernel on each side of its centre.
  int zero_crossings = 24;
};

// Windowed-sinc polyphase resampler. Every phase of the kernel is normalized
// to unit DC gain; samples outside the clip are zero.
inline AudioClip resample(const AudioClip& clip, int target_rate, const ResamplerSpec& spec = {}) {
  if (target_rate <= 0) throw ContractViolation("resample: target_rate must be positive");
  if (clip.sample_rate <= 0) throw ContractViolation("resample: source rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const long source_rate = clip.sample_rate;
  const long g = std::gcd(source_rate, static_cast<long>(target_rate));
  const long up = target_rate / g;    // output steps per source period
  const long down = source_rate / g;  // input steps per output sample, in units of 1/up

  // Cutoff in cycles per input sample.
  const double fc = spec.cutoff * static_cast<double>(std::min<long>(source_rate, target_rate)) /
                    static_cast<double>(source_rate);
  const double half_width = spec.zero_crossings / (2.0 * fc);
  const long taps_each_side = static_cast<long>(std::ceil(half_width));
  const long taps = 2 * taps_each_side + 1;
  const double i0_beta = std::cyl_bessel_i(0.0, spec.kaiser_beta);

  // kernel[phase][j] weights input sample base - taps_each_side + j, where the
  // output position is base + phase/up.
  std::vector<double> kernel(static_cast<std::size_t>(up * taps));
  for (long phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / static_cast<double>(up);
    double sum = 0.0;
    for (long j = 0; j < taps; ++j) {
      const double x = static_cast<double>(j - taps_each_side) - frac;
      double w = 0.0;
      if (std::fabs(x) <= half_width) {
        const double r = x / half_width;
        const double arg = spec.kaiser_beta * std::sqrt(std::max(0.0, 1.0 - r * r));
        const double sinc_arg = 2.0 * fc * x;
        const double sinc = sinc_arg == 0.0 ? 1.0
                                            : std::sin(std::numbers::pi * sinc_arg) /
                                                  (std::numbers::pi * sinc_arg);
        w = 2.0 * fc * sinc * std::cyl_bessel_i(0.0, arg) / i0_beta;
      }
      kernel[static_cast<std::size_t>(phase * taps + j)] = w;
      sum += w;
    }
    for (long j = 0; j < taps; ++j) kernel[static_cast<std::size_t>(phase * taps + j)] /= sum;
  }

  const auto in_len = static_cast<long>(clip.samples.size());
  const auto out_len = static_cast<long>(
      std::llround(static_cast<double>(in_len) * target_rate / static_cast<double>(source_rate)));
  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(out_len));
  for (long k = 0; k < out_len; ++k) {
    const long num = k * down;  // output position in units of 1/up input samples
    const long base = num / up;
    const long phase = num % up;
    const double* h = &kernel[static_cast<std::size_t>(phase * taps)];
    double acc = 0.0;
    const long first = base - taps_each_side;
    const long j0 = std::max(0L, -first);
    const long j1 = std::min(taps, in_len - first);
    for (long j = j0; j < j1; ++j) acc += h[j] * clip.samples[static_cast<std::size_t>(first + j)];
    out.samples[static_cast<std::size_t>(k)] = static_cast<float>(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifests

struct ManifestEntry {
  std::filesystem::path path;
  std::string label;
  int label_id = 0;
};

struct DatasetManifest {
  std::string class_name;
  std::vector<ManifestEntry> entries;
  // Dense label ids in first-appearance order.
  std::vector<std::string> vocabulary;

  int label_id(std::string_view label) const {
    auto it = std::find(vocabulary.begin(), vocabulary.end(), label);
    if (it == vocabulary.end()) throw VocabularyError("unknown label '" + std::string(label) + "'");
    return static_cast<int>(it - vocabulary.begin());
  }
};

// Parses JSON-lines text; relative paths resolve against base_dir. Blank lines
// are skipped but still counted for error line numbers.
inline DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                                      std::string class_name, bool check_files = true) {
  DatasetManifest manifest;
  manifest.class_name = std::move(class_name);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ManifestError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object()) throw ManifestError("expected a JSON object", line_no);
    for (const char* key : {"path", "label"}) {
      if (!obj.contains(key)) throw ManifestError(std::string("missing key \"") + key + "\"", line_no);
      if (!obj[key].is_string())
        throw ManifestError(std::string("key \"") + key + "\" must be a string", line_no);
    }
    ManifestEntry entry;
    entry.path = obj["path"].get<std::string>();
    if (entry.path.is_relative()) entry.path = base_dir / entry.path;
    if (check_files && !std::filesystem::exists(entry.path))
      throw ManifestError("file not found: " + entry.path.string(), line_no);
    entry.label = obj["label"].get<std::string>();
    auto it = std::find(manifest.vocabulary.begin(), manifest.vocabulary.end(), entry.label);
    if (it == manifest.vocabulary.end()) {
      manifest.vocabulary.push_back(entry.label);
      entry.label_id = static_cast<int>(manifest.vocabulary.size() - 1);
    } else {
      entry.label_id = static_cast<int>(it - manifest.vocabulary.begin());
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path(), path.stem().string());
}

}  // namespace footfall
