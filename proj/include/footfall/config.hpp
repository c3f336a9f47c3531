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

// Engine configuration: a key = value text file ('#' starts a comment),
// located by an explicit path or the PROVE_CONFIG environment variable.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"

#include "footfall/error.hpp"
#include "footfall/hash.hpp"
#include "footfall/models.hpp"
#include "footfall/training.hpp"

#ifndef FOOTFALL_DATA_DIR
#define FOOTFALL_DATA_DIR "data"
#endif

namespace footfall {

inline constexpr const char* kConfigEnvVar = "PROVE_CONFIG";

struct KeyValue {
  std::string value;
  std::size_t line = 0;
};

inline std::map<std::string, KeyValue> parse_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, KeyValue> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    if (out.count(key)) throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    out[key] = {trim(line.substr(eq + 1)), line_no};
  }
  return out;
}

struct EngineConfig {
  ModelConfig model;
  TrainConfig train;
  std::string checkpoint;
  std::string recipes = std::string(FOOTFALL_DATA_DIR) + "/recipes.json";
  std::string static_dir = std::string(FOOTFALL_DATA_DIR) + "/static";
  std::string host = "127.0.0.1";
  int port = 8080;
  double max_duration = 30.0;
  std::string kernel = "rbf";
  std::string source;  // file the values came from, if any

  AnalysisConfig analysis() const { return model.analysis(); }

  void validate() const {
    if (model.sample_rate <= 0 || model.control_rate <= 0 || model.sample_rate % model.control_rate != 0)
      throw ConfigError("config: sample_rate must be a positive multiple of control_rate");
    if (model.smooth_iterations < 0 || !(model.smooth_lambda > 0.0 && model.smooth_lambda < 0.5))
      throw ConfigError("config: smooth_iterations must be >= 0 and smooth_lambda in (0, 0.5)");
    if (port < 0 || port > 65535) throw ConfigError("config: port out of range");
    if (!(max_duration > 0.0)) throw ConfigError("config: max_duration must be positive");
    kernel_check();
    train.validate();
  }

  void kernel_check() const {
    if (kernel != "rbf" && kernel != "linear") throw ConfigError("config: kernel must be rbf or linear");
  }

  // Applies parsed values; unknown keys and malformed values are errors.
  void apply(const std::map<std::string, KeyValue>& values, const std::string& origin) {
    for (const auto& [key, kv] : values) {
      const std::string where = origin + ":" + std::to_string(kv.line) + ": ";
      try {
        if (!set(key, kv.value)) throw ConfigError(where + "unknown key '" + key + "'");
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw ConfigError(where + "bad value '" + kv.value + "' for '" + key + "'");
      }
    }
  }

  nlohmann::json to_json() const {
    return {{"model", footfall::to_json(model)},
            {"train", footfall::to_json(train)},
            {"max_duration", max_duration},
            {"kernel", kernel}};
  }

  std::string hash() const { return config_hash(to_json()); }

 private:
  template <typename T>
  static T parse_number(const std::string& v) {
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
      std::size_t used = 0;
      out = static_cast<T>(std::stod(v, &used));
      if (used != v.size()) throw std::invalid_argument(v);
    } else {
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument(v);
    }
    return out;
  }

  bool set(const std::string& key, const std::string& v) {
    auto& m = model;
    auto& t = train;
    if (key == "sample_rate") m.sample_rate = parse_number<int>(v);
    else if (key == "control_rate") m.control_rate = parse_number<int>(v);
    else if (key == "smooth_iterations") m.smooth_iterations = parse_number<int>(v);
    else if (key == "smooth_lambda") m.smooth_lambda = parse_number<double>(v);
    else if (key == "mfcc_coeffs") m.mfcc_coeffs = parse_number<std::size_t>(v);
    else if (key == "mfcc_fft") m.mfcc_fft = parse_number<std::size_t>(v);
    else if (key == "mfcc_mels") m.mfcc_mels = parse_number<std::size_t>(v);
    else if (key == "latent_dim") m.latent_dim = parse_number<std::size_t>(v);
    else if (key == "hidden") m.hidden = parse_number<std::size_t>(v);
    else if (key == "bands") m.bands = parse_number<std::size_t>(v);
    else if (key == "ir_length") m.ir_length = parse_number<std::size_t>(v);
    else if (key == "magnitude_scale") m.magnitude_scale = parse_number<double>(v);
    else if (key == "learning_rate") t.learning_rate = parse_number<double>(v);
    else if (key == "beta1") t.beta1 = parse_number<double>(v);
    else if (key == "beta2") t.beta2 = parse_number<double>(v);
    else if (key == "epsilon") t.epsilon = parse_number<double>(v);
    else if (key == "batch_size") t.batch_size = parse_number<std::size_t>(v);
    else if (key == "steps") t.steps = parse_number<std::size_t>(v);
    else if (key == "excerpt_seconds") t.excerpt_seconds = parse_number<double>(v);
    else if (key == "init_seed") t.init_seed = parse_number<std::uint64_t>(v);
    else if (key == "data_seed") t.data_seed = parse_number<std::uint64_t>(v);
    else if (key == "synth_seed") t.synth_seed = parse_number<std::uint64_t>(v);
    else if (key == "magnitude_weight") t.magnitude_weight = parse_number<double>(v);
    else if (key == "log_magnitude_weight") t.log_magnitude_weight = parse_number<double>(v);
    else if (key == "checkpoint") checkpoint = v;
    else if (key == "recipes") recipes = v;
    else if (key == "static_dir") static_dir = v;
    else if (key == "host") host = v;
    else if (key == "port") port = parse_number<int>(v);
    else if (key == "max_duration") max_duration = parse_number<double>(v);
    else if (key == "kernel") kernel = v;
    else return false;
    return true;
  }
};

// Loads the file at path; with no path, the file named by PROVE_CONFIG; with
// neither, the defaults.
inline EngineConfig load_engine_config(const std::optional<std::filesystem::path>& path = std::nullopt) {
  EngineConfig cfg;
  std::optional<std::filesystem::path> file = path;
  if (!file) {
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) file = env;
  }
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file " + file->string());
    cfg.apply(parse_key_values(in, file->string()), file->string());
    cfg.source = file->string();
  }
  cfg.validate();
  return cfg;
}

inline EngineConfig engine_config_from_string(const std::string& text) {
  EngineConfig cfg;
  std::istringstream in(text);
  cfg.apply(parse_key_values(in, "<string>"), "<string>");
  cfg.validate();
  return cfg;
}

}  // namespace footfall
