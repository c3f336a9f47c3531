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

// Request handling shared by the command line and the HTTP service. Handlers
// are plain functions from request bodies to responses so they can be called
// without a socket; install() binds them to an httplib server.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "footfall/audio.hpp"
#include "footfall/config.hpp"
#include "footfall/dsp.hpp"
#include "footfall/error.hpp"
#include "footfall/farnell.hpp"
#include "footfall/models.hpp"
#include "json.hpp"

// After the Eigen users: <resolv.h>, pulled in here, defines a _res macro.
#include "httplib.h"

#ifndef FOOTFALL_VERSION
#define FOOTFALL_VERSION "0.0.0"
#endif

namespace footfall {

// A request that failed validation; status is the HTTP status to report.
class RequestError : public Error {
 public:
  RequestError(int status, std::string field, const std::string& what)
      : Error(what), status_(status), field_(std::move(field)) {}
  int status() const noexcept { return status_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int status_;
  std::string field_;
};

struct SynthRequest {
  std::string surface;
  std::string engine = "learned";  // or "pa"
  std::optional<GRFParams> grf;
  std::optional<std::vector<double>> gamma;  // explicit curve at the control rate
  double duration = 1.0;
  std::uint64_t u_seed = 0;
  std::uint64_t synth_seed = 0;
  std::uint64_t grf_seed = 0;
};

namespace service_detail {

template <typename T>
T field(const nlohmann::json& j, const char* name, T fallback) {
  if (!j.contains(name)) return fallback;
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw RequestError(400, name, std::string("field '") + name + "' has the wrong type");
  }
}

inline nlohmann::json parse_body(const std::string& body) {
  try {
    auto j = nlohmann::json::parse(body);
    if (!j.is_object()) throw RequestError(400, "", "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw RequestError(400, "", std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace service_detail

inline SynthRequest parse_synth_request(const nlohmann::json& j, double max_duration, int control_rate) {
  using service_detail::field;
  SynthRequest r;
  if (!j.contains("surface") || !j.at("surface").is_string())
    throw RequestError(400, "surface", "field 'surface' (string) is required");
  r.surface = j.at("surface").get<std::string>();
  r.engine = field<std::string>(j, "engine", "learned");
  if (r.engine != "learned" && r.engine != "pa")
    throw RequestError(400, "engine", "field 'engine' must be \"learned\" or \"pa\"");
  r.duration = field<double>(j, "duration", 1.0);
  r.u_seed = field<std::uint64_t>(j, "u_seed", 0);
  r.synth_seed = field<std::uint64_t>(j, "synth_seed", 0);
  r.grf_seed = field<std::uint64_t>(j, "grf_seed", 0);
  if (j.contains("gamma") && j.contains("grf"))
    throw RequestError(400, "gamma", "give either 'gamma' or 'grf', not both");
  if (j.contains("gamma")) {
    if (!j.at("gamma").is_array()) throw RequestError(400, "gamma", "field 'gamma' must be an array of numbers");
    std::vector<double> g;
    for (const auto& v : j.at("gamma")) {
      if (!v.is_number()) throw RequestError(400, "gamma", "field 'gamma' must contain only numbers");
      const double x = v.get<double>();
      if (!std::isfinite(x) || x < 0.0) throw RequestError(400, "gamma", "gamma values must be finite and >= 0");
      g.push_back(x);
    }
    if (g.empty()) throw RequestError(400, "gamma", "field 'gamma' is empty");
    if (static_cast<double>(g.size()) > max_duration * control_rate + 1e-9)
      throw RequestError(400, "gamma", "gamma is longer than the maximum duration");
    r.duration = static_cast<double>(g.size()) / control_rate;
    r.gamma = std::move(g);
  } else {
    if (!(r.duration > 0.0) || !std::isfinite(r.duration) || r.duration > max_duration)
      throw RequestError(400, "duration", "duration must lie in (0, " + std::to_string(max_duration) + "]");
    try {
      const GRFParams p = j.contains("grf") ? grf_params_from_json(j.at("grf")) : GRFParams{};
      p.validate();
      r.grf = p;
    } catch (const Error& e) {
      throw RequestError(400, "grf", e.what());
    }
  }
  return r;
}

// The control curve a request asks for. GRF curves are relative (peak near 1)
// and are multiplied by gamma_scale; explicit arrays are used as given.
inline ControlSignal request_gamma(const SynthRequest& r, int control_rate, double gamma_scale) {
  if (r.gamma) {
    ControlSignal g(control_rate, 1, r.gamma->size());
    g.values = *r.gamma;
    return g;
  }
  auto g = grf_curve(r.grf.value_or(GRFParams{}), r.duration, control_rate, r.grf_seed);
  for (auto& v : g.values) v *= gamma_scale;
  return g;
}

inline AudioClip run_synth_request(const SynthRequest& r, const Checkpoint* ckpt,
                                   const std::vector<SurfaceRecipe>& recipes, int sample_rate, int control_rate) {
  if (r.engine == "pa") {
    const SurfaceRecipe* recipe = nullptr;
    for (const auto& x : recipes)
      if (x.name == r.surface) recipe = &x;
    if (!recipe) throw RequestError(422, "surface", "unknown surface '" + r.surface + "' for the PA engine");
    return pa_synthesize(*recipe, request_gamma(r, control_rate, 1.0), r.synth_seed, sample_rate);
  }
  if (!ckpt || !ckpt->has_control())
    throw RequestError(503, "", "no trained checkpoint with a control encoder is loaded");
  std::size_t label;
  try {
    label = ckpt->label_id(r.surface);
  } catch (const VocabularyError& e) {
    throw RequestError(422, "surface", e.what());
  }
  const auto gamma = request_gamma(r, ckpt->config.control_rate, ckpt->stats.gamma_peak);
  const auto u = control_noise(gamma.frames(), ckpt->config.gamma_dims, r.u_seed, ckpt->config.control_rate);
  return synthesize(label, gamma, u, r.synth_seed, *ckpt);
}

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;

  static HttpResponse json(const nlohmann::json& j, int status = 200) { return {status, "application/json", j.dump(), {}}; }
  static HttpResponse error(int status, const std::string& message, const std::string& field = {}) {
    nlohmann::json j = {{"error", message}};
    if (!field.empty()) j["field"] = field;
    return json(j, status);
  }
};

class Service {
 public:
  Service(EngineConfig config, std::optional<Checkpoint> checkpoint, std::vector<SurfaceRecipe> recipes)
      : config_(std::move(config)), checkpoint_(std::move(checkpoint)), recipes_(std::move(recipes)) {
    config_hash_ = config_.hash();
  }

  const EngineConfig& config() const noexcept { return config_; }
  const std::string& config_hash() const noexcept { return config_hash_; }

  HttpResponse surfaces() const {
    nlohmann::json pa = nlohmann::json::array();
    for (const auto& r : recipes_) pa.push_back(r.name);
    return HttpResponse::json({{"surfaces", checkpoint_ ? nlohmann::json(checkpoint_->config.vocabulary) : nlohmann::json::array()},
                               {"pa_surfaces", pa},
                               {"checkpoint_loaded", checkpoint_.has_value()}});
  }

  HttpResponse health() const {
    return HttpResponse::json({{"status", "ok"},
                               {"version", FOOTFALL_VERSION},
                               {"config_hash", config_hash_},
                               {"checkpoint_loaded", checkpoint_.has_value()},
                               {"sample_rate", config_.model.sample_rate},
                               {"control_rate", config_.model.control_rate}});
  }

  HttpResponse grf(const std::string& body) const {
    return guard([&] {
      const auto j = service_detail::parse_body(body);
      GRFParams p;
      try {
        p = grf_params_from_json(j);
        p.validate();
      } catch (const Error& e) {
        throw RequestError(400, "grf", e.what());
      }
      const double duration = service_detail::field<double>(j, "duration", 1.0);
      if (!(duration > 0.0) || duration > config_.max_duration)
        throw RequestError(400, "duration", "duration must lie in (0, " + std::to_string(config_.max_duration) + "]");
      const auto seed = service_detail::field<std::uint64_t>(j, "seed", 0);
      return HttpResponse::json(to_json(grf_curve(p, duration, config_.model.control_rate, seed)));
    });
  }

  HttpResponse synthesize(const std::string& body) const {
    return guard([&] {
      const auto req = parse_synth_request(service_detail::parse_body(body), config_.max_duration,
                                           config_.model.control_rate);
      const auto clip = run_synth_request(req, checkpoint_ ? &*checkpoint_ : nullptr, recipes_,
                                          config_.model.sample_rate, config_.model.control_rate);
      HttpResponse r{200, "audio/wav", encode_wav(clip), {}};
      r.headers.emplace_back("X-Envelope", "/api/analyze");
      r.headers.emplace_back("X-Config-Hash", config_hash_);
      r.headers.emplace_back("X-Engine", req.engine);
      return r;
    });
  }

  HttpResponse analyze(const std::string& body) const {
    return guard([&] {
      AudioClip clip;
      try {
        clip = decode_wav(body);
      } catch (const Error& e) {
        throw RequestError(400, "body", std::string("body is not a supported WAV file: ") + e.what());
      }
      const auto cfg = config_.analysis();
      if (clip.sample_rate != cfg.sample_rate) clip = resample(clip, cfg.sample_rate);
      return HttpResponse::json(to_json(control_proxy(clip, cfg)));
    });
  }

  void install(httplib::Server& server) const {
    auto send = [](httplib::Response& res, const HttpResponse& r) {
      res.status = r.status;
      for (const auto& [k, v] : r.headers) res.set_header(k, v);
      res.set_content(r.body, r.content_type);
    };
    server.Get("/api/surfaces", [this, send](const httplib::Request&, httplib::Response& res) { send(res, surfaces()); });
    server.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
    server.Post("/api/grf", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, grf(req.body)); });
    server.Post("/api/synthesize",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, synthesize(req.body)); });
    server.Post("/api/analyze",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, analyze(req.body)); });
    if (!config_.static_dir.empty() && std::filesystem::is_directory(config_.static_dir))
      server.set_mount_point("/", config_.static_dir);
  }

 private:
  template <typename F>
  HttpResponse guard(F&& f) const {
    try {
      return f();
    } catch (const RequestError& e) {
      return HttpResponse::error(e.status(), e.what(), e.field());
    } catch (const ContractViolation& e) {
      return HttpResponse::error(400, e.what());
    } catch (const std::exception& e) {
      return HttpResponse::error(500, e.what());
    }
  }

  EngineConfig config_;
  std::optional<Checkpoint> checkpoint_;
  std::vector<SurfaceRecipe> recipes_;
  std::string config_hash_;
};

}  // namespace footfall
