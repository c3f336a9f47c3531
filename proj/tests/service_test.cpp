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

#include <thread>

#include "footfall/service.hpp"

namespace footfall {
namespace {

Checkpoint tiny_checkpoint() {
  ModelConfig m;
  m.hidden = 8;
  m.latent_dim = 16;
  m.bands = 9;
  m.ir_length = 17;
  m.vocabulary = {"dirt", "wood"};
  auto ckpt = Checkpoint::initialize(m, 3);
  ckpt.control = init_control<float>(ckpt.config, 4);
  return ckpt;
}

std::vector<SurfaceRecipe> recipes() { return load_recipes(std::string(FOOTFALL_DATA_DIR) + "/recipes.json"); }

Service make_service(bool with_checkpoint = true) {
  return Service(EngineConfig{}, with_checkpoint ? std::optional<Checkpoint>(tiny_checkpoint()) : std::nullopt,
                 recipes());
}

nlohmann::json body_of(const HttpResponse& r) { return nlohmann::json::parse(r.body); }

std::string header(const HttpResponse& r, const std::string& name) {
  for (const auto& [k, v] : r.headers)
    if (k == name) return v;
  return {};
}

TEST(SynthRequestParsing, Defaults) {
  const auto r = parse_synth_request({{"surface", "wood"}}, 30.0, 250);
  EXPECT_EQ(r.engine, "learned");
  EXPECT_EQ(r.duration, 1.0);
  ASSERT_TRUE(r.grf.has_value());
  EXPECT_FALSE(r.gamma.has_value());
}

TEST(SynthRequestParsing, FieldErrorsNameTheField) {
  auto expect_field = [](const nlohmann::json& j, const std::string& field) {
    try {
      parse_synth_request(j, 30.0, 250);
      FAIL() << "accepted " << j.dump();
    } catch (const RequestError& e) {
      EXPECT_EQ(e.status(), 400);
      EXPECT_EQ(e.field(), field) << j.dump();
    }
  };
  expect_field(nlohmann::json::object(), "surface");
  expect_field({{"surface", 3}}, "surface");
  expect_field({{"surface", "wood"}, {"engine", "gan"}}, "engine");
  expect_field({{"surface", "wood"}, {"duration", 31.0}}, "duration");
  expect_field({{"surface", "wood"}, {"duration", -1.0}}, "duration");
  expect_field({{"surface", "wood"}, {"duration", "long"}}, "duration");
  expect_field({{"surface", "wood"}, {"gamma", {0.1, -0.5}}}, "gamma");
  expect_field({{"surface", "wood"}, {"gamma", {0.1, "x"}}}, "gamma");
  expect_field({{"surface", "wood"}, {"gamma", nlohmann::json::array()}}, "gamma");
  expect_field({{"surface", "wood"}, {"gamma", std::vector<double>(7501, 0.1)}}, "gamma");
  expect_field({{"surface", "wood"}, {"grf", {{"jitter", 0.5}}}}, "grf");
  expect_field({{"surface", "wood"}, {"grf", {{"levels", {0.1, 1, 1, 1, 0}}}}}, "grf");
}

TEST(SynthRequestParsing, ExplicitGammaSetsDuration) {
  const auto r = parse_synth_request({{"surface", "wood"}, {"gamma", std::vector<double>(7500, 0.2)}}, 30.0, 250);
  EXPECT_DOUBLE_EQ(r.duration, 30.0);
}

TEST(ServiceHandlers, SurfacesListsVocabularyAndRecipes) {
  const auto j = body_of(make_service().surfaces());
  EXPECT_EQ(j.at("surfaces"), nlohmann::json({"dirt", "wood"}));
  EXPECT_EQ(j.at("pa_surfaces").size(), 4u);
  EXPECT_EQ(body_of(make_service(false).surfaces()).at("surfaces").size(), 0u);
}

TEST(ServiceHandlers, HealthReportsStableConfigHash) {
  const auto service = make_service();
  const auto a = body_of(service.health()), b = body_of(service.health());
  EXPECT_EQ(a.at("config_hash"), EngineConfig{}.hash());
  EXPECT_EQ(a.at("config_hash"), b.at("config_hash"));
  EXPECT_EQ(a.at("version"), FOOTFALL_VERSION);
}

TEST(ServiceHandlers, GrfBoundaryInvariant) {
  const auto r = make_service().grf(R"({"period": 0.5, "duration": 1})");
  ASSERT_EQ(r.status, 200);
  const auto g = control_signal_from_json(body_of(r));
  ASSERT_EQ(g.frames(), 250u);
  EXPECT_EQ(g.values.front(), 0.0);
  EXPECT_EQ(g.values.back(), 0.0);
}

TEST(ServiceHandlers, GrfRejectsBadInput) {
  const auto service = make_service();
  EXPECT_EQ(service.grf("{not json").status, 400);
  EXPECT_EQ(service.grf(R"({"jitter": 0.9})").status, 400);
  const auto r = service.grf(R"({"duration": 100})");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(body_of(r).at("field"), "duration");
}

TEST(ServiceHandlers, SynthesizeIsByteIdentical) {
  const auto service = make_service();
  const std::string body = R"({"surface": "wood", "duration": 1, "u_seed": 3, "synth_seed": 4})";
  const auto a = service.synthesize(body), b = service.synthesize(body);
  ASSERT_EQ(a.status, 200) << a.body;
  EXPECT_EQ(a.content_type, "audio/wav");
  EXPECT_EQ(a.body, b.body);
  EXPECT_EQ(decode_wav(a.body).samples.size(), 16000u);
  EXPECT_EQ(header(a, "X-Envelope"), "/api/analyze");
  EXPECT_EQ(header(a, "X-Config-Hash"), service.config_hash());
  const auto c = service.synthesize(R"({"surface": "wood", "duration": 1, "u_seed": 3, "synth_seed": 5})");
  EXPECT_NE(a.body, c.body);
}

TEST(ServiceHandlers, PaEngineWorksWithoutCheckpoint) {
  const auto service = make_service(false);
  const std::string body = R"({"surface": "gravel", "engine": "pa", "duration": 0.5, "synth_seed": 2})";
  const auto a = service.synthesize(body);
  ASSERT_EQ(a.status, 200) << a.body;
  EXPECT_EQ(a.body, service.synthesize(body).body);
  EXPECT_EQ(decode_wav(a.body).samples.size(), 8000u);
  EXPECT_EQ(header(a, "X-Engine"), "pa");
}

TEST(ServiceHandlers, ErrorStatuses) {
  EXPECT_EQ(make_service(false).synthesize(R"({"surface": "wood"})").status, 503);
  EXPECT_EQ(make_service().synthesize(R"({"surface": "snow"})").status, 422);
  EXPECT_EQ(make_service().synthesize(R"({"surface": "snow", "engine": "pa"})").status, 422);
  EXPECT_EQ(make_service().synthesize("[1, 2]").status, 400);
  EXPECT_EQ(make_service().synthesize(R"({"surface": "wood", "gamma": [NaN]})").status, 400);
}

TEST(ServiceHandlers, AnalyzeReturnsControlSignal) {
  const auto service = make_service();
  const auto wav = service.synthesize(R"({"surface": "dirt", "engine": "pa", "duration": 1})").body;
  const auto r = service.analyze(wav);
  ASSERT_EQ(r.status, 200) << r.body;
  const auto g = control_signal_from_json(body_of(r));
  EXPECT_EQ(g.frames(), 250u);
  EXPECT_EQ(g.control_rate, 250.0);
  EXPECT_EQ(service.analyze("garbage").status, 400);
}

TEST(HttpServer, EndToEndOnEphemeralPort) {
  const auto service = make_service();
  httplib::Server server;
  service.install(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/api/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(nlohmann::json::parse(health->body).at("config_hash"), service.config_hash());

  auto surfaces = client.Get("/api/surfaces");
  ASSERT_TRUE(surfaces);
  EXPECT_EQ(nlohmann::json::parse(surfaces->body).at("surfaces").size(), 2u);

  auto grf = client.Post("/api/grf", R"({"period": 0.5, "duration": 1})", "application/json");
  ASSERT_TRUE(grf);
  EXPECT_EQ(nlohmann::json::parse(grf->body).at("values").size(), 250u);

  const std::string req = R"({"surface": "dirt", "duration": 0.5, "u_seed": 1, "synth_seed": 1})";
  auto s1 = client.Post("/api/synthesize", req, "application/json");
  auto s2 = client.Post("/api/synthesize", req, "application/json");
  ASSERT_TRUE(s1 && s2);
  EXPECT_EQ(s1->status, 200);
  EXPECT_EQ(s1->get_header_value("Content-Type"), "audio/wav");
  EXPECT_EQ(s1->get_header_value("X-Envelope"), "/api/analyze");
  EXPECT_EQ(s1->body, s2->body);

  auto analyzed = client.Post("/api/analyze", s1->body, "audio/wav");
  ASSERT_TRUE(analyzed);
  EXPECT_EQ(analyzed->status, 200);
  EXPECT_EQ(nlohmann::json::parse(analyzed->body).at("values").size(), 125u);

  auto bad = client.Post("/api/synthesize", R"({"surface": "snow"})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 422);

  auto index = client.Get("/");
  ASSERT_TRUE(index);
  EXPECT_EQ(index->status, 200);
  EXPECT_NE(index->body.find("/api/synthesize"), std::string::npos);

  server.stop();
  thread.join();
}

}  // namespace
}  // namespace footfall
