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

#include <filesystem>
#include <fstream>
#include <limits>

#include "footfall/training.hpp"

namespace footfall {
namespace {

namespace fs = std::filesystem;

ModelConfig tiny_model() {
  ModelConfig m;
  m.hidden = 8;
  m.latent_dim = 16;
  m.bands = 9;
  m.ir_length = 17;
  return m;
}

TrainConfig tiny_train(std::size_t steps) {
  TrainConfig t;
  t.steps = steps;
  t.batch_size = 2;
  t.excerpt_seconds = 0.2;
  return t;
}

Dataset tiny_dataset(std::uint64_t seed = 4) {
  std::vector<LabeledClip> clips;
  for (std::size_t i = 0; i < 4; ++i) clips.push_back({desk_clip(i % 2, 100 + i, 0.5), i % 2});
  return build_dataset(clips, {"dirt", "grass"}, tiny_model().analysis(), seed);
}

class ManifestDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("footfall_training_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

TEST_F(ManifestDir, ThreeFilesGiveThreeItems) {
  write_wav(dir / "a.wav", desk_clip(0, 1, 0.5));
  write_wav(dir / "b.wav", desk_clip(3, 2, 0.75));
  AudioClip hi = desk_clip(1, 3, 0.4, 32000);
  write_wav(dir / "c.wav", hi);
  std::ofstream(dir / "m.jsonl") << R"({"path": "a.wav", "label": "dirt"})" << '\n'
                                 << R"({"path": "b.wav", "label": "wood"})" << '\n'
                                 << R"({"path": "c.wav", "label": "dirt"})" << '\n';
  const auto cfg = tiny_model().analysis();
  const auto ds = build_dataset(load_manifest(dir / "m.jsonl"), cfg, 9);
  ASSERT_EQ(ds.items.size(), 3u);
  EXPECT_EQ(ds.vocabulary, (std::vector<std::string>{"dirt", "wood"}));
  EXPECT_EQ(ds.items[1].label, 1u);
  EXPECT_EQ(ds.items[2].label, 0u);
  for (const auto& item : ds.items) {
    EXPECT_EQ(item.clip.sample_rate, 16000);
    EXPECT_EQ(item.clip.samples.size(), item.gamma.frames() * 64);
    EXPECT_EQ(item.u.frames(), item.gamma.frames());
    EXPECT_NEAR(peak(item.clip.samples), 1.0, 1e-6);
    for (double g : item.gamma.values) EXPECT_GE(g, 0.0);
    for (double u : item.u.values) EXPECT_LE(std::fabs(u), 1.0);
  }
  EXPECT_EQ(ds.items[0].gamma.frames(), 125u);
  EXPECT_EQ(ds.items[2].gamma.frames(), 100u);
}

TEST_F(ManifestDir, SilentFileRetainedWithZeroGamma) {
  write_wav(dir / "quiet.wav", AudioClip{std::vector<float>(4000, 0.f), 16000});
  std::ofstream(dir / "m.jsonl") << R"({"path": "quiet.wav", "label": "dirt"})" << '\n';
  const auto ds = build_dataset(load_manifest(dir / "m.jsonl"), tiny_model().analysis(), 1);
  ASSERT_EQ(ds.items.size(), 1u);
  for (double g : ds.items[0].gamma.values) EXPECT_EQ(g, 0.0);
}

TEST_F(ManifestDir, UnreadableFilesSkippedUnlessAllFail) {
  write_wav(dir / "ok.wav", desk_clip(0, 1, 0.3));
  std::ofstream(dir / "bad.wav") << "not a wav file";
  std::ofstream(dir / "m.jsonl") << R"({"path": "bad.wav", "label": "dirt"})" << '\n'
                                 << R"({"path": "ok.wav", "label": "dirt"})" << '\n';
  const auto ds = build_dataset(load_manifest(dir / "m.jsonl"), tiny_model().analysis(), 1);
  EXPECT_EQ(ds.items.size(), 1u);
  EXPECT_EQ(ds.warnings.size(), 1u);
  std::ofstream(dir / "only_bad.jsonl") << R"({"path": "bad.wav", "label": "dirt"})" << '\n';
  EXPECT_THROW(build_dataset(load_manifest(dir / "only_bad.jsonl"), tiny_model().analysis(), 1), ConfigError);
}

TEST(Dataset, ControlNoiseIsSeedDeterministic) {
  const auto a = tiny_dataset(4), b = tiny_dataset(4), c = tiny_dataset(5);
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    EXPECT_EQ(a.items[i].u.values, b.items[i].u.values);
    EXPECT_EQ(a.items[i].gamma.values, b.items[i].gamma.values);
    EXPECT_NE(a.items[i].u.values, c.items[i].u.values);
  }
  EXPECT_NE(a.items[0].u.values, a.items[1].u.values);
}

TEST(Dataset, EmptyInputRejected) {
  EXPECT_THROW(build_dataset(std::vector<LabeledClip>{}, {"dirt"}, tiny_model().analysis(), 1), ConfigError);
  EXPECT_THROW(build_dataset({{desk_clip(0, 1, 0.3), 2}}, {"dirt"}, tiny_model().analysis(), 1), VocabularyError);
}

TEST(Stage1, ZeroStepsEqualsInitialization) {
  const auto ds = tiny_dataset();
  const auto tc = tiny_train(0);
  const auto result = train_stage1(ds, tiny_model(), tc);
  auto cfg = tiny_model();
  cfg.vocabulary = ds.vocabulary;
  const auto init = Checkpoint::initialize(cfg, tc.init_seed);
  EXPECT_TRUE(result.losses.empty());
  const auto a = parameters(result.checkpoint.encoder), b = parameters(init.encoder);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value().storage(), b[i].value().storage());
  const auto c = parameters(result.checkpoint.decoder), d = parameters(init.decoder);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i].value().storage(), d[i].value().storage());
}

TEST(Stage1, LossTraceReproducibleAndFinite) {
  const auto ds = tiny_dataset();
  const auto a = train_stage1(ds, tiny_model(), tiny_train(4));
  const auto b = train_stage1(ds, tiny_model(), tiny_train(4));
  ASSERT_EQ(a.losses.size(), 4u);
  EXPECT_EQ(loss_csv(a.losses), loss_csv(b.losses));
  EXPECT_EQ(a.config_hash, b.config_hash);
  for (double l : a.losses) EXPECT_TRUE(std::isfinite(l));
  EXPECT_EQ(a.checkpoint.decoder.out.w.value().storage(), b.checkpoint.decoder.out.w.value().storage());
  EXPECT_EQ(a.checkpoint.stats.mfcc_mean.size(), 13u);
  for (float s : a.checkpoint.stats.mfcc_std) EXPECT_GT(s, 0.f);
  EXPECT_TRUE(a.checkpoint.training.contains("stage1"));
}

TEST(Stage1, StepCallbackSeesEveryStep) {
  std::vector<std::size_t> seen;
  train_stage1(tiny_dataset(), tiny_model(), tiny_train(3), [&](std::size_t s, double) { seen.push_back(s); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Stage1, NonFiniteLossAborts) {
  auto tc = tiny_train(2);
  auto ds = tiny_dataset();
  for (auto& item : ds.items) item.clip.samples[10] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(train_stage1(ds, tiny_model(), tc), TrainingError);
}

TEST(Stage2, LeavesStage1WeightsUntouched) {
  const auto ds = tiny_dataset();
  const auto s1 = train_stage1(ds, tiny_model(), tiny_train(2)).checkpoint;
  const auto before = s1.to_tensor_file();
  const auto s2 = train_stage2(ds, s1, tiny_train(5));
  ASSERT_TRUE(s2.checkpoint.has_control());
  EXPECT_EQ(s2.losses.size(), 5u);
  const auto e1 = parameters(s1.encoder), e2 = parameters(s2.checkpoint.encoder);
  for (std::size_t i = 0; i < e1.size(); ++i) EXPECT_EQ(e1[i].value().storage(), e2[i].value().storage());
  const auto d1 = parameters(s1.decoder), d2 = parameters(s2.checkpoint.decoder);
  for (std::size_t i = 0; i < d1.size(); ++i) EXPECT_EQ(d1[i].value().storage(), d2[i].value().storage());
  EXPECT_EQ(s1.to_tensor_file().tensors.size(), before.tensors.size());
  EXPECT_FALSE(s1.has_control());
  EXPECT_GT(s2.checkpoint.stats.gamma_std[0], 0.f);
  EXPECT_EQ(loss_csv(s2.losses), loss_csv(train_stage2(ds, s1, tiny_train(5)).losses));
}

TEST(Stage2, VocabularyMismatchIsConfigError) {
  const auto ds = tiny_dataset();
  const auto s1 = train_stage1(ds, tiny_model(), tiny_train(0)).checkpoint;
  auto other = ds;
  other.vocabulary = {"grass", "dirt"};
  EXPECT_THROW(train_stage2(other, s1, tiny_train(1)), ConfigError);
}

TEST(Stage2, OracleInjectionGivesZeroLoss) {
  const auto ds = tiny_dataset();
  const auto s1 = train_stage1(ds, tiny_model(), tiny_train(0)).checkpoint;
  const auto z = encode_audio(ds.items[0].clip, s1);
  ad::Tape<float> tape;
  const ad::Tensor<float> t(ad::Shape{z.frames, z.dims}, z.values);
  auto loss = ad::mse(tape, ad::Var<float>::constant(t), t);
  EXPECT_EQ(loss.value()[0], 0.0f);
}

TEST(LossCsv, Format) {
  EXPECT_EQ(loss_csv({0.5, 0.25}), "step,loss\n0,0.5\n1,0.25\n");
  const auto [head, tail] = smoothed_endpoints({4, 4, 1, 1}, 2);
  EXPECT_EQ(head, 4.0);
  EXPECT_EQ(tail, 1.0);
}

TEST(TrainConfig, ExcerptMustCoverWholeFrames) {
  auto tc = tiny_train(1);
  EXPECT_EQ(tc.excerpt_frames(250), 50u);
  tc.excerpt_seconds = 0.0021;
  EXPECT_THROW(tc.excerpt_frames(250), ConfigError);
  tc = tiny_train(1);
  tc.batch_size = 0;
  EXPECT_THROW(tc.validate(), ConfigError);
}

}  // namespace
}  // namespace footfall
