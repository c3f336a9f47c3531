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

// footfall: command-line front end for analysis, procedural baseline
// synthesis, training, learned synthesis, evaluation and the HTTP service.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "footfall/audio.hpp"
#include "footfall/config.hpp"
#include "footfall/corpus.hpp"
#include "footfall/dsp.hpp"
#include "footfall/farnell.hpp"
#include "footfall/metrics.hpp"
#include "footfall/models.hpp"
#include "footfall/service.hpp"
#include "footfall/training.hpp"

namespace fs = std::filesystem;
using namespace footfall;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::vector<AudioClip> read_wav_dir(const std::string& dir, int rate) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no .wav files in " + dir);
  std::vector<AudioClip> clips;
  for (const auto& f : files) {
    auto clip = read_wav(f);
    if (clip.sample_rate != rate) clip = resample(clip, rate);
    clips.push_back(std::move(clip));
  }
  return clips;
}

void log_run(const EngineConfig& cfg, const std::string& what, const nlohmann::json& seeds) {
  std::cerr << "[footfall] " << what << " config_hash=" << cfg.hash() << " seeds=" << seeds.dump() << '\n';
}

// Options shared by the commands that take a GRF curve.
struct GrfOptions {
  double period = 0.5;
  std::vector<double> fractions{0.3, 0.4, 0.3};
  std::vector<double> levels{0.0, 1.0, 0.6, 0.9, 0.0};
  double jitter = 0.0;
  double duration = 1.0;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--period", period, "Step period in seconds")->capture_default_str();
    app->add_option("--fractions", fractions, "Heel, roll and ball fractions")->expected(3);
    app->add_option("--levels", levels, "Start, heel peak, valley, ball peak and end levels")->expected(5);
    app->add_option("--jitter", jitter, "Per-period timing jitter in [0, 0.2]")->capture_default_str();
    app->add_option("--duration", duration, "Duration in seconds")->capture_default_str();
    app->add_option("--seed", seed, "Jitter seed")->capture_default_str();
  }

  GRFParams params() const {
    GRFParams p;
    p.step_period = period;
    std::copy(fractions.begin(), fractions.end(), p.segment_fractions.begin());
    std::copy(levels.begin(), levels.end(), p.levels.begin());
    p.jitter = jitter;
    return p;
  }
};

ControlSignal gamma_from_options(const std::string& gamma_path, const GrfOptions& grf, int control_rate,
                                 double grf_scale) {
  if (!gamma_path.empty()) {
    auto g = control_signal_from_json(read_json(gamma_path));
    if (g.control_rate != control_rate)
      throw ContractViolation("gamma file control rate must be " + std::to_string(control_rate));
    return g;
  }
  auto g = grf_curve(grf.params(), grf.duration, control_rate, grf.seed);
  for (auto& v : g.values) v *= grf_scale;
  return g;
}

TrainConfig train_overrides(TrainConfig t, const std::optional<std::size_t>& steps,
                            const std::optional<std::size_t>& batch, const std::optional<double>& lr,
                            const std::optional<std::uint64_t>& seed) {
  if (steps) t.steps = *steps;
  if (batch) t.batch_size = *batch;
  if (lr) t.learning_rate = *lr;
  if (seed) {
    t.init_seed = *seed;
    t.data_seed = derive_key(*seed, 1);
    t.synth_seed = derive_key(*seed, 2);
  }
  return t;
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"footfall: procedural and learned footstep synthesis"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "Key = value config file (default: $PROVE_CONFIG)");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Control proxy of a WAV file as control-signal JSON");
  std::string analyze_in, analyze_out;
  analyze->add_option("--in", analyze_in, "Input WAV")->required();
  analyze->add_option("--out", analyze_out, "Output JSON (default stdout)");

  // grf
  auto* grf = app.add_subcommand("grf", "GRF control curve as control-signal JSON");
  GrfOptions grf_opts;
  grf_opts.add(grf);
  std::string grf_out;
  grf->add_option("--out", grf_out, "Output JSON (default stdout)");

  // synth-pa
  auto* synth_pa = app.add_subcommand("synth-pa", "Procedural baseline synthesis to WAV");
  GrfOptions pa_grf;
  pa_grf.add(synth_pa);
  std::string pa_surface, pa_gamma, pa_out, pa_recipes;
  std::uint64_t pa_seed = 0;
  synth_pa->add_option("--surface", pa_surface, "Recipe name")->required();
  synth_pa->add_option("--gamma", pa_gamma, "Control-signal JSON (overrides the GRF options)");
  synth_pa->add_option("--synth-seed", pa_seed, "Noise seed")->capture_default_str();
  synth_pa->add_option("--recipes", pa_recipes, "Recipe JSON file");
  synth_pa->add_option("--out", pa_out, "Output WAV")->required();

  // corpus
  auto* corpus = app.add_subcommand("corpus", "Write the synthetic desk corpus with a manifest");
  std::string corpus_out;
  DeskCorpusSpec corpus_spec;
  corpus->add_option("--out", corpus_out, "Output directory")->required();
  corpus->add_option("--clips", corpus_spec.clips, "Number of clips")->capture_default_str();
  corpus->add_option("--seconds", corpus_spec.seconds, "Clip length")->capture_default_str();
  corpus->add_option("--seed", corpus_spec.seed, "Corpus seed")->capture_default_str();

  // train-stage1 / train-stage2
  std::optional<std::size_t> steps, batch;
  std::optional<double> lr;
  std::optional<std::uint64_t> train_seed;
  std::uint64_t dataset_seed = 0;
  auto add_train = [&](CLI::App* cmd) {
    cmd->add_option("--steps", steps, "Optimizer steps");
    cmd->add_option("--batch", batch, "Batch size");
    cmd->add_option("--lr", lr, "Learning rate");
    cmd->add_option("--seed", train_seed, "Derives the init, batch and synthesis seeds");
    cmd->add_option("--dataset-seed", dataset_seed, "Seed for the control noise u")->capture_default_str();
  };
  auto* stage1 = app.add_subcommand("train-stage1", "Train the audio autoencoder");
  std::string s1_manifest, s1_out, s1_loss;
  stage1->add_option("--manifest", s1_manifest, "JSON-lines manifest")->required();
  stage1->add_option("--out", s1_out, "Output checkpoint")->required();
  stage1->add_option("--loss-csv", s1_loss, "Loss trace CSV");
  add_train(stage1);
  auto* stage2 = app.add_subcommand("train-stage2", "Train the control encoder on a stage 1 checkpoint");
  std::string s2_manifest, s2_in, s2_out, s2_loss;
  stage2->add_option("--manifest", s2_manifest, "JSON-lines manifest")->required();
  stage2->add_option("--checkpoint", s2_in, "Stage 1 checkpoint")->required();
  stage2->add_option("--out", s2_out, "Output checkpoint")->required();
  stage2->add_option("--loss-csv", s2_loss, "Loss trace CSV");
  add_train(stage2);

  // synth
  auto* synth = app.add_subcommand("synth", "Learned synthesis from a control curve to WAV");
  GrfOptions synth_grf;
  synth_grf.add(synth);
  std::string synth_ckpt, synth_surface, synth_gamma, synth_out;
  std::uint64_t u_seed = 0, synth_seed = 0;
  synth->add_option("--checkpoint", synth_ckpt, "Stage 2 checkpoint");
  synth->add_option("--surface", synth_surface, "Surface label")->required();
  synth->add_option("--gamma", synth_gamma, "Control-signal JSON (overrides the GRF options)");
  synth->add_option("--u-seed", u_seed, "Control noise seed")->capture_default_str();
  synth->add_option("--synth-seed", synth_seed, "Synthesis noise seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output WAV")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "FAD and MMD between directories of WAV files");
  std::string set_a, set_b, eval_json, eval_csv, kernel;
  std::vector<std::string> extra_sets;
  eval->add_option("--set-a", set_a, "First directory")->required();
  eval->add_option("--set-b", set_b, "Second directory")->required();
  eval->add_option("--set", extra_sets, "Further directories");
  eval->add_option("--kernel", kernel, "MMD kernel: rbf or linear");
  eval->add_option("--out-json", eval_json, "Report JSON (default stdout)");
  eval->add_option("--out-csv", eval_csv, "Report CSV");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_ckpt, serve_host, serve_static, serve_recipes;
  std::optional<int> serve_port;
  serve->add_option("--checkpoint", serve_ckpt, "Stage 2 checkpoint (synthesis endpoints need it)");
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Port");
  serve->add_option("--static", serve_static, "Static files served at /");
  serve->add_option("--recipes", serve_recipes, "Recipe JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const EngineConfig cfg =
        load_engine_config(config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path));
    const int rate = cfg.model.sample_rate, control_rate = cfg.model.control_rate;

    if (*analyze) {
      auto clip = read_wav(analyze_in);
      if (clip.sample_rate != rate) clip = resample(clip, rate);
      write_text(analyze_out, to_json(control_proxy(clip, cfg.analysis())).dump());
    } else if (*grf) {
      log_run(cfg, "grf", {{"seed", grf_opts.seed}});
      write_text(grf_out, to_json(grf_curve(grf_opts.params(), grf_opts.duration, control_rate, grf_opts.seed)).dump());
    } else if (*synth_pa) {
      const auto recipes = load_recipes(pa_recipes.empty() ? cfg.recipes : pa_recipes);
      const auto gamma = gamma_from_options(pa_gamma, pa_grf, control_rate, 1.0);
      log_run(cfg, "synth-pa", {{"grf_seed", pa_grf.seed}, {"synth_seed", pa_seed}});
      write_wav(pa_out, pa_synthesize(find_recipe(recipes, pa_surface), gamma, pa_seed, rate));
    } else if (*corpus) {
      corpus_spec.sample_rate = rate;
      log_run(cfg, "corpus", {{"seed", corpus_spec.seed}});
      std::cout << write_desk_corpus(corpus_out, corpus_spec).string() << '\n';
    } else if (*stage1) {
      const auto tc = train_overrides(cfg.train, steps, batch, lr, train_seed);
      const auto ds = build_dataset(load_manifest(s1_manifest), cfg.analysis(), dataset_seed);
      for (const auto& w : ds.warnings) std::cerr << "warning: " << w << '\n';
      log_run(cfg, "train-stage1",
              {{"init", tc.init_seed}, {"data", tc.data_seed}, {"synth", tc.synth_seed}, {"dataset", dataset_seed}});
      const std::size_t every = std::max<std::size_t>(1, tc.steps / 20);
      auto result = train_stage1(ds, cfg.model, tc, [&](std::size_t s, double l) {
        if (s % every == 0 || s + 1 == tc.steps) std::cerr << "stage1 step " << s << " loss " << l << '\n';
      });
      result.checkpoint.save(s1_out);
      if (!s1_loss.empty()) write_loss_csv(s1_loss, result.losses);
      std::cerr << "stage1 done in " << result.seconds << " s, run hash " << result.config_hash << '\n';
    } else if (*stage2) {
      const auto tc = train_overrides(cfg.train, steps, batch, lr, train_seed);
      const auto ds = build_dataset(load_manifest(s2_manifest), cfg.analysis(), dataset_seed);
      for (const auto& w : ds.warnings) std::cerr << "warning: " << w << '\n';
      const auto s1 = Checkpoint::load(s2_in);
      log_run(cfg, "train-stage2", {{"init", tc.init_seed}, {"data", tc.data_seed}, {"dataset", dataset_seed}});
      const std::size_t every = std::max<std::size_t>(1, tc.steps / 20);
      auto result = train_stage2(ds, s1, tc, [&](std::size_t s, double l) {
        if (s % every == 0 || s + 1 == tc.steps) std::cerr << "stage2 step " << s << " loss " << l << '\n';
      });
      result.checkpoint.save(s2_out);
      if (!s2_loss.empty()) write_loss_csv(s2_loss, result.losses);
      std::cerr << "stage2 done in " << result.seconds << " s, run hash " << result.config_hash << '\n';
    } else if (*synth) {
      const std::string path = synth_ckpt.empty() ? cfg.checkpoint : synth_ckpt;
      if (path.empty()) throw ConfigError("synth: no checkpoint given (--checkpoint or 'checkpoint' in the config)");
      const auto ckpt = Checkpoint::load(path);
      if (!ckpt.has_control()) throw StageError("checkpoint has no control encoder; run train-stage2 first");
      const auto gamma = gamma_from_options(synth_gamma, synth_grf, ckpt.config.control_rate, ckpt.stats.gamma_peak);
      const auto u = control_noise(gamma.frames(), ckpt.config.gamma_dims, u_seed, ckpt.config.control_rate);
      log_run(cfg, "synth", {{"grf_seed", synth_grf.seed}, {"u_seed", u_seed}, {"synth_seed", synth_seed}});
      write_wav(synth_out, synthesize(ckpt.label_id(synth_surface), gamma, u, synth_seed, ckpt));
    } else if (*eval) {
      const Kernel k = kernel_from_string(kernel.empty() ? cfg.kernel : kernel);
      std::vector<std::string> dirs{set_a, set_b};
      dirs.insert(dirs.end(), extra_sets.begin(), extra_sets.end());
      std::vector<EmbeddingSet> sets;
      for (const auto& d : dirs) {
        auto set = embed_clips(read_wav_dir(d, rate), d);
        for (const auto& w : set.warnings) std::cerr << "warning: " << d << ": " << w << '\n';
        sets.push_back(std::move(set));
      }
      const auto report = evaluate(sets, k);
      std::fprintf(stderr, "%-32s %-32s %12s %12s\n", "set a", "set b", "fad", "mmd2");
      for (const auto& p : report.pairs)
        std::fprintf(stderr, "%-32s %-32s %12.6f %12.6f\n", p.a.c_str(), p.b.c_str(), p.fad, p.mmd2);
      write_text(eval_json, to_json(report).dump(2));
      if (!eval_csv.empty()) write_text(eval_csv, to_csv(report));
    } else if (*serve) {
      EngineConfig scfg = cfg;
      if (!serve_host.empty()) scfg.host = serve_host;
      if (serve_port) scfg.port = *serve_port;
      if (!serve_static.empty()) scfg.static_dir = serve_static;
      if (!serve_recipes.empty()) scfg.recipes = serve_recipes;
      const std::string path = serve_ckpt.empty() ? scfg.checkpoint : serve_ckpt;
      std::optional<Checkpoint> ckpt;
      if (!path.empty()) ckpt = Checkpoint::load(path);
      Service service(scfg, std::move(ckpt), load_recipes(scfg.recipes));
      httplib::Server server;
      service.install(server);
      g_server = &server;
      std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
      std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
      std::cerr << "[footfall] serving on http://" << scfg.host << ":" << scfg.port << " config_hash=" << service.config_hash()
                << '\n';
      if (!server.listen(scfg.host, scfg.port)) throw Error("cannot bind " + scfg.host + ":" + std::to_string(scfg.port));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
