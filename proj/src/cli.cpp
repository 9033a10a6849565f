#include "svbrdf/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "svbrdf/datagen.hpp"
#include "svbrdf/gradcheck.hpp"
#include "svbrdf/network.hpp"
#include "svbrdf/png_io.hpp"
#include "svbrdf/render.hpp"
#include "svbrdf/trainer.hpp"

namespace svbrdf {
namespace {

ImageF center_crop(const ImageF& img, int n) {
  if (img.width < n || img.height < n)
    throw std::runtime_error("image smaller than " + std::to_string(n) + "x" +
                             std::to_string(n));
  int x0 = (img.width - n) / 2, y0 = (img.height - n) / 2;
  ImageF out(n, n, img.channels);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

ImageF load_input_png(const std::string& path) {
  PngImage png = read_png(path);
  double norm = png.bit_depth == 16 ? 65535.0 : 255.0;
  ImageF img(png.width, png.height, 3);
  for (int64_t p = 0; p < int64_t(png.width) * png.height; ++p)
    for (int c = 0; c < 3; ++c) {
      int src = png.channels >= 3 ? c : 0;
      img.data[size_t(p * 3 + c)] =
          real(double(png.samples[size_t(p * png.channels + src)]) / norm);
    }
  return img;
}

// One row of figure-style tiles: input | normal | diffuse | roughness |
// specular | re-render. Renders get display gamma; map encodings stay raw.
void write_map_grid(const std::string& path, const ImageF& input,
                    const SvbrdfMaps& maps) {
  const int res = maps.resolution;
  ImageF rerender = render_svbrdf(maps, FlashScene().to_config());
  struct Tile {
    const ImageF* img;
    bool gamma;
    int gray = -1;  // replicate this channel when >= 0
    bool normal_enc = false;
  };
  ImageF normal_enc(res, res, 3);
  for (int64_t p = 0; p < int64_t(res) * res; ++p)
    for (int c = 0; c < 3; ++c)
      normal_enc.data[size_t(p * 3 + c)] =
          real(clamp01(double(maps.normal.data[size_t(p * 3 + c)]) * 0.5 + 0.5));
  std::vector<Tile> tiles = {
      {&input, true},          {&normal_enc, false},
      {&maps.diffuse_albedo, false}, {&maps.roughness, false, 0},
      {&maps.specular_albedo, false}, {&rerender, true},
  };
  std::vector<uint8_t> out(size_t(res) * res * tiles.size() * 3);
  for (size_t t = 0; t < tiles.size(); ++t) {
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x)
        for (int c = 0; c < 3; ++c) {
          const Tile& tile = tiles[t];
          double v = tile.gray >= 0 ? double(tile.img->at(y, x, 0))
                                    : double(tile.img->at(y, x, c));
          v = clamp01(v);
          if (tile.gamma) v = std::pow(v, 1.0 / 2.2);
          size_t col = t * size_t(res) + size_t(x);
          out[(size_t(y) * res * tiles.size() + col) * 3 + size_t(c)] =
              uint8_t(std::lround(v * 255.0));
        }
  }
  write_png8(path, res * int(tiles.size()), res, 3, out);
}

int cmd_gradcheck() {
  std::vector<GradCheckResult> results = run_gradcheck();
  bool ok = true;
  double worst = 0.0;
  for (const GradCheckResult& r : results) {
    std::printf("%-10s checks=%-4d worst_rel=%.3e tol=%.0e %s\n",
                r.name.c_str(), r.checks, r.worst_rel, r.tolerance,
                r.pass() ? "pass" : "FAIL");
    ok = ok && r.pass();
    worst = std::max(worst, r.worst_rel);
  }
  std::printf("worst relative error: %.3e\n", worst);
  if (!ok) std::fprintf(stderr, "error: finite-difference check failed\n");
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"svbrdf-forge: SVBRDF capture pipeline (synthesis, training, "
               "prediction, relighting)"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value file overriding defaults");

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "synthesize a training dataset");
  std::string synth_out;
  DatasetSpec spec;
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--count", spec.count, "number of samples");
  synth->add_option("--seed", spec.seed, "master seed");
  synth->add_option("--resolution", spec.resolution, "train-time crop size");
  synth->add_option("--blend-fraction", spec.blend_fraction,
                    "fraction of samples blending two materials");

  // train ------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train on a dataset");
  std::string train_data, train_out;
  TrainConfig tc;
  bool paper_net = false;
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--iterations", tc.iterations, "training iterations");
  train_cmd->add_option("--lr", tc.lr, "Adam learning rate");
  train_cmd->add_option("--batch", tc.batch, "batch size");
  train_cmd->add_option("--seed", tc.seed, "master seed");
  train_cmd->add_option("--checkpoint-every", tc.checkpoint_every,
                        "periodic checkpoint cadence (0 = final only)");
  train_cmd->add_option("--resolution", tc.net.input_resolution,
                        "network input resolution");
  train_cmd->add_flag("--paper-config", paper_net,
                      "use the full-scale architecture");

  // predict ----------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "infer maps from one photo");
  std::string pr_ckpt, pr_input, pr_out;
  predict->add_option("--ckpt", pr_ckpt, "checkpoint path")->required();
  predict->add_option("--input", pr_input, "input PNG")->required();
  predict->add_option("--out", pr_out, "output directory")->required();

  // relight ----------------------------------------------------------------
  auto* relight = app.add_subcommand("relight", "turntable renders of a bundle");
  std::string rl_bundle, rl_out;
  int rl_frames = 24;
  double rl_radius = 1.0, rl_height = 1.5;
  relight->add_option("--bundle", rl_bundle, "SVBRDF bundle directory")
      ->required();
  relight->add_option("--out", rl_out, "output directory")->required();
  relight->add_option("--frames", rl_frames, "frame count");
  relight->add_option("--radius", rl_radius, "light orbit radius");
  relight->add_option("--height", rl_height, "light height above the plane");

  // eval -------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "RMSE evaluation report");
  std::string ev_ckpt, ev_data, ev_out;
  bool ev_baseline = false;
  eval_cmd->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data", ev_data, "dataset directory")->required();
  eval_cmd->add_option("--out", ev_out, "also write the report to this file");
  eval_cmd->add_flag("--baseline", ev_baseline,
                     "also report the dataset-mean-maps baseline");

  // mean-ablation ----------------------------------------------------------
  auto* abl = app.add_subcommand(
      "mean-ablation", "average-color toy task, global track vs plain U-Net");
  MeanAblationConfig ac;
  std::string abl_out;
  abl->add_option("--iterations", ac.iterations, "training iterations");
  abl->add_option("--resolution", ac.resolution, "image resolution");
  abl->add_option("--batch", ac.batch, "batch size");
  abl->add_option("--lr", ac.lr, "Adam learning rate");
  abl->add_option("--seed", ac.seed, "master seed");
  abl->add_option("--out", abl_out, "also write the report to this file");

  // gradcheck ----------------------------------------------------------------
  auto* gc = app.add_subcommand(
      "gradcheck", "finite-difference verification of every gradient");

  std::vector<std::string> argv_storage;
  argv_storage.push_back("svbrdf-forge");
  for (const std::string& a : args) argv_storage.push_back(a);
  std::vector<const char*> argv;
  for (const std::string& a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) {
      DatasetManifest man = synthesize_dataset(spec, synth_out);
      std::printf("wrote %d samples to %s\n", man.count, synth_out.c_str());
      std::printf("manifest_hash=%016llx\n",
                  (unsigned long long)manifest_hash(man));
    } else if (train_cmd->parsed()) {
      if (paper_net) {
        int res = tc.net.input_resolution;
        tc.net = NetworkConfig::paper();
        if (train_cmd->count("--resolution")) tc.net.input_resolution = res;
      }
      tc.out_dir = train_out;
      train(train_data, tc, [](int it, double loss) {
        if (it % 50 == 0) std::printf("iter %d loss %.6f\n", it, loss);
      });
      std::printf("final checkpoint: %s/model.svbf\n", train_out.c_str());
    } else if (predict->parsed()) {
      Weights weights = load_checkpoint(pr_ckpt);
      ImageF photo = center_crop(load_input_png(pr_input),
                                 weights.cfg.input_resolution);
      Rng unused(0);
      ForwardResult fr = network_forward(tonemap_log(photo), weights,
                                         DropoutMode::eval, unused);
      SvbrdfMaps maps =
          decode_prediction(tensor_to_image(fr.tape.value(fr.output)));
      std::filesystem::create_directories(pr_out);
      save_bundle(pr_out, maps, MaterialClass::paint, 0);
      write_map_grid(pr_out + "/grid.png", photo, maps);
      std::printf("wrote maps and grid.png to %s\n", pr_out.c_str());
    } else if (relight->parsed()) {
      Bundle bundle = load_bundle(rl_bundle);
      std::filesystem::create_directories(rl_out);
      double dist = std::sqrt(rl_radius * rl_radius + rl_height * rl_height);
      for (int f = 0; f < rl_frames; ++f) {
        double ang = 2.0 * kPi * double(f) / double(std::max(1, rl_frames));
        RenderConfig cfg;
        cfg.mode = RenderConfig::Mode::positional;
        cfg.light = Vec3(rl_radius * std::cos(ang), rl_radius * std::sin(ang),
                         rl_height);
        cfg.view = Vec3(0.0, 0.0, 2.144506920509559);
        cfg.light_intensity = 0.8 * kPi * dist * dist;
        cfg.include_falloff = true;
        char name[32];
        std::snprintf(name, sizeof(name), "/frame_%03d.png", f);
        save_ldr_preview(rl_out + name, render_svbrdf(bundle.maps, cfg));
      }
      std::printf("wrote %d frames to %s\n", rl_frames, rl_out.c_str());
    } else if (eval_cmd->parsed()) {
      Weights weights = load_checkpoint(ev_ckpt);
      EvalReport report = evaluate_rmse(weights, ev_data);
      std::string text = "# model\n" + report_to_string(report);
      if (ev_baseline) {
        SvbrdfMaps mean_maps =
            dataset_mean_maps(ev_data, weights.cfg.input_resolution);
        EvalReport base = evaluate_fixed_prediction(
            mean_maps, ev_data, weights.cfg.input_resolution);
        text += "# baseline\n" + report_to_string(base);
      }
      std::fputs(text.c_str(), stdout);
      if (!ev_out.empty()) {
        std::ofstream f(ev_out, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + ev_out);
        f << text;
      }
    } else if (abl->parsed()) {
      MeanAblationReport report = run_mean_ablation(ac, [](int it, double l) {
        if (it % 100 == 0) std::printf("iter %d loss %.6f\n", it, l);
      });
      std::string text = report_to_string(report);
      std::fputs(text.c_str(), stdout);
      if (!abl_out.empty()) {
        std::ofstream f(abl_out, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + abl_out);
        f << text;
      }
    } else if (gc->parsed()) {
      return cmd_gradcheck();
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace svbrdf
