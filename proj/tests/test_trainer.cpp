#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "svbrdf/core.hpp"
#include "svbrdf/datagen.hpp"
#include "svbrdf/network.hpp"
#include "svbrdf/render.hpp"
#include "svbrdf/trainer.hpp"

using namespace svbrdf;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

std::filesystem::path fresh_dir(const char* leaf) {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor tensor1d(const std::vector<double>& vals) {
  Tensor t({int(vals.size())});
  for (size_t i = 0; i < vals.size(); ++i) t.data[i] = real(vals[i]);
  return t;
}

NetworkConfig tiny_config() {
  NetworkConfig cfg;
  cfg.input_resolution = 16;
  cfg.stem_features = 8;
  cfg.scale_features = {8, 16, 16};
  cfg.filter_size = 4;
  cfg.dropout_scales = 2;
  cfg.global_track = true;
  cfg.output_channels = 9;
  return cfg;
}

std::string synth_tiny_dataset(const char* leaf, int count, uint64_t seed,
                               int resolution) {
  std::string dir = fresh_dir(leaf).string();
  DatasetSpec spec;
  spec.count = count;
  spec.seed = seed;
  spec.resolution = resolution;
  synthesize_dataset(spec, dir);
  return dir;
}

SvbrdfMaps flat_material(int res, double diffuse, double specular,
                         double rough) {
  SvbrdfMaps maps(res);
  for (int64_t i = 0; i < int64_t(res) * res; ++i) {
    maps.normal.data[i * 3 + 0] = real(0);
    maps.normal.data[i * 3 + 1] = real(0);
    maps.normal.data[i * 3 + 2] = real(1);
    for (int c = 0; c < 3; ++c) {
      maps.diffuse_albedo.data[i * 3 + c] = real(diffuse);
      maps.specular_albedo.data[i * 3 + c] = real(specular);
    }
    maps.roughness.data[i] = real(rough);
  }
  return maps;
}

// CSV rows with the wallclock column dropped: the only nondeterministic field.
std::vector<std::string> loss_log_rows_sans_wallclock(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(f, line)) {
    size_t last = line.rfind(',');
    REQUIRE(last != std::string::npos);
    rows.push_back(line.substr(0, last));
  }
  return rows;
}

}  // namespace

TEST_CASE("adam first step has near-lr magnitude regardless of |g|") {
  const double lr = 1e-3;
  std::vector<Tensor> params{tensor1d({1.0, 2.0, 3.0, 4.0})};
  std::vector<Tensor> grads{tensor1d({1e-3, 1.0, -1e3, -1.0})};
  AdamState st = make_adam_state(params);
  std::vector<double> before;
  for (real v : params[0].data) before.push_back(double(v));

  adam_step(params, grads, st, lr);
  CHECK(st.t == 1);
  for (size_t i = 0; i < 4; ++i) {
    double delta = double(params[0].data[i]) - before[i];
    double g = double(grads[0].data[i]);
    CHECK(delta * g < 0.0);  // moves against the gradient
    // Storage rounding of p - update adds up to half an ulp of p (~2.4e-7
    // at p = 4) on top of the sub-lr true update.
    CHECK(std::abs(delta) >= 0.9 * lr);
    CHECK(std::abs(delta) <= lr * (1.0 + 1e-3));
  }
}

TEST_CASE("adam matches a bias-corrected reference over several steps") {
  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<Tensor> params{tensor1d({0.5, -1.0, 2.0})};
  AdamState st = make_adam_state(params);

  std::vector<double> ref = {0.5, -1.0, 2.0};
  std::vector<double> m(3, 0.0), v(3, 0.0);
  std::vector<std::vector<double>> step_grads = {
      {1.0, -2.0, 0.5}, {-0.3, 0.7, 0.1}, {2.0, 2.0, -4.0}};

  for (int t = 1; t <= 3; ++t) {
    std::vector<Tensor> grads{tensor1d(step_grads[size_t(t - 1)])};
    adam_step(params, grads, st, lr);
    for (size_t i = 0; i < 3; ++i) {
      double g = step_grads[size_t(t - 1)][i];
      m[i] = b1 * m[i] + (1 - b1) * g;
      v[i] = b2 * v[i] + (1 - b2) * g * g;
      double mhat = m[i] / (1 - std::pow(b1, t));
      double vhat = v[i] / (1 - std::pow(b2, t));
      ref[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  CHECK(st.t == 3);
  for (size_t i = 0; i < 3; ++i)
    CHECK(std::abs(double(params[0].data[i]) - ref[i]) <= 1e-5);
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  std::vector<Tensor> params{tensor1d({1.0, -2.0, 3.0})};
  std::vector<Tensor> grads{tensor1d({0.0, 0.0, 0.0})};
  AdamState st = make_adam_state(params);
  adam_step(params, grads, st, 1e-2);
  CHECK(st.t == 1);
  CHECK(double(params[0].data[0]) == 1.0);
  CHECK(double(params[0].data[1]) == -2.0);
  CHECK(double(params[0].data[2]) == 3.0);
  adam_step(params, grads, st, 1e-2);
  CHECK(st.t == 2);
}

TEST_CASE("adam updates identical tensors identically and rejects mismatches") {
  std::vector<Tensor> params{tensor1d({1.0, 2.0}), tensor1d({1.0, 2.0})};
  std::vector<Tensor> grads{tensor1d({0.3, -0.8}), tensor1d({0.3, -0.8})};
  AdamState st = make_adam_state(params);
  adam_step(params, grads, st, 1e-3);
  CHECK(params[0].data[0] == params[1].data[0]);
  CHECK(params[0].data[1] == params[1].data[1]);

  std::vector<Tensor> short_grads{tensor1d({0.3, -0.8})};
  CHECK_THROWS_AS(adam_step(params, short_grads, st, 1e-3),
                  std::invalid_argument);
  std::vector<Tensor> bad_shape{tensor1d({0.3, -0.8}), tensor1d({0.3})};
  CHECK_THROWS_AS(adam_step(params, bad_shape, st, 1e-3),
                  std::invalid_argument);
}

TEST_CASE("test split is every twentieth sample") {
  int count = 0;
  for (int i = 0; i < 100; ++i) {
    CHECK(is_test_sample(i) == (i % 20 == 19));
    count += is_test_sample(i);
  }
  CHECK(count == 5);
}

TEST_CASE("evaluation light list is frozen on disk") {
  std::vector<RenderConfig> live = evaluation_lights();
  REQUIRE(live.size() == 20);
  for (int i = 0; i < 10; ++i) {
    CHECK(live[size_t(i)].mode == RenderConfig::Mode::directional);
    CHECK(!live[size_t(i)].include_falloff);
    CHECK(live[size_t(i)].light_intensity == kPi);
  }
  for (int i = 10; i < 20; ++i) {
    CHECK(live[size_t(i)].mode == RenderConfig::Mode::positional);
    CHECK(live[size_t(i)].include_falloff);
  }

  std::vector<RenderConfig> disk = load_eval_lights("data/eval_lights.json");
  REQUIRE(disk.size() == live.size());
  for (size_t i = 0; i < live.size(); ++i) {
    CHECK(disk[i].mode == live[i].mode);
    CHECK(disk[i].light.x == live[i].light.x);
    CHECK(disk[i].light.y == live[i].light.y);
    CHECK(disk[i].light.z == live[i].light.z);
    CHECK(disk[i].view.x == live[i].view.x);
    CHECK(disk[i].view.y == live[i].view.y);
    CHECK(disk[i].view.z == live[i].view.z);
    CHECK(disk[i].light_intensity == live[i].light_intensity);
    CHECK(disk[i].include_falloff == live[i].include_falloff);
  }
}

TEST_CASE("evaluate_pair of identical maps is all zeros with unit best scale") {
  SvbrdfMaps gt = generate_base_material(MaterialClass::paint, 5, 16);
  EvalSample es = evaluate_pair(gt, gt, evaluation_lights());
  CHECK(es.rmse_normal == 0.0);
  CHECK(es.rmse_diffuse == 0.0);
  CHECK(es.rmse_specular == 0.0);
  CHECK(es.rmse_roughness == 0.0);
  CHECK(es.rmse_render == 0.0);
  // The grid point nearest 1.0 misses it by ~1e-16 of log-space rounding.
  CHECK(es.rmse_render_scaled <= 1e-12);
  CHECK(es.best_scale == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("constant roughness offset isolates the roughness RMSE") {
  SvbrdfMaps gt = flat_material(16, 0.4, 0.05, 0.3);
  SvbrdfMaps pred = flat_material(16, 0.4, 0.05, 0.4);
  EvalSample es = evaluate_pair(pred, gt, evaluation_lights());
  CHECK(es.rmse_normal == 0.0);
  CHECK(es.rmse_diffuse == 0.0);
  CHECK(es.rmse_specular == 0.0);
  CHECK(es.rmse_roughness == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(es.rmse_render > 0.0);
}

TEST_CASE("scale search recovers the inverse of a diffuse scaling") {
  SvbrdfMaps gt = generate_base_material(MaterialClass::paint, 9, 16);
  SvbrdfMaps pred = gt;
  for (real& v : pred.diffuse_albedo.data) v = real(double(v) * 0.27);

  EvalSample es = evaluate_pair(pred, gt, evaluation_lights());
  // 1/0.27 = 3.704 lands between the grid points 3.631 and 3.802.
  CHECK(es.best_scale >= 3.6);
  CHECK(es.best_scale <= 3.81);
  CHECK(es.rmse_render_scaled < es.rmse_render);
  CHECK(es.rmse_render_scaled <= 0.3 * es.rmse_render);

  SvbrdfMaps small = flat_material(8, 0.4, 0.05, 0.3);
  CHECK_THROWS_AS(evaluate_pair(small, gt, evaluation_lights()),
                  std::invalid_argument);
}

TEST_CASE("dataset mean maps average the train-split encodings") {
  std::string dir = synth_tiny_dataset("svbrdf_trainer_mean", 40, 21, 16);
  DatasetManifest man = load_manifest(dir + "/manifest.json");
  const int res = 16;
  const int off = (man.stored_resolution - res) / 2;

  ImageF acc(res, res, 9);
  std::vector<double> sums(acc.data.size(), 0.0);
  int64_t n = 0;
  for (int i = 0; i < man.count; ++i) {
    if (is_test_sample(i)) continue;
    Sample s = load_sample(dir, i);
    SvbrdfMaps sub(res);
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) {
        for (int c = 0; c < 3; ++c) {
          sub.normal.at(y, x, c) = s.gt.normal.at(off + y, off + x, c);
          sub.diffuse_albedo.at(y, x, c) =
              s.gt.diffuse_albedo.at(off + y, off + x, c);
          sub.specular_albedo.at(y, x, c) =
              s.gt.specular_albedo.at(off + y, off + x, c);
        }
        sub.roughness.at(y, x, 0) = s.gt.roughness.at(off + y, off + x, 0);
      }
    ImageF enc = maps_to_channels(sub);
    for (size_t k = 0; k < sums.size(); ++k) sums[k] += double(enc.data[k]);
    ++n;
  }
  REQUIRE(n == 38);
  for (size_t k = 0; k < sums.size(); ++k)
    acc.data[k] = real(sums[k] / double(n));
  SvbrdfMaps expect = channels_to_maps(acc);

  SvbrdfMaps got = dataset_mean_maps(dir, res);
  CHECK(got.resolution == res);
  double worst = 0.0;
  for (size_t i = 0; i < got.normal.data.size(); ++i)
    worst = std::max(worst, std::abs(double(got.normal.data[i]) -
                                     double(expect.normal.data[i])));
  for (size_t i = 0; i < got.diffuse_albedo.data.size(); ++i)
    worst = std::max(worst, std::abs(double(got.diffuse_albedo.data[i]) -
                                     double(expect.diffuse_albedo.data[i])));
  for (size_t i = 0; i < got.roughness.data.size(); ++i)
    worst = std::max(worst, std::abs(double(got.roughness.data[i]) -
                                     double(expect.roughness.data[i])));
  CHECK(worst == 0.0);
  CHECK_NOTHROW(validate_maps(got));

  EvalReport rep = evaluate_fixed_prediction(got, dir, res);
  REQUIRE(rep.samples.size() == 2);
  CHECK(rep.samples[0].index == 19);
  CHECK(rep.samples[1].index == 39);
  CHECK(rep.mean.index == 2);
  for (const EvalSample& s : rep.samples) {
    CHECK(std::isfinite(s.rmse_render));
    CHECK(s.rmse_render > 0.0);
    CHECK(s.rmse_render_scaled <= s.rmse_render + 1e-12);
  }

  std::string t1 = report_to_string(rep);
  std::string t2 = report_to_string(evaluate_fixed_prediction(got, dir, res));
  CHECK(t1 == t2);
  CHECK(t1.rfind("index,rmse_normal,rmse_diffuse,rmse_specular,"
                 "rmse_roughness,rmse_render,rmse_render_scaled,best_scale\n",
                 0) == 0);
  CHECK(t1.find("\nmean,") != std::string::npos);
}

TEST_CASE("checkpoint round-trip preserves the evaluation report bit-exactly") {
  std::string dir = synth_tiny_dataset("svbrdf_trainer_ckpt", 40, 22, 16);
  std::string ckpt =
      (std::filesystem::temp_directory_path() / "svbrdf_trainer_ckpt_m.svbf")
          .string();

  Weights w = init_weights(tiny_config(), 3);
  EvalReport r1 = evaluate_rmse(w, dir);
  REQUIRE(r1.samples.size() == 2);
  save_checkpoint(ckpt, w);
  Weights w2 = load_checkpoint(ckpt);
  EvalReport r2 = evaluate_rmse(w2, dir);
  CHECK(report_to_string(r1) == report_to_string(r2));
}

TEST_CASE("training runs deterministically and logs every iteration") {
  std::string data = synth_tiny_dataset("svbrdf_trainer_train", 40, 23, 16);
  namespace fs = std::filesystem;
  std::string out_a = fresh_dir("svbrdf_trainer_out_a").string();
  std::string out_b = fresh_dir("svbrdf_trainer_out_b").string();

  TrainConfig cfg;
  cfg.net = tiny_config();
  cfg.lr = 1e-3;
  cfg.batch = 2;
  cfg.iterations = 4;
  cfg.seed = 5;
  cfg.checkpoint_every = 2;
  cfg.out_dir = out_a;

  std::vector<std::pair<int, double>> calls;
  TrainResult a = train(data, cfg, [&](int it, double loss) {
    calls.emplace_back(it, loss);
  });
  REQUIRE(a.losses.size() == 4);
  for (double l : a.losses) {
    CHECK(std::isfinite(l));
    CHECK(l > 0.0);
  }
  REQUIRE(calls.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(calls[size_t(i)].first == i + 1);
    CHECK(calls[size_t(i)].second == a.losses[size_t(i)]);
  }
  CHECK(fs::exists(fs::path(out_a) / "model.svbf"));
  CHECK(fs::exists(fs::path(out_a) / "ckpt_000002.svbf"));
  CHECK(!fs::exists(fs::path(out_a) / "ckpt_000004.svbf"));

  cfg.out_dir = out_b;
  TrainResult b = train(data, cfg);
  REQUIRE(b.losses.size() == a.losses.size());
  for (size_t i = 0; i < a.losses.size(); ++i)
    CHECK(a.losses[i] == b.losses[i]);
  CHECK(slurp(out_a + "/model.svbf") == slurp(out_b + "/model.svbf"));

  std::vector<std::string> rows_a =
      loss_log_rows_sans_wallclock(out_a + "/loss_log.csv");
  std::vector<std::string> rows_b =
      loss_log_rows_sans_wallclock(out_b + "/loss_log.csv");
  REQUIRE(rows_a.size() == 5);
  CHECK(rows_a[0] == "iteration,loss");
  CHECK(rows_a == rows_b);

  cfg.seed = 6;
  cfg.out_dir.clear();
  TrainResult c = train(data, cfg);
  bool any_diff = false;
  for (size_t i = 0; i < c.losses.size(); ++i)
    any_diff = any_diff || c.losses[i] != a.losses[i];
  CHECK(any_diff);
}

TEST_CASE("zero iterations checkpoint equals the initialization") {
  std::string data = synth_tiny_dataset("svbrdf_trainer_zero", 21, 24, 16);
  std::string out = fresh_dir("svbrdf_trainer_zero_out").string();

  TrainConfig cfg;
  cfg.net = tiny_config();
  cfg.iterations = 0;
  cfg.seed = 9;
  cfg.out_dir = out;
  TrainResult r = train(data, cfg);
  CHECK(r.losses.empty());

  std::string init_path = out + "/init.svbf";
  save_checkpoint(init_path, init_weights(cfg.net, cfg.seed));
  CHECK(slurp(out + "/model.svbf") == slurp(init_path));
}

TEST_CASE("train rejects unusable configurations") {
  std::string data = synth_tiny_dataset("svbrdf_trainer_rej", 21, 25, 16);
  TrainConfig cfg;
  cfg.net = tiny_config();
  cfg.iterations = 1;

  TrainConfig bad_batch = cfg;
  bad_batch.batch = 0;
  CHECK_THROWS_AS(train(data, bad_batch), std::invalid_argument);

  std::string small = synth_tiny_dataset("svbrdf_trainer_small", 2, 26, 8);
  CHECK_THROWS_AS(train(small, cfg), std::invalid_argument);

  std::string empty = synth_tiny_dataset("svbrdf_trainer_emptyset", 0, 27, 16);
  CHECK_THROWS_AS(train(empty, cfg), std::invalid_argument);
}

TEST_CASE("mean ablation micro run is deterministic and well-formed") {
  MeanAblationConfig cfg;
  cfg.resolution = 16;
  cfg.iterations = 8;
  cfg.batch = 2;
  cfg.lr = 2e-4;
  cfg.train_images = 4;
  cfg.eval_images = 2;
  cfg.seed = 1;

  MeanAblationReport r1 = run_mean_ablation(cfg);
  for (const MeanAblationSide* s : {&r1.global, &r1.plain}) {
    CHECK(std::isfinite(s->train_loss_last100));
    CHECK(s->train_loss_last100 > 0.0);
    CHECK(std::isfinite(s->eval_mse));
    CHECK(s->eval_mse > 0.0);
    CHECK(std::isfinite(s->eval_spatial_stddev));
    CHECK(s->eval_spatial_stddev >= 0.0);
  }

  MeanAblationReport r2 = run_mean_ablation(cfg);
  std::string t1 = report_to_string(r1);
  CHECK(t1 == report_to_string(r2));
  CHECK(t1.rfind("network,train_loss_last100,eval_mse,eval_spatial_stddev\n",
                 0) == 0);
  CHECK(t1.find("\nglobal,") != std::string::npos);
  CHECK(t1.find("\nplain,") != std::string::npos);
}
