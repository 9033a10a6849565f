#include "svbrdf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "svbrdf/loss.hpp"
#include "svbrdf/parallel.hpp"

namespace svbrdf {
namespace {

constexpr uint64_t kIterStream = 0x17a15e55ULL;
constexpr uint64_t kAblationData = 0xab1d47aULL;

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ImageF crop_image(const ImageF& img, int x0, int y0, int n) {
  ImageF out(n, n, img.channels);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

SvbrdfMaps crop_maps(const SvbrdfMaps& maps, int x0, int y0, int n) {
  SvbrdfMaps out(n);
  out.normal = crop_image(maps.normal, x0, y0, n);
  out.diffuse_albedo = crop_image(maps.diffuse_albedo, x0, y0, n);
  out.specular_albedo = crop_image(maps.specular_albedo, x0, y0, n);
  out.roughness = crop_image(maps.roughness, x0, y0, n);
  return out;
}

}  // namespace

AdamState make_adam_state(const std::vector<Tensor>& params) {
  AdamState st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const Tensor& p : params) {
    st.m.emplace_back(p.shape);
    st.v.emplace_back(p.shape);
  }
  return st;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr, double beta1, double beta2,
               double eps) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: tensor count mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(beta2, double(state.t));
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    const Tensor& g = grads[k];
    if (p.shape != g.shape)
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (size_t i = 0; i < p.data.size(); ++i) {
      double gi = double(g.data[i]);
      double mi = beta1 * double(m.data[i]) + (1.0 - beta1) * gi;
      double vi = beta2 * double(v.data[i]) + (1.0 - beta2) * gi * gi;
      m.data[i] = real(mi);
      v.data[i] = real(vi);
      double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
      p.data[i] = real(double(p.data[i]) - update);
    }
  }
}

bool is_test_sample(int index) { return index % 20 == 19; }

// ---------------------------------------------------------------------------
// Training loop.

namespace {

struct LoadedSample {
  int index = 0;
  ImageF input_tm;  // tone-mapped flash image at stored resolution
  SvbrdfMaps gt;    // stored resolution
};

std::vector<LoadedSample> load_split(const std::string& dataset_dir,
                                     const DatasetManifest& man, bool test) {
  std::vector<LoadedSample> out;
  for (int i = 0; i < man.count; ++i) {
    if (is_test_sample(i) != test) continue;
    Sample s = load_sample(dataset_dir, i);
    LoadedSample ls;
    ls.index = i;
    ls.input_tm = tonemap_log(s.input);
    ls.gt = std::move(s.gt);
    out.push_back(std::move(ls));
  }
  return out;
}

}  // namespace

TrainResult train(const std::string& dataset_dir, const TrainConfig& cfg,
                  const TrainCallback& callback) {
  cfg.net.validate();
  if (cfg.batch <= 0 || cfg.iterations < 0)
    throw std::invalid_argument("train: bad batch/iterations");
  DatasetManifest man = load_manifest(dataset_dir + "/manifest.json");
  const int res = cfg.net.input_resolution;
  if (man.stored_resolution < res)
    throw std::invalid_argument("train: dataset smaller than network input");
  std::vector<LoadedSample> trainset = load_split(dataset_dir, man, false);
  if (trainset.empty()) throw std::invalid_argument("train: empty train split");

  TrainResult result;
  result.weights = init_weights(cfg.net, cfg.seed);
  AdamState adam = make_adam_state(result.weights.tensors);
  const size_t n_params = result.weights.tensors.size();

  std::ofstream log;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    log.open(cfg.out_dir + "/loss_log.csv", std::ios::binary);
    if (!log) throw std::runtime_error("cannot write " + cfg.out_dir + "/loss_log.csv");
    log << "iteration,loss,wallclock_ms\n";
  }
  auto t0 = std::chrono::steady_clock::now();

  const int jitter = man.stored_resolution - res + 1;
  struct Draw {
    int sample = 0;
    int cx = 0, cy = 0;
    uint64_t loss_seed = 0, drop_seed = 0;
  };

  for (int it = 1; it <= cfg.iterations; ++it) {
    Rng itr(Rng::mix(cfg.seed ^ kIterStream, uint64_t(it)));
    std::vector<Draw> draws(size_t(cfg.batch));
    for (Draw& d : draws) {
      d.sample = int(itr.uniform_int(uint64_t(trainset.size())));
      d.cx = int(itr.uniform_int(uint64_t(jitter)));
      d.cy = int(itr.uniform_int(uint64_t(jitter)));
      d.loss_seed = itr.next_u64();
      d.drop_seed = itr.next_u64();
    }

    std::vector<std::vector<Tensor>> elem_grads(size_t(cfg.batch));
    std::vector<double> elem_loss(size_t(cfg.batch), 0.0);
    std::vector<std::string> elem_error(size_t(cfg.batch));
    parallel_for(cfg.batch, [&](int64_t b) {
      const Draw& d = draws[size_t(b)];
      try {
        const LoadedSample& ls = trainset[size_t(d.sample)];
        ImageF input = crop_image(ls.input_tm, d.cx, d.cy, res);
        SvbrdfMaps gt = crop_maps(ls.gt, d.cx, d.cy, res);
        Rng drop_rng(d.drop_seed);
        ForwardResult fr = network_forward(input, result.weights,
                                           DropoutMode::train, drop_rng);
        Rng loss_rng(d.loss_seed);
        Tape::NodeId loss = fr.tape.rendering_loss_node(fr.output, gt, loss_rng);
        fr.tape.backward(loss);
        elem_loss[size_t(b)] = double(fr.tape.value(loss).data[0]);
        std::vector<Tensor>& g = elem_grads[size_t(b)];
        g.reserve(n_params);
        for (Tape::NodeId id : fr.params) g.push_back(fr.tape.grad(id));
      } catch (const std::exception& e) {
        elem_error[size_t(b)] = e.what();
      }
    });

    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const Draw& d = draws[size_t(b)];
      if (!elem_error[size_t(b)].empty() || !std::isfinite(elem_loss[size_t(b)])) {
        std::string detail = elem_error[size_t(b)].empty()
                                 ? "non-finite loss"
                                 : elem_error[size_t(b)];
        throw std::runtime_error(
            "train: aborted at iteration " + std::to_string(it) + " (sample " +
            std::to_string(trainset[size_t(d.sample)].index) + ", loss seed " +
            std::to_string(d.loss_seed) + ", dropout seed " +
            std::to_string(d.drop_seed) + "): " + detail);
      }
      batch_loss += elem_loss[size_t(b)];
    }
    batch_loss /= double(cfg.batch);

    std::vector<Tensor> grads;
    grads.reserve(n_params);
    const double inv_batch = 1.0 / double(cfg.batch);
    for (size_t k = 0; k < n_params; ++k) {
      Tensor acc(result.weights.tensors[k].shape);
      for (int b = 0; b < cfg.batch; ++b) {
        const Tensor& g = elem_grads[size_t(b)][k];
        for (size_t i = 0; i < acc.data.size(); ++i)
          acc.data[i] += g.data[i];
      }
      for (real& v : acc.data) v = real(double(v) * inv_batch);
      grads.push_back(std::move(acc));
    }
    adam_step(result.weights.tensors, grads, adam, cfg.lr);

    result.losses.push_back(batch_loss);
    if (log) {
      auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
      log << it << ',' << fmt_real(batch_loss) << ',' << ms << '\n';
    }
    if (callback) callback(it, batch_loss);
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
        it % cfg.checkpoint_every == 0 && it != cfg.iterations) {
      char name[32];
      std::snprintf(name, sizeof(name), "/ckpt_%06d.svbf", it);
      save_checkpoint(cfg.out_dir + name, result.weights);
    }
  }

  if (!cfg.out_dir.empty())
    save_checkpoint(cfg.out_dir + "/model.svbf", result.weights);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation.

std::vector<RenderConfig> evaluation_lights() {
  Rng rng(0);
  std::vector<RenderConfig> lights;
  lights.reserve(20);
  for (int i = 0; i < 10; ++i)
    lights.push_back(sample_render_config(rng, ConfigRegime::diffuse_set));
  for (int i = 0; i < 10; ++i)
    lights.push_back(sample_render_config(rng, ConfigRegime::mirror_set));
  return lights;
}

namespace {

nlohmann::json vec_to_json(const Vec3& v) {
  return nlohmann::json::array({v.x, v.y, v.z});
}

Vec3 vec_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

void save_eval_lights(const std::string& path) {
  nlohmann::json j;
  j["version"] = 1;
  j["lights"] = nlohmann::json::array();
  for (const RenderConfig& c : evaluation_lights()) {
    nlohmann::json lj;
    lj["mode"] =
        c.mode == RenderConfig::Mode::directional ? "directional" : "positional";
    lj["light"] = vec_to_json(c.light);
    lj["view"] = vec_to_json(c.view);
    lj["intensity"] = c.light_intensity;
    lj["falloff"] = c.include_falloff;
    j["lights"].push_back(lj);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << "\n";
}

std::vector<RenderConfig> load_eval_lights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  std::vector<RenderConfig> lights;
  for (const auto& lj : j.at("lights")) {
    RenderConfig c;
    c.mode = lj.at("mode").get<std::string>() == "directional"
                 ? RenderConfig::Mode::directional
                 : RenderConfig::Mode::positional;
    c.light = vec_from_json(lj.at("light"));
    c.view = vec_from_json(lj.at("view"));
    c.light_intensity = lj.at("intensity").get<double>();
    c.include_falloff = lj.at("falloff").get<bool>();
    lights.push_back(c);
  }
  return lights;
}

namespace {

// RMSE between two channel ranges of encoded maps.
double channel_rmse(const ImageF& a, const ImageF& b, int c0, int nc) {
  double acc = 0.0;
  int64_t count = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      for (int c = c0; c < c0 + nc; ++c) {
        double d = double(a.at(y, x, c)) - double(b.at(y, x, c));
        acc += d * d;
        ++count;
      }
  return std::sqrt(acc / double(count));
}

std::vector<double> scale_grid() {
  std::vector<double> grid(101);
  const double lo = std::log(0.1), hi = std::log(10.0);
  for (int i = 0; i <= 100; ++i)
    grid[size_t(i)] = std::exp(lo + (hi - lo) * double(i) / 100.0);
  return grid;
}

}  // namespace

EvalSample evaluate_pair(const SvbrdfMaps& pred, const SvbrdfMaps& gt,
                         const std::vector<RenderConfig>& lights) {
  if (pred.resolution != gt.resolution)
    throw std::invalid_argument("evaluate_pair: resolution mismatch");
  EvalSample es;
  ImageF pc = maps_to_channels(pred);
  ImageF gc = maps_to_channels(gt);
  es.rmse_normal = channel_rmse(pc, gc, 0, 2);
  es.rmse_diffuse = channel_rmse(pc, gc, 2, 3);
  es.rmse_roughness = channel_rmse(pc, gc, 5, 1);
  es.rmse_specular = channel_rmse(pc, gc, 6, 3);

  // The render is affine in the diffuse albedo, so two renders per light
  // (diffuse zeroed, and full) give every albedo scale for free.
  SvbrdfMaps pred_nodiff = pred;
  std::fill(pred_nodiff.diffuse_albedo.data.begin(),
            pred_nodiff.diffuse_albedo.data.end(), real(0));
  const std::vector<double> grid = scale_grid();
  std::vector<double> scaled_acc(grid.size(), 0.0);
  double plain_acc = 0.0;
  const int64_t pixels = int64_t(gt.resolution) * gt.resolution * 3;
  for (const RenderConfig& cfg : lights) {
    ImageF r_gt = render_svbrdf(gt, cfg);
    ImageF r_spec = render_svbrdf(pred_nodiff, cfg);
    ImageF r_full = render_svbrdf(pred, cfg);
    for (real& v : r_gt.data) v = real(clamp01(double(v)));
    double plain = 0.0;
    for (size_t i = 0; i < r_gt.data.size(); ++i) {
      double d = clamp01(double(r_full.data[i])) - double(r_gt.data[i]);
      plain += d * d;
    }
    plain_acc += std::sqrt(plain / double(pixels));
    for (size_t s = 0; s < grid.size(); ++s) {
      double acc = 0.0;
      for (size_t i = 0; i < r_gt.data.size(); ++i) {
        double diff_part = double(r_full.data[i]) - double(r_spec.data[i]);
        double v = clamp01(double(r_spec.data[i]) + grid[s] * diff_part);
        double d = v - double(r_gt.data[i]);
        acc += d * d;
      }
      scaled_acc[s] += std::sqrt(acc / double(pixels));
    }
  }
  const double n_lights = double(lights.size());
  es.rmse_render = plain_acc / n_lights;
  size_t best = 0;
  for (size_t s = 1; s < grid.size(); ++s)
    if (scaled_acc[s] < scaled_acc[best]) best = s;
  es.best_scale = grid[best];
  es.rmse_render_scaled = scaled_acc[best] / n_lights;
  return es;
}

namespace {

EvalSample column_means(const std::vector<EvalSample>& samples) {
  EvalSample mean;
  mean.index = int(samples.size());
  if (samples.empty()) return mean;
  double n = double(samples.size());
  mean.best_scale = 0.0;
  for (const EvalSample& s : samples) {
    mean.rmse_normal += s.rmse_normal / n;
    mean.rmse_diffuse += s.rmse_diffuse / n;
    mean.rmse_specular += s.rmse_specular / n;
    mean.rmse_roughness += s.rmse_roughness / n;
    mean.rmse_render += s.rmse_render / n;
    mean.rmse_render_scaled += s.rmse_render_scaled / n;
    mean.best_scale += s.best_scale / n;
  }
  return mean;
}

// Shared walk over the test split; `predict` maps a loaded sample (already
// center-cropped) to a prediction.
template <typename Fn>
EvalReport evaluate_split(const std::string& dataset_dir, int res,
                          const Fn& predict) {
  DatasetManifest man = load_manifest(dataset_dir + "/manifest.json");
  if (man.stored_resolution < res)
    throw std::invalid_argument("evaluate: dataset smaller than resolution");
  const int off = (man.stored_resolution - res) / 2;
  std::vector<RenderConfig> lights = evaluation_lights();
  EvalReport report;
  for (int i = 0; i < man.count; ++i) {
    if (!is_test_sample(i)) continue;
    Sample s = load_sample(dataset_dir, i);
    ImageF input = crop_image(s.input, off, off, res);
    SvbrdfMaps gt = crop_maps(s.gt, off, off, res);
    EvalSample es = evaluate_pair(predict(input), gt, lights);
    es.index = i;
    report.samples.push_back(es);
  }
  report.mean = column_means(report.samples);
  return report;
}

}  // namespace

EvalReport evaluate_rmse(const Weights& weights,
                         const std::string& dataset_dir) {
  const int res = weights.cfg.input_resolution;
  return evaluate_split(dataset_dir, res, [&](const ImageF& input) {
    Rng rng(0);  // eval mode draws nothing
    ForwardResult fr =
        network_forward(tonemap_log(input), weights, DropoutMode::eval, rng);
    return decode_prediction(tensor_to_image(fr.tape.value(fr.output)));
  });
}

SvbrdfMaps dataset_mean_maps(const std::string& dataset_dir, int resolution) {
  DatasetManifest man = load_manifest(dataset_dir + "/manifest.json");
  if (man.stored_resolution < resolution)
    throw std::invalid_argument("dataset_mean_maps: resolution too large");
  const int off = (man.stored_resolution - resolution) / 2;
  ImageF acc(resolution, resolution, 9);
  std::vector<double> sums(acc.data.size(), 0.0);
  int64_t n = 0;
  for (int i = 0; i < man.count; ++i) {
    if (is_test_sample(i)) continue;
    Sample s = load_sample(dataset_dir, i);
    ImageF enc = maps_to_channels(crop_maps(s.gt, off, off, resolution));
    for (size_t k = 0; k < sums.size(); ++k) sums[k] += double(enc.data[k]);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("dataset_mean_maps: empty train split");
  for (size_t k = 0; k < sums.size(); ++k)
    acc.data[k] = real(sums[k] / double(n));
  return channels_to_maps(acc);
}

EvalReport evaluate_fixed_prediction(const SvbrdfMaps& pred,
                                     const std::string& dataset_dir,
                                     int resolution) {
  return evaluate_split(dataset_dir, resolution,
                        [&](const ImageF&) { return pred; });
}

std::string report_to_string(const EvalReport& report) {
  std::string out =
      "index,rmse_normal,rmse_diffuse,rmse_specular,rmse_roughness,"
      "rmse_render,rmse_render_scaled,best_scale\n";
  auto row = [&](const std::string& label, const EvalSample& s) {
    out += label + ',' + fmt_real(s.rmse_normal) + ',' +
           fmt_real(s.rmse_diffuse) + ',' + fmt_real(s.rmse_specular) + ',' +
           fmt_real(s.rmse_roughness) + ',' + fmt_real(s.rmse_render) + ',' +
           fmt_real(s.rmse_render_scaled) + ',' + fmt_real(s.best_scale) +
           '\n';
  };
  for (const EvalSample& s : report.samples) row(std::to_string(s.index), s);
  row("mean", report.mean);
  return out;
}

// ---------------------------------------------------------------------------
// Mean-color toy experiment.

namespace {

struct AblationData {
  std::vector<ImageF> inputs;   // tone-mapped, cropped to resolution
  std::vector<Tensor> targets;  // constant average-color images
};

AblationData make_ablation_data(const MeanAblationConfig& cfg) {
  DatasetSpec ds;
  ds.count = cfg.train_images + cfg.eval_images;
  ds.seed = Rng::mix(cfg.seed, kAblationData);
  ds.resolution = cfg.resolution;
  DatasetManifest man = plan_dataset(ds);
  const int off = (man.stored_resolution - cfg.resolution) / 2;
  AblationData data;
  for (const SampleRecord& rec : man.samples) {
    Sample s = build_sample(man, rec);
    ImageF input =
        crop_image(tonemap_log(s.input), off, off, cfg.resolution);
    double mean[3] = {0, 0, 0};
    const int64_t pixels = int64_t(cfg.resolution) * cfg.resolution;
    for (int64_t p = 0; p < pixels; ++p)
      for (int c = 0; c < 3; ++c) mean[c] += double(input.data[p * 3 + c]);
    Tensor target = Tensor::hwc(cfg.resolution, cfg.resolution, 3);
    for (int64_t p = 0; p < pixels; ++p)
      for (int c = 0; c < 3; ++c)
        target.data[size_t(p * 3 + c)] = real(mean[c] / double(pixels));
    data.inputs.push_back(std::move(input));
    data.targets.push_back(std::move(target));
  }
  return data;
}

NetworkConfig ablation_network(const MeanAblationConfig& cfg, bool global) {
  NetworkConfig nc;
  nc.input_resolution = cfg.resolution;
  nc.stem_features = 8;
  nc.scale_features = {8, 16, 32};
  nc.filter_size = 4;
  nc.dropout_scales = 0;
  nc.global_track = global;
  nc.output_channels = 3;
  return nc;
}

MeanAblationSide train_ablation_side(const MeanAblationConfig& cfg,
                                     const AblationData& data, bool global,
                                     const TrainCallback& callback) {
  NetworkConfig nc = ablation_network(cfg, global);
  Weights weights = init_weights(nc, cfg.seed);
  AdamState adam = make_adam_state(weights.tensors);
  const size_t n_params = weights.tensors.size();
  Rng unused(0);

  MeanAblationSide side;
  double tail = 0.0;
  int tail_n = 0;
  for (int it = 1; it <= cfg.iterations; ++it) {
    // Same stream on both sides: identical batch composition.
    Rng itr(Rng::mix(cfg.seed ^ kIterStream, uint64_t(it)));
    std::vector<Tensor> grads;
    grads.reserve(n_params);
    for (const Tensor& p : weights.tensors) grads.emplace_back(p.shape);
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      int idx = int(itr.uniform_int(uint64_t(cfg.train_images)));
      ForwardResult fr = network_forward(data.inputs[size_t(idx)], weights,
                                         DropoutMode::eval, unused);
      Tape::NodeId loss =
          fr.tape.mse_loss_node(fr.output, data.targets[size_t(idx)]);
      fr.tape.backward(loss);
      batch_loss += double(fr.tape.value(loss).data[0]);
      for (size_t k = 0; k < n_params; ++k) {
        const Tensor& g = fr.tape.grad(fr.params[k]);
        for (size_t i = 0; i < g.data.size(); ++i)
          grads[k].data[i] += g.data[i];
      }
    }
    batch_loss /= double(cfg.batch);
    if (!std::isfinite(batch_loss))
      throw std::runtime_error("mean ablation: non-finite loss at iteration " +
                               std::to_string(it));
    for (Tensor& g : grads)
      for (real& v : g.data) v = real(double(v) / double(cfg.batch));
    adam_step(weights.tensors, grads, adam, cfg.lr);
    if (callback) callback(it, batch_loss);
    if (it > cfg.iterations - 100) {
      tail += batch_loss;
      ++tail_n;
    }
  }
  side.train_loss_last100 = tail_n > 0 ? tail / double(tail_n) : 0.0;

  double mse_acc = 0.0, std_acc = 0.0;
  for (int e = 0; e < cfg.eval_images; ++e) {
    size_t idx = size_t(cfg.train_images + e);
    ForwardResult fr = network_forward(data.inputs[idx], weights,
                                       DropoutMode::eval, unused);
    const Tensor& out = fr.tape.value(fr.output);
    const Tensor& target = data.targets[idx];
    const int64_t pixels = int64_t(cfg.resolution) * cfg.resolution;
    double mse = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i) {
      double d = double(out.data[i]) - double(target.data[i]);
      mse += d * d;
    }
    mse_acc += mse / double(out.data.size());
    // Mean over channels of the spatial variance of the output.
    double var_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (int64_t p = 0; p < pixels; ++p)
        mean += double(out.data[size_t(p * 3 + c)]);
      mean /= double(pixels);
      double var = 0.0;
      for (int64_t p = 0; p < pixels; ++p) {
        double d = double(out.data[size_t(p * 3 + c)]) - mean;
        var += d * d;
      }
      var_sum += var / double(pixels);
    }
    std_acc += std::sqrt(var_sum / 3.0);
  }
  side.eval_mse = mse_acc / double(cfg.eval_images);
  side.eval_spatial_stddev = std_acc / double(cfg.eval_images);
  return side;
}

}  // namespace

MeanAblationReport run_mean_ablation(const MeanAblationConfig& cfg,
                                     const TrainCallback& callback) {
  AblationData data = make_ablation_data(cfg);
  MeanAblationReport report;
  report.global = train_ablation_side(cfg, data, true, callback);
  report.plain = train_ablation_side(cfg, data, false, callback);
  return report;
}

std::string report_to_string(const MeanAblationReport& report) {
  std::string out = "network,train_loss_last100,eval_mse,eval_spatial_stddev\n";
  auto row = [&](const char* label, const MeanAblationSide& s) {
    out += std::string(label) + ',' + fmt_real(s.train_loss_last100) + ',' +
           fmt_real(s.eval_mse) + ',' + fmt_real(s.eval_spatial_stddev) + '\n';
  };
  row("global", report.global);
  row("plain", report.plain);
  return out;
}

}  // namespace svbrdf
