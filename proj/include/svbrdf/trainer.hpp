#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "svbrdf/datagen.hpp"
#include "svbrdf/network.hpp"
#include "svbrdf/render.hpp"

namespace svbrdf {

// Adam first/second moments, one pair per parameter tensor.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  int64_t t = 0;  // completed steps
};

AdamState make_adam_state(const std::vector<Tensor>& params);

// Standard bias-corrected Adam; advances state.t by one. Gradients must
// match the parameters shape-for-shape (std::invalid_argument otherwise).
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// Manifest sample i is held out for evaluation iff i % 20 == 19.
bool is_test_sample(int index);

struct TrainConfig {
  NetworkConfig net = NetworkConfig::desk();
  double lr = 2e-5;
  int batch = 8;
  int iterations = 2000;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // extra periodic checkpoints; 0 = final only
  std::string out_dir;       // receives model.svbf and loss_log.csv
};

struct TrainResult {
  Weights weights;
  std::vector<double> losses;  // batch-mean rendering loss per iteration
};

// Progress hook: (iteration, batch loss), called after every step.
using TrainCallback = std::function<void(int, double)>;

// Trains on the train split of a synthesized dataset: per iteration, a batch
// of random train samples with random stored->input crops, forward with
// train-mode dropout, the stochastic rendering loss with fresh per-element
// seeds, averaged batch gradients, one Adam step. Writes out_dir/model.svbf
// plus out_dir/loss_log.csv ("iteration,loss,wallclock_ms"); a non-finite
// loss aborts with the iteration and seeds in the message. Deterministic per
// seed (wallclock column excepted).
TrainResult train(const std::string& dataset_dir, const TrainConfig& cfg,
                  const TrainCallback& callback = nullptr);

// ---------------------------------------------------------------------------
// Evaluation.

// The frozen evaluation list: 10 diffuse_set then 10 mirror_set configs
// drawn from seed 0. Published in the repo as data/eval_lights.json.
std::vector<RenderConfig> evaluation_lights();
void save_eval_lights(const std::string& path);
std::vector<RenderConfig> load_eval_lights(const std::string& path);

struct EvalSample {
  int index = 0;
  double rmse_normal = 0;    // 2-channel normal encoding
  double rmse_diffuse = 0;
  double rmse_specular = 0;
  double rmse_roughness = 0;
  double rmse_render = 0;         // mean RMSE of clamped renders over lights
  double rmse_render_scaled = 0;  // best diffuse-albedo scale applied
  double best_scale = 1.0;
};

// Metrics for one prediction/ground-truth pair. The scale search multiplies
// the predicted diffuse albedo by each point of a log-spaced grid in
// [0.1, 10] and keeps the best re-rendering RMSE.
EvalSample evaluate_pair(const SvbrdfMaps& pred, const SvbrdfMaps& gt,
                         const std::vector<RenderConfig>& lights);

struct EvalReport {
  std::vector<EvalSample> samples;  // one per test-split sample
  EvalSample mean;                  // column means; index holds the count
};

// Runs the network over every test-split sample (deterministic center crops
// at the network resolution, eval-mode dropout).
EvalReport evaluate_rmse(const Weights& weights,
                         const std::string& dataset_dir);

// Per-pixel mean of the train split's encoded ground-truth maps at
// `resolution`: the no-learning baseline predictor.
SvbrdfMaps dataset_mean_maps(const std::string& dataset_dir, int resolution);

// The evaluation protocol with one fixed prediction for every sample.
EvalReport evaluate_fixed_prediction(const SvbrdfMaps& pred,
                                     const std::string& dataset_dir,
                                     int resolution);

// Canonical text form (full-precision digits, bit-stable across runs).
std::string report_to_string(const EvalReport& report);

// ---------------------------------------------------------------------------
// Mean-color toy experiment: train a network to output a constant image of
// the input's average color, with and without the global-features track.

struct MeanAblationConfig {
  int resolution = 32;
  int iterations = 1000;
  int batch = 4;
  double lr = 2e-4;
  int train_images = 64;
  int eval_images = 32;
  uint64_t seed = 0;
};

struct MeanAblationSide {
  double train_loss_last100 = 0;   // mean MSE over the last 100 iterations
  double eval_mse = 0;             // MSE against the constant target
  double eval_spatial_stddev = 0;  // mean per-image stddev of the output
};

struct MeanAblationReport {
  MeanAblationSide global;  // global-features track enabled
  MeanAblationSide plain;   // vanilla U-Net
};

// Both sides train on identical data, batches and seeds; only global_track
// differs.
MeanAblationReport run_mean_ablation(const MeanAblationConfig& cfg,
                                     const TrainCallback& callback = nullptr);

std::string report_to_string(const MeanAblationReport& report);

}  // namespace svbrdf
