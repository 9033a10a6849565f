#pragma once

#include <string>
#include <vector>

#include "svbrdf/core.hpp"
#include "svbrdf/rng.hpp"
#include "svbrdf/tensor.hpp"
#include "svbrdf/types.hpp"

namespace svbrdf {

// Architecture hyperparameters. One stride-1 stem convolution is followed by
// `scale_features.size()` stride-2 encoder convolutions; the decoder mirrors
// the encoder feature counts in reverse. The global-features track exchanges
// a vector with the local track at every instance norm when enabled.
struct NetworkConfig {
  int input_resolution = 64;
  int stem_features = 16;
  std::vector<int> scale_features = {16, 32, 64, 128, 128};
  int filter_size = 4;
  int dropout_scales = 3;  // coarsest decoder scales with train-time dropout
  bool global_track = true;
  int output_channels = 9;

  int scales() const { return int(scale_features.size()); }

  // Throws std::invalid_argument on inconsistency (resolution not a power of
  // two or < 2^scales, non-positive widths, dropout_scales > scales).
  void validate() const;

  // Paper-scale shape: 256 input, stem 64, ladder 128,256,512x6.
  static NetworkConfig paper();
  // Desk-scale default: trains in minutes on a CPU.
  static NetworkConfig desk();
};

// All learnable parameters, stored flat in a fixed declaration order shared
// by initialization, the forward pass and serialization.
struct Weights {
  NetworkConfig cfg;
  std::vector<Tensor> tensors;
};

struct TensorSpec {
  std::string name;
  std::vector<int> shape;
};

// The single source of truth for parameter order and shapes.
std::vector<TensorSpec> weight_layout(const NetworkConfig& cfg);

int64_t parameter_count(const NetworkConfig& cfg);

// Deterministic per seed: kernels and FC matrices are zero-mean uniform with
// fan-in scaling (limit sqrt(6/fan_in)); all biases zero.
Weights init_weights(const NetworkConfig& cfg, uint64_t seed);

// One network evaluation recorded on a fresh tape. `params` holds the leaf
// ids of weights.tensors in the same order, for gradient collection.
struct ForwardResult {
  Tape tape;
  Tape::NodeId input = -1;
  std::vector<Tape::NodeId> params;
  Tape::NodeId output = -1;  // (H, W, output_channels) in (0,1)
};

// `img` must be the tone-mapped H x W x 3 input at cfg.input_resolution.
// `rng` is consumed only by train-mode dropout.
ForwardResult network_forward(const ImageF& img, const Weights& weights,
                              DropoutMode mode, Rng& rng);

// Raw 9-channel output -> maps (normals via decode_normal).
SvbrdfMaps decode_prediction(const ImageF& raw);

// Checkpoint: "SVBF" magic, u32 version, config fields, then each tensor as
// u32 rank + u32 dims + little-endian f32 payload, in declaration order.
// Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const Weights& weights);
Weights load_checkpoint(const std::string& path);

// Conversion helpers between images and rank-3 tensors.
Tensor image_to_tensor(const ImageF& img);
ImageF tensor_to_image(const Tensor& t);

}  // namespace svbrdf
