#include "svbrdf/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace svbrdf {
namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Walks every parameter tensor of the architecture in declaration order,
// invoking fn(name, shape). Initialization, the forward pass and the
// checkpoint all traverse this exact sequence.
template <typename Fn>
void walk_layout(const NetworkConfig& cfg, Fn&& fn) {
  int k = cfg.filter_size;
  int s = cfg.scales();
  auto conv = [&](const std::string& name, int cin, int cout) {
    fn(name + ".kernel", std::vector<int>{k, k, cin, cout});
    fn(name + ".bias", std::vector<int>{cout});
  };
  auto exchange = [&](const std::string& name, int g_prev, int c) {
    if (!cfg.global_track) return;
    fn(name + ".into_global.w", std::vector<int>{c, g_prev + c});
    fn(name + ".into_global.b", std::vector<int>{c});
    fn(name + ".out_of_global.w", std::vector<int>{c, c});
    fn(name + ".out_of_global.b", std::vector<int>{c});
  };

  int g = 0;  // running global-vector width
  conv("stem", 3, cfg.stem_features);
  exchange("stem", g, cfg.stem_features);
  g = cfg.stem_features;

  int prev = cfg.stem_features;
  for (int i = 0; i < s; ++i) {
    int c = cfg.scale_features[size_t(i)];
    conv("enc" + std::to_string(i), prev, c);
    exchange("enc" + std::to_string(i), g, c);
    g = c;
    prev = c;
  }

  // prev == deepest width; decoder runs coarsest to finest.
  for (int i = s - 1; i >= 0; --i) {
    int skip = (i == 0) ? cfg.stem_features : cfg.scale_features[size_t(i - 1)];
    int c = skip;  // decoder features mirror the encoder in reverse
    std::string name = "dec" + std::to_string(i);
    conv(name + ".a", prev + skip, c);
    conv(name + ".b", c, c);
    exchange(name, g, c);
    g = c;
    prev = c;
  }

  conv("final", cfg.stem_features, cfg.output_channels);
}

int64_t numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

}  // namespace

void NetworkConfig::validate() const {
  if (!is_power_of_two(input_resolution))
    throw std::invalid_argument("config: input_resolution not a power of two");
  if (scale_features.empty())
    throw std::invalid_argument("config: no scales");
  if (input_resolution < (1 << scales()))
    throw std::invalid_argument("config: input_resolution < 2^scales");
  if (stem_features <= 0 || output_channels <= 0 || filter_size <= 0)
    throw std::invalid_argument("config: non-positive dimension");
  for (int c : scale_features)
    if (c <= 0) throw std::invalid_argument("config: non-positive width");
  if (dropout_scales < 0 || dropout_scales > scales())
    throw std::invalid_argument("config: dropout_scales out of range");
}

NetworkConfig NetworkConfig::paper() {
  NetworkConfig cfg;
  cfg.input_resolution = 256;
  cfg.stem_features = 64;
  cfg.scale_features = {128, 256, 512, 512, 512, 512, 512, 512};
  return cfg;
}

NetworkConfig NetworkConfig::desk() { return NetworkConfig{}; }

std::vector<TensorSpec> weight_layout(const NetworkConfig& cfg) {
  std::vector<TensorSpec> out;
  walk_layout(cfg, [&](const std::string& name, std::vector<int> shape) {
    out.push_back({name, std::move(shape)});
  });
  return out;
}

int64_t parameter_count(const NetworkConfig& cfg) {
  int64_t total = 0;
  walk_layout(cfg, [&](const std::string&, const std::vector<int>& shape) {
    total += numel_of(shape);
  });
  return total;
}

Weights init_weights(const NetworkConfig& cfg, uint64_t seed) {
  cfg.validate();
  Weights w;
  w.cfg = cfg;
  Rng rng(seed);
  walk_layout(cfg, [&](const std::string&, std::vector<int> shape) {
    Tensor t(shape);
    // Biases are the rank-1 tensors and stay zero; kernels and FC matrices
    // draw uniform with fan-in scaling (K*K*Cin for convs, columns for FC).
    if (shape.size() > 1) {
      int64_t fan_in = shape.size() == 2
                           ? int64_t(shape[1])
                           : int64_t(shape[0]) * shape[1] * shape[2];
      double limit = std::sqrt(6.0 / double(fan_in));
      for (real& v : t.data) v = real(rng.uniform(-limit, limit));
    }
    w.tensors.push_back(std::move(t));
  });
  return w;
}

Tensor image_to_tensor(const ImageF& img) {
  Tensor t = Tensor::hwc(img.height, img.width, img.channels);
  std::memcpy(t.data.data(), img.data.data(), sizeof(real) * img.data.size());
  return t;
}

ImageF tensor_to_image(const Tensor& t) {
  if (t.rank() != 3) throw std::invalid_argument("tensor_to_image: rank != 3");
  ImageF img(t.dim(1), t.dim(0), t.dim(2));
  std::memcpy(img.data.data(), t.data.data(), sizeof(real) * t.data.size());
  return img;
}

ForwardResult network_forward(const ImageF& img, const Weights& weights,
                              DropoutMode mode, Rng& rng) {
  const NetworkConfig& cfg = weights.cfg;
  cfg.validate();
  if (img.width != cfg.input_resolution || img.height != cfg.input_resolution ||
      img.channels != 3)
    throw std::invalid_argument("forward: wrong input resolution");

  ForwardResult r;
  Tape& tape = r.tape;
  r.input = tape.input(image_to_tensor(img));
  for (const Tensor& t : weights.tensors) r.params.push_back(tape.param(t));

  size_t cursor = 0;
  auto next = [&]() { return r.params.at(cursor++); };

  int s = cfg.scales();
  Tape::NodeId g = -1;

  // conv + bias + IN + global exchange + per-channel bias; the caller
  // applies the nonlinearity. Mirrors walk_layout's parameter order.
  auto conv_block = [&](Tape::NodeId x, int stride) {
    Tape::NodeId kernel = next(), bias = next();
    x = tape.add_channel_bias(tape.conv2d(x, kernel, stride), bias);
    Tape::NodeId normed = tape.instance_norm(x);
    if (!cfg.global_track) return normed;
    Tape::NodeId means = tape.channel_means(x);
    Tape::NodeId gin = (g < 0) ? means : tape.concat_vec(g, means);
    Tape::NodeId aw = next(), ab = next();
    g = tape.activation(tape.fully_connected(gin, aw, ab), ActKind::selu);
    Tape::NodeId bw = next(), bb = next();
    Tape::NodeId gbias = tape.fully_connected(g, bw, bb);
    return tape.add_channel_bias(normed, gbias);
  };
  auto plain_conv = [&](Tape::NodeId x, int stride) {
    Tape::NodeId kernel = next(), bias = next();
    return tape.add_channel_bias(tape.conv2d(x, kernel, stride), bias);
  };

  std::vector<Tape::NodeId> skips;
  Tape::NodeId x =
      tape.activation(conv_block(r.input, 1), ActKind::leaky_relu);
  skips.push_back(x);
  for (int i = 0; i < s; ++i) {
    x = tape.activation(conv_block(x, 2), ActKind::leaky_relu);
    if (i + 1 < s) skips.push_back(x);
  }

  for (int i = s - 1; i >= 0; --i) {
    x = tape.nearest_upsample2x(x);
    x = tape.concat_channels(x, skips[size_t(i)]);
    x = tape.activation(plain_conv(x, 1), ActKind::leaky_relu);
    x = tape.activation(conv_block(x, 1), ActKind::leaky_relu);
    if (i >= s - cfg.dropout_scales) x = tape.dropout(x, 0.5, mode, rng);
  }

  x = plain_conv(x, 1);
  r.output = tape.activation(x, ActKind::sigmoid);
  if (cursor != r.params.size())
    throw std::logic_error("forward: parameter walk out of sync");
  return r;
}

SvbrdfMaps decode_prediction(const ImageF& raw) {
  return channels_to_maps(raw);
}

namespace {

void write_u32(std::ofstream& f, uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::ifstream& f) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

constexpr uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const Weights& weights) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write("SVBF", 4);
  write_u32(f, kCheckpointVersion);
  const NetworkConfig& cfg = weights.cfg;
  write_u32(f, uint32_t(cfg.input_resolution));
  write_u32(f, uint32_t(cfg.stem_features));
  write_u32(f, uint32_t(cfg.scales()));
  for (int c : cfg.scale_features) write_u32(f, uint32_t(c));
  write_u32(f, uint32_t(cfg.filter_size));
  write_u32(f, uint32_t(cfg.dropout_scales));
  write_u32(f, cfg.global_track ? 1u : 0u);
  write_u32(f, uint32_t(cfg.output_channels));

  auto layout = weight_layout(cfg);
  if (layout.size() != weights.tensors.size())
    throw std::runtime_error("checkpoint: weights do not match layout");
  for (size_t i = 0; i < layout.size(); ++i) {
    const Tensor& t = weights.tensors[i];
    if (t.shape != layout[i].shape)
      throw std::runtime_error("checkpoint: bad shape for " + layout[i].name);
    write_u32(f, uint32_t(t.rank()));
    for (int d : t.shape) write_u32(f, uint32_t(d));
    std::vector<float> buf(t.data.size());
    for (size_t j = 0; j < buf.size(); ++j) buf[j] = float(t.data[j]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            std::streamsize(buf.size() * sizeof(float)));
  }
  if (!f) throw std::runtime_error("short write: " + path);
}

Weights load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  char magic[4] = {};
  f.read(magic, 4);
  if (std::memcmp(magic, "SVBF", 4) != 0)
    throw std::runtime_error(path + ": not a checkpoint (bad magic)");
  uint32_t version = read_u32(f);
  if (version != kCheckpointVersion)
    throw std::runtime_error(path + ": unsupported checkpoint version");

  NetworkConfig cfg;
  cfg.input_resolution = int(read_u32(f));
  cfg.stem_features = int(read_u32(f));
  uint32_t nscales = read_u32(f);
  cfg.scale_features.resize(nscales);
  for (uint32_t i = 0; i < nscales; ++i)
    cfg.scale_features[i] = int(read_u32(f));
  cfg.filter_size = int(read_u32(f));
  cfg.dropout_scales = int(read_u32(f));
  cfg.global_track = read_u32(f) != 0;
  cfg.output_channels = int(read_u32(f));
  cfg.validate();

  Weights w;
  w.cfg = cfg;
  for (const TensorSpec& spec : weight_layout(cfg)) {
    uint32_t rank = read_u32(f);
    if (rank != spec.shape.size())
      throw std::runtime_error(path + ": rank mismatch for " + spec.name);
    std::vector<int> shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = int(read_u32(f));
    if (shape != spec.shape)
      throw std::runtime_error(path + ": shape mismatch for " + spec.name);
    Tensor t(shape);
    std::vector<float> buf(t.data.size());
    f.read(reinterpret_cast<char*>(buf.data()),
           std::streamsize(buf.size() * sizeof(float)));
    if (!f) throw std::runtime_error(path + ": truncated at " + spec.name);
    for (size_t j = 0; j < buf.size(); ++j) t.data[j] = real(buf[j]);
    w.tensors.push_back(std::move(t));
  }
  return w;
}

}  // namespace svbrdf
