#include "svbrdf/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "svbrdf/loss.hpp"
#include "svbrdf/render.hpp"

namespace svbrdf {
namespace {

[[noreturn]] void fail(const char* opname, const std::string& what) {
  throw std::invalid_argument(std::string("tape: ") + opname + ": " + what);
}

void require(bool cond, const char* opname, const char* what) {
  if (!cond) fail(opname, what);
}

// Dot product with eight fixed-order lanes: vectorizes without -ffast-math
// while keeping a deterministic summation order.
real dot_fixed(const real* a, const real* b, int64_t n) {
  real lanes[8] = {};
  int64_t n8 = n & ~int64_t(7);
  for (int64_t i = 0; i < n8; i += 8)
    for (int j = 0; j < 8; ++j) lanes[j] += a[i + j] * b[i + j];
  for (int64_t i = n8; i < n; ++i) lanes[i - n8] += a[i] * b[i];
  real even = ((lanes[0] + lanes[4]) + (lanes[2] + lanes[6]));
  real odd = ((lanes[1] + lanes[5]) + (lanes[3] + lanes[7]));
  return even + odd;
}

int pad_begin(int k) { return (k - 1) / 2; }

int conv_out_size(int n, int stride) { return (n - 1) / stride + 1; }

}  // namespace

Tape::NodeId Tape::push(Node n, const char* opname) {
  for (real v : n.value.data)
    if (!std::isfinite(double(v)))
      throw std::runtime_error(std::string("tape: non-finite value out of ") +
                               opname);
  nodes_.push_back(std::move(n));
  return NodeId(nodes_.size() - 1);
}

Tape::NodeId Tape::input(Tensor value) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  return push(std::move(n), "input");
}

Tape::NodeId Tape::param(Tensor value) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  return push(std::move(n), "param");
}

Tape::NodeId Tape::conv2d(NodeId x, NodeId w, int stride) {
  const Tensor& xin = at(x).value;
  const Tensor& ker = at(w).value;
  require(stride == 1 || stride == 2, "conv2d", "stride must be 1 or 2");
  require(xin.rank() == 3, "conv2d", "input must be rank 3 (H,W,C)");
  require(ker.rank() == 4, "conv2d", "kernel must be rank 4 (K,K,Cin,Cout)");
  require(ker.dim(0) == ker.dim(1), "conv2d", "kernel must be square");
  require(ker.dim(2) == xin.dim(2), "conv2d", "channel mismatch");

  int h = xin.dim(0), wd = xin.dim(1), cin = xin.dim(2);
  int k = ker.dim(0), cout = ker.dim(3);
  int ho = conv_out_size(h, stride), wo = conv_out_size(wd, stride);
  int pb = pad_begin(k);

  Node n;
  n.op = Op::conv2d;
  n.in0 = x;
  n.in1 = w;
  n.stride = stride;
  n.value = Tensor::hwc(ho, wo, cout);
  std::vector<real> acc(size_t(cout), real(0));
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      std::memset(acc.data(), 0, sizeof(real) * size_t(cout));
      for (int ky = 0; ky < k; ++ky) {
        int iy = oy * stride + ky - pb;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          int ix = ox * stride + kx - pb;
          if (ix < 0 || ix >= wd) continue;
          const real* xp = xin.data.data() + (int64_t(iy) * wd + ix) * cin;
          const real* wp =
              ker.data.data() + (int64_t(ky) * k + kx) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            real xv = xp[ci];
            const real* wrow = wp + int64_t(ci) * cout;
            for (int co = 0; co < cout; ++co) acc[size_t(co)] += xv * wrow[co];
          }
        }
      }
      std::memcpy(n.value.data.data() + (int64_t(oy) * wo + ox) * cout,
                  acc.data(), sizeof(real) * size_t(cout));
    }
  }
  return push(std::move(n), "conv2d");
}

Tape::NodeId Tape::add_channel_bias(NodeId x, NodeId b) {
  const Tensor& xin = at(x).value;
  const Tensor& bias = at(b).value;
  require(xin.rank() == 3, "add_channel_bias", "input must be rank 3");
  require(bias.rank() == 1 && bias.dim(0) == xin.dim(2), "add_channel_bias",
          "bias length must equal channel count");
  Node n;
  n.op = Op::add_channel_bias;
  n.in0 = x;
  n.in1 = b;
  n.value = xin;
  int c = xin.dim(2);
  int64_t pixels = int64_t(xin.dim(0)) * xin.dim(1);
  for (int64_t p = 0; p < pixels; ++p) {
    real* out = n.value.data.data() + p * c;
    for (int ci = 0; ci < c; ++ci) out[ci] += bias.data[size_t(ci)];
  }
  return push(std::move(n), "add_channel_bias");
}

Tape::NodeId Tape::instance_norm(NodeId x) {
  const Tensor& xin = at(x).value;
  require(xin.rank() == 3, "instance_norm", "input must be rank 3");
  int c = xin.dim(2);
  int64_t pixels = int64_t(xin.dim(0)) * xin.dim(1);
  require(pixels >= 1, "instance_norm", "empty spatial extent");

  Node n;
  n.op = Op::instance_norm;
  n.in0 = x;
  n.value = Tensor(xin.shape);
  n.aux.resize(size_t(c));  // per-channel 1/sqrt(var + eps)
  constexpr double kEps = 1e-5;
  for (int ci = 0; ci < c; ++ci) {
    double sum = 0.0;
    for (int64_t p = 0; p < pixels; ++p) sum += double(xin.data[p * c + ci]);
    double mean = sum / double(pixels);
    double var = 0.0;
    for (int64_t p = 0; p < pixels; ++p) {
      double d = double(xin.data[p * c + ci]) - mean;
      var += d * d;
    }
    var /= double(pixels);
    double sinv = 1.0 / std::sqrt(var + kEps);
    n.aux[size_t(ci)] = real(sinv);
    for (int64_t p = 0; p < pixels; ++p)
      n.value.data[p * c + ci] =
          real((double(xin.data[p * c + ci]) - mean) * sinv);
  }
  return push(std::move(n), "instance_norm");
}

Tape::NodeId Tape::channel_means(NodeId x) {
  const Tensor& xin = at(x).value;
  require(xin.rank() == 3, "channel_means", "input must be rank 3");
  int c = xin.dim(2);
  int64_t pixels = int64_t(xin.dim(0)) * xin.dim(1);
  Node n;
  n.op = Op::channel_means;
  n.in0 = x;
  n.value = Tensor::vec(c);
  for (int ci = 0; ci < c; ++ci) {
    double sum = 0.0;
    for (int64_t p = 0; p < pixels; ++p) sum += double(xin.data[p * c + ci]);
    n.value.data[size_t(ci)] = real(sum / double(pixels));
  }
  return push(std::move(n), "channel_means");
}

Tape::NodeId Tape::activation(NodeId x, ActKind kind) {
  const Tensor& xin = at(x).value;
  Node n;
  n.op = Op::activation;
  n.in0 = x;
  n.act = kind;
  n.value = Tensor(xin.shape);
  switch (kind) {
    case ActKind::leaky_relu:
      for (size_t i = 0; i < xin.data.size(); ++i) {
        real v = xin.data[i];
        n.value.data[i] = v >= real(0) ? v : real(0.2) * v;
      }
      break;
    case ActKind::selu:
      for (size_t i = 0; i < xin.data.size(); ++i) {
        double v = double(xin.data[i]);
        n.value.data[i] =
            real(v > 0.0 ? kSeluLambda * v
                         : kSeluLambda * kSeluAlpha * (std::exp(v) - 1.0));
      }
      break;
    case ActKind::sigmoid:
      for (size_t i = 0; i < xin.data.size(); ++i) {
        double v = double(xin.data[i]);
        double y = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                            : std::exp(v) / (1.0 + std::exp(v));
        // Keep outputs strictly inside (0,1): saturated values would
        // otherwise round to exact 0/1 in 32-bit storage. The clamp binds
        // only where the true slope is already below 1e-7.
        y = std::min(1.0 - 1e-7, std::max(1e-7, y));
        n.value.data[i] = real(y);
      }
      break;
  }
  return push(std::move(n), "activation");
}

Tape::NodeId Tape::nearest_upsample2x(NodeId x) {
  const Tensor& xin = at(x).value;
  require(xin.rank() == 3, "nearest_upsample2x", "input must be rank 3");
  int h = xin.dim(0), w = xin.dim(1), c = xin.dim(2);
  Node n;
  n.op = Op::upsample2x;
  n.in0 = x;
  n.value = Tensor::hwc(h * 2, w * 2, c);
  for (int y = 0; y < h * 2; ++y) {
    const real* src = xin.data.data() + int64_t(y / 2) * w * c;
    real* dst = n.value.data.data() + int64_t(y) * (w * 2) * c;
    for (int xp = 0; xp < w * 2; ++xp)
      std::memcpy(dst + int64_t(xp) * c, src + int64_t(xp / 2) * c,
                  sizeof(real) * size_t(c));
  }
  return push(std::move(n), "nearest_upsample2x");
}

Tape::NodeId Tape::concat_channels(NodeId a, NodeId b) {
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  require(ta.rank() == 3 && tb.rank() == 3, "concat_channels", "rank 3 only");
  require(ta.dim(0) == tb.dim(0) && ta.dim(1) == tb.dim(1), "concat_channels",
          "spatial shape mismatch");
  int ca = ta.dim(2), cb = tb.dim(2);
  int64_t pixels = int64_t(ta.dim(0)) * ta.dim(1);
  Node n;
  n.op = Op::concat_channels;
  n.in0 = a;
  n.in1 = b;
  n.value = Tensor::hwc(ta.dim(0), ta.dim(1), ca + cb);
  for (int64_t p = 0; p < pixels; ++p) {
    real* dst = n.value.data.data() + p * (ca + cb);
    std::memcpy(dst, ta.data.data() + p * ca, sizeof(real) * size_t(ca));
    std::memcpy(dst + ca, tb.data.data() + p * cb, sizeof(real) * size_t(cb));
  }
  return push(std::move(n), "concat_channels");
}

Tape::NodeId Tape::concat_vec(NodeId a, NodeId b) {
  const Tensor& ta = at(a).value;
  const Tensor& tb = at(b).value;
  require(ta.rank() == 1 && tb.rank() == 1, "concat_vec", "rank 1 only");
  Node n;
  n.op = Op::concat_vec;
  n.in0 = a;
  n.in1 = b;
  n.value = Tensor::vec(ta.dim(0) + tb.dim(0));
  std::memcpy(n.value.data.data(), ta.data.data(),
              sizeof(real) * ta.data.size());
  std::memcpy(n.value.data.data() + ta.dim(0), tb.data.data(),
              sizeof(real) * tb.data.size());
  return push(std::move(n), "concat_vec");
}

Tape::NodeId Tape::fully_connected(NodeId x, NodeId w, NodeId b) {
  const Tensor& xin = at(x).value;
  const Tensor& mat = at(w).value;
  const Tensor& bias = at(b).value;
  require(xin.rank() == 1, "fully_connected", "input must be rank 1");
  require(mat.rank() == 2, "fully_connected", "weight must be rank 2");
  require(mat.dim(1) == xin.dim(0), "fully_connected",
          "weight columns must match input length");
  require(bias.rank() == 1 && bias.dim(0) == mat.dim(0), "fully_connected",
          "bias length must match output length");
  int out = mat.dim(0), in = mat.dim(1);
  Node n;
  n.op = Op::fully_connected;
  n.in0 = x;
  n.in1 = w;
  n.in2 = b;
  n.value = Tensor::vec(out);
  for (int o = 0; o < out; ++o)
    n.value.data[size_t(o)] =
        dot_fixed(mat.data.data() + int64_t(o) * in, xin.data.data(), in) +
        bias.data[size_t(o)];
  return push(std::move(n), "fully_connected");
}

Tape::NodeId Tape::dropout(NodeId x, double p, DropoutMode mode, Rng& rng) {
  require(p >= 0.0 && p < 1.0, "dropout", "p must be in [0,1)");
  const Tensor& xin = at(x).value;
  Node n;
  n.op = Op::dropout;
  n.in0 = x;
  n.value = xin;
  if (mode == DropoutMode::train && p > 0.0) {
    real keep_scale = real(1.0 / (1.0 - p));
    n.aux.resize(xin.data.size());
    for (size_t i = 0; i < xin.data.size(); ++i) {
      n.aux[i] = rng.uniform() < p ? real(0) : keep_scale;
      n.value.data[i] *= n.aux[i];
    }
  }
  return push(std::move(n), "dropout");
}

Tape::NodeId Tape::sum(NodeId x) {
  const Tensor& xin = at(x).value;
  Node n;
  n.op = Op::sum;
  n.in0 = x;
  n.value = Tensor::vec(1);
  double total = 0.0;
  for (real v : xin.data) total += double(v);
  n.value.data[0] = real(total);
  return push(std::move(n), "sum");
}

Tape::NodeId Tape::rendering_loss_node(NodeId x, const SvbrdfMaps& gt,
                                       Rng& rng) {
  const Tensor& xin = at(x).value;
  require(xin.rank() == 3 && xin.dim(2) == 9, "rendering_loss",
          "input must be (H,W,9)");
  require(xin.dim(0) == xin.dim(1) && xin.dim(0) == gt.resolution,
          "rendering_loss", "resolution mismatch with ground truth");
  int res = gt.resolution;
  int64_t pixels = int64_t(res) * res;

  // Decode the raw channels into maps, remembering the normal branch, the
  // raw pre-normalization x,y and the clamp gates so the eager gradient can
  // chain exactly.
  SvbrdfMaps pred(res);
  std::vector<uint8_t> gate(size_t(pixels) * 9, 1);
  std::vector<double> raw_xy(size_t(pixels) * 2);
  for (int64_t i = 0; i < pixels; ++i) {
    const real* px = xin.data.data() + i * 9;
    auto clamped = [&](int ch) {
      double v = double(px[ch]);
      if (v < 0.0 || v > 1.0) gate[size_t(i) * 9 + ch] = 0;
      return clamp01(v);
    };
    double nx = clamped(0) * 2.0 - 1.0;
    double ny = clamped(1) * 2.0 - 1.0;
    raw_xy[size_t(i) * 2 + 0] = nx;
    raw_xy[size_t(i) * 2 + 1] = ny;
    double r2 = nx * nx + ny * ny;
    Vec3 n = r2 <= 1.0 ? Vec3(nx, ny, std::sqrt(1.0 - r2))
                       : Vec3(nx, ny, 0.0) / std::sqrt(r2);
    pred.normal.data[i * 3 + 0] = real(n.x);
    pred.normal.data[i * 3 + 1] = real(n.y);
    pred.normal.data[i * 3 + 2] = real(n.z);
    pred.diffuse_albedo.data[i * 3 + 0] = real(clamped(2));
    pred.diffuse_albedo.data[i * 3 + 1] = real(clamped(3));
    pred.diffuse_albedo.data[i * 3 + 2] = real(clamped(4));
    pred.roughness.data[i] = real(clamped(5));
    pred.specular_albedo.data[i * 3 + 0] = real(clamped(6));
    pred.specular_albedo.data[i * 3 + 1] = real(clamped(7));
    pred.specular_albedo.data[i * 3 + 2] = real(clamped(8));
  }

  MapsGradientXyz mg(res);
  double loss = rendering_loss_with_grad(pred, gt, rng, &mg);

  Node n;
  n.op = Op::stored_grad_loss;
  n.in0 = x;
  n.value = Tensor::vec(1);
  n.value.data[0] = real(loss);
  n.aux.assign(size_t(pixels) * 9, real(0));
  for (int64_t i = 0; i < pixels; ++i) {
    real* a = n.aux.data() + i * 9;
    const uint8_t* g8 = gate.data() + i * 9;
    double rx = raw_xy[size_t(i) * 2 + 0];
    double ry = raw_xy[size_t(i) * 2 + 1];
    double nz = double(pred.normal.data[i * 3 + 2]);
    double gx = double(mg.d_normal_xyz.data[i * 3 + 0]);
    double gy = double(mg.d_normal_xyz.data[i * 3 + 1]);
    double gz = double(mg.d_normal_xyz.data[i * 3 + 2]);
    double dnx, dny;
    if (nz > 0.0) {
      // In-disc branch: n = (x, y, sqrt(1-x^2-y^2)), dz/dx = -x/z.
      dnx = gx - (rx / std::max(nz, 1e-6)) * gz;
      dny = gy - (ry / std::max(nz, 1e-6)) * gz;
    } else {
      // Clamped branch: n = (x, y, 0)/r, r = sqrt(x^2+y^2) >= 1, so
      // dn/dx = (y^2, -x*y, 0)/r^3 and dn/dy = (-x*y, x^2, 0)/r^3.
      double r2 = rx * rx + ry * ry;
      double r3 = r2 * std::sqrt(r2);
      dnx = (ry * ry * gx - rx * ry * gy) / r3;
      dny = (-rx * ry * gx + rx * rx * gy) / r3;
    }
    // raw01 -> [-1,1] doubles the normal partials.
    a[0] = real(2.0 * dnx * g8[0]);
    a[1] = real(2.0 * dny * g8[1]);
    a[2] = real(double(mg.d_diffuse.data[i * 3 + 0]) * g8[2]);
    a[3] = real(double(mg.d_diffuse.data[i * 3 + 1]) * g8[3]);
    a[4] = real(double(mg.d_diffuse.data[i * 3 + 2]) * g8[4]);
    a[5] = real(double(mg.d_roughness.data[i]) * g8[5]);
    a[6] = real(double(mg.d_specular.data[i * 3 + 0]) * g8[6]);
    a[7] = real(double(mg.d_specular.data[i * 3 + 1]) * g8[7]);
    a[8] = real(double(mg.d_specular.data[i * 3 + 2]) * g8[8]);
  }
  return push(std::move(n), "rendering_loss");
}

Tape::NodeId Tape::l1_loss_node(NodeId x, const Tensor& target) {
  const Tensor& xin = at(x).value;
  require(xin.shape == target.shape, "l1_loss", "shape mismatch");
  Node n;
  n.op = Op::stored_grad_loss;
  n.in0 = x;
  n.value = Tensor::vec(1);
  n.aux.assign(xin.data.size(), real(0));
  const double count = double(xin.data.size());
  double total = 0.0;
  for (size_t i = 0; i < xin.data.size(); ++i) {
    double diff = double(xin.data[i]) - double(target.data[i]);
    total += std::abs(diff);
    n.aux[i] = real((diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / count);
  }
  n.value.data[0] = real(total / count);
  return push(std::move(n), "l1_loss");
}

Tape::NodeId Tape::mse_loss_node(NodeId x, const Tensor& target) {
  const Tensor& xin = at(x).value;
  require(xin.shape == target.shape, "mse_loss", "shape mismatch");
  Node n;
  n.op = Op::stored_grad_loss;
  n.in0 = x;
  n.value = Tensor::vec(1);
  n.aux.assign(xin.data.size(), real(0));
  const double count = double(xin.data.size());
  double total = 0.0;
  for (size_t i = 0; i < xin.data.size(); ++i) {
    double diff = double(xin.data[i]) - double(target.data[i]);
    total += diff * diff;
    n.aux[i] = real(2.0 * diff / count);
  }
  n.value.data[0] = real(total / count);
  return push(std::move(n), "mse_loss");
}

void Tape::backward(NodeId loss) {
  require(loss >= 0 && loss < size(), "backward", "bad loss node");
  require(at(loss).value.numel() == 1, "backward", "loss must be scalar");
  for (Node& n : nodes_) {
    n.grad = Tensor(n.value.shape);
  }
  at(loss).grad.data[0] = real(1);

  for (NodeId id = loss; id >= 0; --id) {
    Node& n = at(id);
    bool any = false;
    for (real g : n.grad.data)
      if (g != real(0)) {
        any = true;
        break;
      }
    if (!any || n.op == Op::leaf) continue;
    const Tensor& gy = n.grad;

    switch (n.op) {
      case Op::leaf:
        break;
      case Op::conv2d: {
        const Tensor& xin = at(n.in0).value;
        const Tensor& ker = at(n.in1).value;
        Tensor& dx = at(n.in0).grad;
        Tensor& dw = at(n.in1).grad;
        int h = xin.dim(0), wd = xin.dim(1), cin = xin.dim(2);
        int k = ker.dim(0), cout = ker.dim(3);
        int ho = n.value.dim(0), wo = n.value.dim(1);
        int pb = pad_begin(k);
        for (int oy = 0; oy < ho; ++oy) {
          for (int ox = 0; ox < wo; ++ox) {
            const real* dyp =
                gy.data.data() + (int64_t(oy) * wo + ox) * cout;
            for (int ky = 0; ky < k; ++ky) {
              int iy = oy * n.stride + ky - pb;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < k; ++kx) {
                int ix = ox * n.stride + kx - pb;
                if (ix < 0 || ix >= wd) continue;
                int64_t xoff = (int64_t(iy) * wd + ix) * cin;
                int64_t woff = (int64_t(ky) * k + kx) * cin * cout;
                const real* xp = xin.data.data() + xoff;
                real* dxp = dx.data.data() + xoff;
                for (int ci = 0; ci < cin; ++ci) {
                  const real* wrow = ker.data.data() + woff + int64_t(ci) * cout;
                  real* dwrow = dw.data.data() + woff + int64_t(ci) * cout;
                  real xv = xp[ci];
                  for (int co = 0; co < cout; ++co) dwrow[co] += xv * dyp[co];
                  dxp[ci] += dot_fixed(wrow, dyp, cout);
                }
              }
            }
          }
        }
        break;
      }
      case Op::add_channel_bias: {
        Tensor& dx = at(n.in0).grad;
        Tensor& db = at(n.in1).grad;
        int c = n.value.dim(2);
        int64_t pixels = int64_t(n.value.dim(0)) * n.value.dim(1);
        for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += gy.data[i];
        for (int ci = 0; ci < c; ++ci) {
          double s = 0.0;
          for (int64_t p = 0; p < pixels; ++p) s += double(gy.data[p * c + ci]);
          db.data[size_t(ci)] += real(s);
        }
        break;
      }
      case Op::instance_norm: {
        Tensor& dx = at(n.in0).grad;
        int c = n.value.dim(2);
        int64_t pixels = int64_t(n.value.dim(0)) * n.value.dim(1);
        for (int ci = 0; ci < c; ++ci) {
          double gmean = 0.0, gymean = 0.0;
          for (int64_t p = 0; p < pixels; ++p) {
            double g = double(gy.data[p * c + ci]);
            gmean += g;
            gymean += g * double(n.value.data[p * c + ci]);
          }
          gmean /= double(pixels);
          gymean /= double(pixels);
          double sinv = double(n.aux[size_t(ci)]);
          for (int64_t p = 0; p < pixels; ++p) {
            double g = double(gy.data[p * c + ci]);
            double y = double(n.value.data[p * c + ci]);
            dx.data[p * c + ci] += real(sinv * (g - gmean - y * gymean));
          }
        }
        break;
      }
      case Op::channel_means: {
        Tensor& dx = at(n.in0).grad;
        const Tensor& xin = at(n.in0).value;
        int c = xin.dim(2);
        int64_t pixels = int64_t(xin.dim(0)) * xin.dim(1);
        for (int ci = 0; ci < c; ++ci) {
          real g = real(double(gy.data[size_t(ci)]) / double(pixels));
          for (int64_t p = 0; p < pixels; ++p) dx.data[p * c + ci] += g;
        }
        break;
      }
      case Op::activation: {
        Tensor& dx = at(n.in0).grad;
        const Tensor& xin = at(n.in0).value;
        switch (n.act) {
          case ActKind::leaky_relu:
            for (size_t i = 0; i < dx.data.size(); ++i)
              dx.data[i] += gy.data[i] * (xin.data[i] >= real(0) ? real(1)
                                                                 : real(0.2));
            break;
          case ActKind::selu:
            for (size_t i = 0; i < dx.data.size(); ++i) {
              double d = double(xin.data[i]) > 0.0
                             ? kSeluLambda
                             : double(n.value.data[i]) +
                                   kSeluLambda * kSeluAlpha;
              dx.data[i] += real(double(gy.data[i]) * d);
            }
            break;
          case ActKind::sigmoid:
            for (size_t i = 0; i < dx.data.size(); ++i) {
              double y = double(n.value.data[i]);
              dx.data[i] += real(double(gy.data[i]) * y * (1.0 - y));
            }
            break;
        }
        break;
      }
      case Op::upsample2x: {
        Tensor& dx = at(n.in0).grad;
        int h = dx.shape[0], w = dx.shape[1], c = dx.shape[2];
        for (int y = 0; y < h * 2; ++y) {
          real* dst = dx.data.data() + int64_t(y / 2) * w * c;
          const real* src = gy.data.data() + int64_t(y) * (w * 2) * c;
          for (int xp = 0; xp < w * 2; ++xp) {
            real* d = dst + int64_t(xp / 2) * c;
            const real* s = src + int64_t(xp) * c;
            for (int ci = 0; ci < c; ++ci) d[ci] += s[ci];
          }
        }
        break;
      }
      case Op::concat_channels: {
        Tensor& da = at(n.in0).grad;
        Tensor& db = at(n.in1).grad;
        int ca = da.shape[2], cb = db.shape[2];
        int64_t pixels = int64_t(n.value.dim(0)) * n.value.dim(1);
        for (int64_t p = 0; p < pixels; ++p) {
          const real* src = gy.data.data() + p * (ca + cb);
          real* pa = da.data.data() + p * ca;
          real* pb2 = db.data.data() + p * cb;
          for (int ci = 0; ci < ca; ++ci) pa[ci] += src[ci];
          for (int ci = 0; ci < cb; ++ci) pb2[ci] += src[ca + ci];
        }
        break;
      }
      case Op::concat_vec: {
        Tensor& da = at(n.in0).grad;
        Tensor& db = at(n.in1).grad;
        int la = da.shape[0];
        for (int i = 0; i < la; ++i) da.data[size_t(i)] += gy.data[size_t(i)];
        for (size_t i = 0; i < db.data.size(); ++i)
          db.data[i] += gy.data[size_t(la) + i];
        break;
      }
      case Op::fully_connected: {
        Tensor& dx = at(n.in0).grad;
        Tensor& dw = at(n.in1).grad;
        Tensor& db = at(n.in2).grad;
        const Tensor& xin = at(n.in0).value;
        const Tensor& mat = at(n.in1).value;
        int out = mat.dim(0), in = mat.dim(1);
        for (int o = 0; o < out; ++o) {
          real g = gy.data[size_t(o)];
          db.data[size_t(o)] += g;
          real* dwrow = dw.data.data() + int64_t(o) * in;
          const real* wrow = mat.data.data() + int64_t(o) * in;
          for (int i = 0; i < in; ++i) {
            dwrow[i] += g * xin.data[size_t(i)];
            dx.data[size_t(i)] += g * wrow[i];
          }
        }
        break;
      }
      case Op::dropout: {
        Tensor& dx = at(n.in0).grad;
        if (n.aux.empty()) {
          for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += gy.data[i];
        } else {
          for (size_t i = 0; i < dx.data.size(); ++i)
            dx.data[i] += gy.data[i] * n.aux[i];
        }
        break;
      }
      case Op::sum: {
        Tensor& dx = at(n.in0).grad;
        real g = gy.data[0];
        for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += g;
        break;
      }
      case Op::stored_grad_loss: {
        Tensor& dx = at(n.in0).grad;
        real g = gy.data[0];
        for (size_t i = 0; i < dx.data.size(); ++i)
          dx.data[i] += g * n.aux[i];
        break;
      }
    }
  }
}

}  // namespace svbrdf
