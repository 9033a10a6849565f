#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "svbrdf/core.hpp"
#include "svbrdf/rng.hpp"
#include "svbrdf/types.hpp"

namespace svbrdf {

// Dense value array with up to 4 axes. The network uses rank 3 (H, W, C)
// feature maps, rank 1 vectors, rank 2 FC matrices and rank 4 conv kernels
// (K, K, Cin, Cout); channels are the fastest-varying axis of feature maps.
struct Tensor {
  std::vector<int> shape;
  std::vector<real> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(size_t(numel()), real(0));
  }

  int64_t numel() const {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  int rank() const { return int(shape.size()); }
  int dim(int i) const { return shape[size_t(i)]; }

  static Tensor vec(int n) { return Tensor({n}); }
  static Tensor hwc(int h, int w, int c) { return Tensor({h, w, c}); }
};

enum class ActKind { leaky_relu, selu, sigmoid };
enum class DropoutMode { train, eval };

// SELU constants (Klambauer et al.).
constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

// Recorded operation graph for reverse-mode differentiation. Nodes are
// created in topological order by construction; backward() visits them once
// in reverse. Every forward op scans its output for non-finite values and
// throws on contamination. A Tape is single-owner; independent Tapes may run
// concurrently.
class Tape {
 public:
  using NodeId = int;

  // Leaves. Parameters are the tensors whose gradients training consumes;
  // plain inputs also receive gradients (harmlessly) when reached.
  NodeId input(Tensor value);
  NodeId param(Tensor value);

  // Strided convolution, same-padding: out = (n-1)/stride + 1 per axis, with
  // pad (K-1)/2 before and K-1-that after. Kernel shape (K, K, Cin, Cout).
  NodeId conv2d(NodeId x, NodeId w, int stride);

  // y[h,w,c] = x[h,w,c] + b[c].
  NodeId add_channel_bias(NodeId x, NodeId b);

  // Per-channel y = (x - mean) / sqrt(var + 1e-5), biased variance over the
  // spatial axes. Means are exposed by the separate channel_means op so they
  // participate in differentiation.
  NodeId instance_norm(NodeId x);
  NodeId channel_means(NodeId x);  // rank-1 output of length C

  NodeId activation(NodeId x, ActKind kind);  // leaky slope fixed at 0.2

  NodeId nearest_upsample2x(NodeId x);
  NodeId concat_channels(NodeId a, NodeId b);  // rank 3, same H/W
  NodeId concat_vec(NodeId a, NodeId b);       // rank 1

  // y = W x + b with W of shape (out, in), b of shape (out).
  NodeId fully_connected(NodeId x, NodeId w, NodeId b);

  // Train mode zeroes each element with probability p and scales survivors
  // by 1/(1-p); eval mode is the identity. The mask is drawn eagerly from
  // `rng` (numel draws in element order) so replay is deterministic.
  NodeId dropout(NodeId x, double p, DropoutMode mode, Rng& rng);

  NodeId sum(NodeId x);  // scalar

  // Stochastic rendering loss against a ground-truth material. `x` is the
  // 9-channel raw network output in [0,1]; the forward pass decodes it,
  // draws 3+6 configs from `rng`, and both value and input gradient are
  // computed eagerly (training always wants the gradient).
  NodeId rendering_loss_node(NodeId x, const SvbrdfMaps& gt, Rng& rng);

  // Mean absolute difference against a same-shape target, for the map-space
  // ablation baseline.
  NodeId l1_loss_node(NodeId x, const Tensor& target);

  // Mean squared difference against a same-shape target, for the mean-color
  // toy task.
  NodeId mse_loss_node(NodeId x, const Tensor& target);

  const Tensor& value(NodeId id) const { return nodes_[size_t(id)].value; }
  const Tensor& grad(NodeId id) const { return nodes_[size_t(id)].grad; }

  // Reverse-topological accumulation from a scalar loss; gradients of nodes
  // the loss does not reach stay zero. Rejects non-scalar losses.
  void backward(NodeId loss);

  int size() const { return int(nodes_.size()); }

 private:
  enum class Op {
    leaf,
    conv2d,
    add_channel_bias,
    instance_norm,
    channel_means,
    activation,
    upsample2x,
    concat_channels,
    concat_vec,
    fully_connected,
    dropout,
    sum,
    stored_grad_loss,  // rendering_loss_node / l1_loss_node
  };

  struct Node {
    Op op = Op::leaf;
    NodeId in0 = -1, in1 = -1, in2 = -1;
    Tensor value;
    Tensor grad;
    int stride = 1;
    ActKind act = ActKind::leaky_relu;
    std::vector<real> aux;  // dropout mask or eagerly computed input grad
  };

  NodeId push(Node n, const char* opname);
  Node& at(NodeId id) { return nodes_[size_t(id)]; }

  std::vector<Node> nodes_;
};

}  // namespace svbrdf
