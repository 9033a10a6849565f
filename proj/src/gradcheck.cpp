#include "svbrdf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "svbrdf/loss.hpp"
#include "svbrdf/network.hpp"
#include "svbrdf/render.hpp"
#include "svbrdf/rng.hpp"
#include "svbrdf/shading.hpp"
#include "svbrdf/tensor.hpp"

namespace svbrdf {
namespace {

constexpr bool kReal64 = sizeof(real) == 8;

// Accumulates |analytic - fd| / max(|analytic|, |fd|, floor). The floor is a
// fraction of the largest gradient magnitude in the same comparison group,
// keeping float-roundoff noise on near-zero entries from dominating: those
// entries are judged by absolute closeness at the group's gradient scale.
struct SuiteAcc {
  GradCheckResult result;
  std::vector<double> analytic, fd;

  explicit SuiteAcc(std::string name, double tol) {
    result.name = std::move(name);
    result.tolerance = tol;
  }
  void add(double a, double f) {
    analytic.push_back(a);
    fd.push_back(f);
  }
  // Folds the entries buffered since the previous flush into the running
  // worst, with a floor local to this group.
  void flush_group(double floor_frac) {
    double gmax = 0.0;
    for (double a : analytic) gmax = std::max(gmax, std::abs(a));
    double floor_ = std::max(1e-6, floor_frac * gmax);
    for (size_t i = 0; i < analytic.size(); ++i) {
      double denom =
          std::max(std::max(std::abs(analytic[i]), std::abs(fd[i])), floor_);
      result.worst_rel =
          std::max(result.worst_rel, std::abs(analytic[i] - fd[i]) / denom);
    }
    result.checks += int(analytic.size());
    analytic.clear();
    fd.clear();
  }
  GradCheckResult finish(double floor_frac) {
    flush_group(floor_frac);
    return result;
  }
};

Vec3 unit_normal(double x, double y) {
  return {x, y, std::sqrt(std::max(0.0, 1.0 - x * x - y * y))};
}

// ---------------------------------------------------------------------------
// Shading partials vs central differences, 100 non-degenerate points.

GradCheckResult check_shading() {
  SuiteAcc acc("shading", 1e-4);
  Rng rng(41);
  const double h = 1e-4;
  int accepted = 0;
  while (accepted < 100) {
    double nx = rng.uniform(-0.5, 0.5), ny = rng.uniform(-0.5, 0.5);
    if (nx * nx + ny * ny > 0.49) continue;
    Vec3 n = unit_normal(nx, ny);
    Vec3 wi = normalize(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                             rng.uniform(0.2, 1.5)));
    Vec3 wo = normalize(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                             rng.uniform(0.2, 1.5)));
    if (dot(n, wi) < 0.2 || dot(n, wo) < 0.2) continue;
    Vec3 diff(rng.uniform(0.05, 0.9), rng.uniform(0.05, 0.9),
              rng.uniform(0.05, 0.9));
    Vec3 spec(rng.uniform(0.05, 0.9), rng.uniform(0.05, 0.9),
              rng.uniform(0.05, 0.9));
    double rough = rng.uniform(0.2, 0.9);
    ++accepted;

    BrdfPoint p(n, diff, spec, rough);
    BrdfGradient g = eval_brdf_gradient(p, wi, wo);
    auto fd3 = [&](const std::function<BrdfPoint(double)>& at) {
      Vec3 fp = eval_brdf(at(h), wi, wo);
      Vec3 fm = eval_brdf(at(-h), wi, wo);
      return (fp - fm) * (1.0 / (2.0 * h));
    };

    Vec3 fd_nx = fd3([&](double d) {
      return BrdfPoint(unit_normal(nx + d, ny), diff, spec, rough);
    });
    Vec3 fd_ny = fd3([&](double d) {
      return BrdfPoint(unit_normal(nx, ny + d), diff, spec, rough);
    });
    Vec3 fd_rough = fd3(
        [&](double d) { return BrdfPoint(n, diff, spec, rough + d); });
    for (int c = 0; c < 3; ++c) {
      acc.add((&g.d_nx.x)[c], (&fd_nx.x)[c]);
      acc.add((&g.d_ny.x)[c], (&fd_ny.x)[c]);
      acc.add((&g.d_roughness.x)[c], (&fd_rough.x)[c]);
    }
    for (int c = 0; c < 3; ++c) {
      Vec3 dp = diff, dm = diff;
      (&dp.x)[c] += h;
      (&dm.x)[c] -= h;
      Vec3 fp = eval_brdf(BrdfPoint(n, dp, spec, rough), wi, wo);
      Vec3 fm = eval_brdf(BrdfPoint(n, dm, spec, rough), wi, wo);
      acc.add((&g.d_diffuse.x)[c], ((&fp.x)[c] - (&fm.x)[c]) / (2.0 * h));
      Vec3 sp = spec, sm = spec;
      (&sp.x)[c] += h;
      (&sm.x)[c] -= h;
      fp = eval_brdf(BrdfPoint(n, diff, sp, rough), wi, wo);
      fm = eval_brdf(BrdfPoint(n, diff, sm, rough), wi, wo);
      acc.add((&g.d_specular.x)[c], ((&fp.x)[c] - (&fm.x)[c]) / (2.0 * h));
    }
  }
  return acc.finish(1e-4);
}

// ---------------------------------------------------------------------------
// Renderer backward vs per-pixel finite differences on 8x8 maps.

SvbrdfMaps random_maps(Rng& rng, int res, double rough_lo = 0.25) {
  SvbrdfMaps m(res);
  for (int64_t p = 0; p < int64_t(res) * res; ++p) {
    double nx = rng.uniform(-0.45, 0.45), ny = rng.uniform(-0.45, 0.45);
    Vec3 n = unit_normal(nx, ny);
    m.normal.data[p * 3 + 0] = real(n.x);
    m.normal.data[p * 3 + 1] = real(n.y);
    m.normal.data[p * 3 + 2] = real(n.z);
    for (int c = 0; c < 3; ++c) {
      m.diffuse_albedo.data[p * 3 + c] = real(rng.uniform(0.1, 0.9));
      m.specular_albedo.data[p * 3 + c] = real(rng.uniform(0.1, 0.9));
    }
    m.roughness.data[p] = real(rng.uniform(rough_lo, 0.9));
  }
  return m;
}

// The nine scalar degrees of freedom of one pixel, FD-perturbed in the same
// parameterization the gradients use (normal via x,y with dependent z).
void perturb_pixel(SvbrdfMaps& m, int64_t p, int channel, double delta) {
  if (channel < 2) {
    double x = double(m.normal.data[p * 3 + 0]);
    double y = double(m.normal.data[p * 3 + 1]);
    (channel == 0 ? x : y) += delta;
    Vec3 n = unit_normal(x, y);
    m.normal.data[p * 3 + 0] = real(n.x);
    m.normal.data[p * 3 + 1] = real(n.y);
    m.normal.data[p * 3 + 2] = real(n.z);
  } else if (channel < 5) {
    m.diffuse_albedo.data[p * 3 + (channel - 2)] += real(delta);
  } else if (channel < 6) {
    m.roughness.data[p] += real(delta);
  } else {
    m.specular_albedo.data[p * 3 + (channel - 6)] += real(delta);
  }
}

double pixel_grad(const MapsGradient& g, int64_t p, int channel) {
  if (channel < 2) return double(g.d_normal_xy.data[p * 2 + channel]);
  if (channel < 5) return double(g.d_diffuse.data[p * 3 + (channel - 2)]);
  if (channel < 6) return double(g.d_roughness.data[p]);
  return double(g.d_specular.data[p * 3 + (channel - 6)]);
}

GradCheckResult check_render() {
  SuiteAcc acc("render", 1e-3);
  const int res = 8;
  // The 32-bit step is chosen against stored-radiance quantization: the
  // secant reads float pixels, so a smaller step divides quantization noise
  // by less signal.
  const double h = kReal64 ? 1e-5 : 3e-3;
  Rng rng(907);
  // Roughness floor 0.4: sharper lobes make the finite difference hopeless in
  // 32-bit (stored-radiance quantization times huge lobe curvature), while
  // the shading suite already covers them via direct double-precision BRDF
  // evaluation.
  SvbrdfMaps maps = random_maps(rng, res, 0.4);

  std::vector<RenderConfig> cfgs(2);
  cfgs[0].mode = RenderConfig::Mode::directional;
  cfgs[0].light = normalize(Vec3(0.3, -0.2, 1.0));
  cfgs[0].view = normalize(Vec3(-0.1, 0.4, 1.0));
  cfgs[1].mode = RenderConfig::Mode::positional;
  cfgs[1].light = Vec3(0.4, 0.3, 1.6);
  cfgs[1].view = Vec3(-0.3, -0.2, 2.1);
  cfgs[1].include_falloff = true;

  for (const RenderConfig& cfg : cfgs) {
    for (int spot = 0; spot < 25; ++spot) {
      int64_t p = int64_t(rng.uniform_int(uint64_t(res) * res));
      Vec3 w(rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0),
             rng.uniform(0.2, 1.0));
      ImageF d_radiance(res, res, 3);
      for (int c = 0; c < 3; ++c) d_radiance.data[p * 3 + c] = real((&w.x)[c]);
      MapsGradient g(res);
      render_svbrdf_backward(maps, cfg, d_radiance, g);
      auto objective = [&](const SvbrdfMaps& mm) {
        ImageF r = render_svbrdf(mm, cfg);
        double s = 0.0;
        for (int c = 0; c < 3; ++c)
          s += (&w.x)[c] * double(r.data[p * 3 + c]);
        return s;
      };
      // Five-point stencil: wide enough steps to beat stored-radiance
      // quantization, with the h^2 truncation term cancelled.
      auto at = [&](int ch, double d) {
        SvbrdfMaps m2 = maps;
        perturb_pixel(m2, p, ch, d);
        return objective(m2);
      };
      for (int ch = 0; ch < 9; ++ch) {
        double fd = (8.0 * (at(ch, h) - at(ch, -h)) -
                     (at(ch, 2.0 * h) - at(ch, -2.0 * h))) /
                    (12.0 * h);
        acc.add(pixel_grad(g, p, ch), fd);
      }
    }
  }
  return acc.finish(5e-3);
}

// ---------------------------------------------------------------------------
// Rendering-loss gradient vs finite differences, fixed seed, 8x8 maps. Both
// ground-truth albedos are scaled down uniformly so the ground-truth render
// is strictly below the predicted one at every lit pixel; otherwise a |.|
// kink can sit inside the FD step wherever the two renders cross.

GradCheckResult check_loss() {
  SuiteAcc acc("loss", 1e-3);
  const int res = 8;
  const double h = kReal64 ? 1e-5 : 1e-3;
  const uint64_t seed = 2024;
  Rng rng(55);
  SvbrdfMaps pred = random_maps(rng, res);
  SvbrdfMaps gt = pred;
  for (real& v : gt.diffuse_albedo.data) v = real(double(v) * 0.55);
  for (real& v : gt.specular_albedo.data) v = real(double(v) * 0.55);

  MapsGradient g(res);
  Rng lr(seed);
  rendering_loss_with_grad(pred, gt, lr, &g);

  // Spot-check coordinates whose gradient carries real magnitude. Weak
  // entries are nets of large cancelling per-light terms, where the 32-bit
  // analytic accumulation and the finite difference diverge for reasons
  // unrelated to gradient correctness.
  double gmax = 0.0;
  for (int64_t p = 0; p < int64_t(res) * res; ++p)
    for (int ch = 0; ch < 9; ++ch)
      gmax = std::max(gmax, std::abs(pixel_grad(g, p, ch)));
  std::vector<std::pair<int64_t, int>> pool;
  for (int64_t p = 0; p < int64_t(res) * res; ++p)
    for (int ch = 0; ch < 9; ++ch)
      if (std::abs(pixel_grad(g, p, ch)) >= 0.05 * gmax)
        pool.emplace_back(p, ch);

  for (int spot = 0; spot < 40; ++spot) {
    auto [p, ch] = pool[rng.uniform_int(pool.size())];
    SvbrdfMaps mp = pred, mm = pred;
    perturb_pixel(mp, p, ch, h);
    perturb_pixel(mm, p, ch, -h);
    Rng r1(seed), r2(seed);
    double fd = (rendering_loss(mp, gt, r1) - rendering_loss(mm, gt, r2)) /
                (2.0 * h);
    acc.add(pixel_grad(g, p, ch), fd);
  }
  return acc.finish(1e-3);
}

// ---------------------------------------------------------------------------
// Per-op tape checks: build a scalar graph from parameter tensors, compare
// backward() against central differences over every element.

using BuildFn =
    std::function<Tape::NodeId(Tape&, const std::vector<Tape::NodeId>&)>;

void check_tape_case(SuiteAcc& acc, std::vector<Tensor> inputs,
                     const BuildFn& build, double h) {
  Tape tape;
  std::vector<Tape::NodeId> ids;
  for (const Tensor& t : inputs) ids.push_back(tape.param(t));
  Tape::NodeId loss = build(tape, ids);
  tape.backward(loss);
  std::vector<Tensor> grads;
  for (Tape::NodeId id : ids) grads.push_back(tape.grad(id));

  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape t2;
    std::vector<Tape::NodeId> ids2;
    for (const Tensor& t : xs) ids2.push_back(t2.param(t));
    return double(t2.value(build(t2, ids2)).data[0]);
  };
  for (size_t k = 0; k < inputs.size(); ++k) {
    for (size_t i = 0; i < inputs[k].data.size(); ++i) {
      std::vector<Tensor> xp = inputs, xm = inputs;
      xp[k].data[i] += real(h);
      xm[k].data[i] -= real(h);
      double fd = (eval(xp) - eval(xm)) / (2.0 * h);
      acc.add(double(grads[k].data[i]), fd);
    }
  }
  // Each case gets its own floor: gradient scales differ by orders of
  // magnitude between ops, and a shared floor would let one case's scale
  // mask another's soft spots. The fraction is sized to one 32-bit ulp of
  // the objective over the step, the quantum the secant moves in.
  acc.flush_group(0.3);
}

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (real& v : t.data) {
    double x = rng.uniform(lo, hi);
    // Keep activations away from the leaky/selu kink at zero.
    if (std::abs(x) < 0.05) x = x < 0 ? x - 0.05 : x + 0.05;
    v = real(x);
  }
  return t;
}

GradCheckResult check_tensor_ops() {
  SuiteAcc acc("tensor", 1e-3);
  const double h = kReal64 ? 1e-5 : 1e-3;
  Rng rng(333);
  auto mse_target = [&](std::vector<int> shape) {
    return random_tensor(rng, std::move(shape), -1.0, 1.0);
  };

  {  // conv2d stride 1, even kernel (asymmetric padding)
    Tensor target = mse_target({4, 4, 3});
    check_tape_case(acc,
                    {random_tensor(rng, {4, 4, 2}, -1, 1),
                     random_tensor(rng, {4, 4, 2, 3}, -0.5, 0.5)},
                    [target](Tape& t, const std::vector<Tape::NodeId>& in) {
                      return t.mse_loss_node(t.conv2d(in[0], in[1], 1), target);
                    },
                    h);
  }
  {  // conv2d stride 2, odd kernel
    Tensor target = mse_target({3, 3, 2});
    check_tape_case(acc,
                    {random_tensor(rng, {5, 5, 2}, -1, 1),
                     random_tensor(rng, {3, 3, 2, 2}, -0.5, 0.5)},
                    [target](Tape& t, const std::vector<Tape::NodeId>& in) {
                      return t.mse_loss_node(t.conv2d(in[0], in[1], 2), target);
                    },
                    h);
  }
  {  // channel bias
    Tensor target = mse_target({3, 3, 4});
    check_tape_case(acc,
                    {random_tensor(rng, {3, 3, 4}, -1, 1),
                     random_tensor(rng, {4}, -0.5, 0.5)},
                    [target](Tape& t, const std::vector<Tape::NodeId>& in) {
                      return t.mse_loss_node(t.add_channel_bias(in[0], in[1]),
                                             target);
                    },
                    h);
  }
  {  // instance norm + channel means, both heads contributing. Small case
     // and tight input spread: normalized outputs are stored at float
     // precision, so the FD signal must stay above that quantization.
    Tensor t1 = mse_target({2, 2, 2});
    Tensor t2 = mse_target({2});
    check_tape_case(
        acc, {random_tensor(rng, {2, 2, 2}, -0.35, 0.35)},
        [t1, t2](Tape& t, const std::vector<Tape::NodeId>& in) {
          Tape::NodeId a = t.mse_loss_node(t.instance_norm(in[0]), t1);
          Tape::NodeId b = t.mse_loss_node(t.channel_means(in[0]), t2);
          return t.sum(t.concat_vec(a, b));
        },
        h);
  }
  for (ActKind kind :
       {ActKind::leaky_relu, ActKind::selu, ActKind::sigmoid}) {  // activations
    // Small tensors and a wide target range: sigmoid' <= 1/4 shrinks the
    // per-element gradients, and the mean reduction shrinks them with N, so
    // keep the residual (activation - target) large instead.
    Tensor target = random_tensor(rng, {2, 2, 1}, -2.0, 2.0);
    check_tape_case(acc, {random_tensor(rng, {2, 2, 1}, -1.5, 1.5)},
                    [target, kind](Tape& t, const std::vector<Tape::NodeId>& in) {
                      return t.mse_loss_node(t.activation(in[0], kind), target);
                    },
                    h);
  }
  {  // nearest upsample
    Tensor target = mse_target({6, 6, 2});
    check_tape_case(acc, {random_tensor(rng, {3, 3, 2}, -1, 1)},
                    [target](Tape& t, const std::vector<Tape::NodeId>& in) {
                      return t.mse_loss_node(t.nearest_upsample2x(in[0]),
                                             target);
                    },
                    h);
  }
  {  // channel concat
    Tensor target = mse_target({2, 2, 3});
    check_tape_case(acc,
                    {random_tensor(rng, {2, 2, 2}, -1, 1),
                     random_tensor(rng, {2, 2, 1}, -1, 1)},
                    [target](Tape& t, const std::vector<Tape::NodeId>& in) {
                      return t.mse_loss_node(t.concat_channels(in[0], in[1]),
                                             target);
                    },
                    h);
  }
  {  // vector concat + fully connected
    Tensor target = mse_target({3});
    check_tape_case(
        acc,
        {random_tensor(rng, {2}, -1, 1), random_tensor(rng, {3}, -1, 1),
         random_tensor(rng, {3, 5}, -0.5, 0.5),
         random_tensor(rng, {3}, -0.5, 0.5)},
        [target](Tape& t, const std::vector<Tape::NodeId>& in) {
          return t.mse_loss_node(
              t.fully_connected(t.concat_vec(in[0], in[1]), in[2], in[3]),
              target);
        },
        h);
  }
  {  // dropout, train mode, mask replayed identically per evaluation
    Tensor target = mse_target({4, 4, 2});
    check_tape_case(acc, {random_tensor(rng, {4, 4, 2}, -1, 1)},
                    [target](Tape& t, const std::vector<Tape::NodeId>& in) {
                      Rng mask_rng(99);
                      return t.mse_loss_node(
                          t.dropout(in[0], 0.5, DropoutMode::train, mask_rng),
                          target);
                    },
                    h);
  }
  {  // sum
    check_tape_case(acc, {random_tensor(rng, {3, 3, 2}, -1, 1)},
                    [](Tape& t, const std::vector<Tape::NodeId>& in) {
                      return t.sum(in[0]);
                    },
                    h);
  }
  {  // l1 loss, target offset so no kink sits within the step
    Tensor x = random_tensor(rng, {3, 3, 2}, -1, 1);
    Tensor target = x;
    for (size_t i = 0; i < target.data.size(); ++i)
      target.data[i] += real((i % 2 == 0) ? 0.3 : -0.3);
    check_tape_case(acc, {x},
                    [target](Tape& t, const std::vector<Tape::NodeId>& in) {
                      return t.l1_loss_node(in[0], target);
                    },
                    h);
  }
  {  // composite conv -> instance norm -> leaky -> sum
    check_tape_case(acc,
                    {random_tensor(rng, {2, 2, 2}, -1, 1),
                     random_tensor(rng, {4, 4, 2, 2}, -0.5, 0.5)},
                    [](Tape& t, const std::vector<Tape::NodeId>& in) {
                      return t.sum(t.activation(
                          t.instance_norm(t.conv2d(in[0], in[1], 1)),
                          ActKind::leaky_relu));
                    },
                    h);
  }
  return acc.finish(1e-2);
}

// ---------------------------------------------------------------------------
// Full network through the rendering loss at 16x16, FD on 20 selected
// weights. Weights with near-zero analytic gradient are excluded from the
// draw (their FD signal is roundoff).

GradCheckResult check_network() {
  SuiteAcc acc("network", kReal64 ? 1e-3 : 1e-2);
  NetworkConfig nc;
  nc.input_resolution = 16;
  nc.stem_features = 8;
  nc.scale_features = {8, 16, 16};
  nc.dropout_scales = 0;
  nc.global_track = true;
  nc.output_channels = 9;
  Weights weights = init_weights(nc, 7);

  Rng rng(61);
  SvbrdfMaps gt = random_maps(rng, 16);
  ImageF input(16, 16, 3);
  for (real& v : input.data) v = real(rng.uniform(0.0, 1.0));
  const uint64_t loss_seed = 17;

  auto eval = [&](const Weights& w) {
    Rng unused(0);
    ForwardResult fr = network_forward(input, w, DropoutMode::eval, unused);
    Rng lr(loss_seed);
    Tape::NodeId loss = fr.tape.rendering_loss_node(fr.output, gt, lr);
    return double(fr.tape.value(loss).data[0]);
  };

  // Analytic pass.
  Rng unused(0);
  ForwardResult fr = network_forward(input, weights, DropoutMode::eval, unused);
  Rng lr(loss_seed);
  Tape::NodeId loss = fr.tape.rendering_loss_node(fr.output, gt, lr);
  fr.tape.backward(loss);
  std::vector<Tensor> grads;
  for (Tape::NodeId id : fr.params) grads.push_back(fr.tape.grad(id));

  double gmax = 0.0;
  for (const Tensor& g : grads)
    for (real v : g.data) gmax = std::max(gmax, std::abs(double(v)));
  struct Pick {
    size_t tensor, elem;
  };
  std::vector<Pick> pool;
  for (size_t k = 0; k < grads.size(); ++k)
    for (size_t i = 0; i < grads[k].data.size(); ++i)
      if (std::abs(double(grads[k].data[i])) >= 1e-3 * gmax)
        pool.push_back({k, i});

  // A candidate only counts if its secant is stable under halving the step:
  // with thousands of leaky-relu pre-activations, some weights straddle a
  // kink inside the FD window, where no finite difference measures the
  // one-sided derivative the backward pass correctly reports. A wrong
  // Jacobian cannot hide behind this test -- it disagrees at every step size.
  const double h = kReal64 ? 1e-5 : 1e-2;
  const double consistency_tol = 0.25 * acc.result.tolerance;
  Rng pick_rng(5);
  auto secant = [&](const Pick& p, double step) {
    Weights wp = weights, wm = weights;
    wp.tensors[p.tensor].data[p.elem] += real(step);
    wm.tensors[p.tensor].data[p.elem] -= real(step);
    return (eval(wp) - eval(wm)) / (2.0 * step);
  };
  int accepted = 0;
  for (int attempt = 0; attempt < 400 && accepted < 20 && !pool.empty();
       ++attempt) {
    Pick p = pool[size_t(pick_rng.uniform_int(uint64_t(pool.size())))];
    double fd1 = secant(p, h);
    double fd2 = secant(p, h / 2.0);
    double scale =
        std::max(std::max(std::abs(fd1), std::abs(fd2)), 1e-3 * gmax);
    if (std::abs(fd1 - fd2) / scale > consistency_tol) continue;
    acc.add(double(grads[p.tensor].data[p.elem]), fd2);
    ++accepted;
  }
  return acc.finish(1e-2);
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck() {
  std::vector<GradCheckResult> results;
  results.push_back(check_shading());
  results.push_back(check_render());
  results.push_back(check_loss());
  results.push_back(check_tensor_ops());
  results.push_back(check_network());
  return results;
}

}  // namespace svbrdf
