#include "svbrdf/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace svbrdf {
namespace {

inline double sign_or_zero(double v) {
  return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
}

}  // namespace

double rendering_loss_with_grad(const SvbrdfMaps& pred, const SvbrdfMaps& gt,
                                Rng& rng, MapsGradientXyz* grad) {
  if (pred.resolution != gt.resolution)
    throw std::invalid_argument("rendering_loss: resolution mismatch");
  int res = pred.resolution;

  // Fixed draw order: 3 diffuse_set configs, then 6 mirror_set configs.
  RenderConfig configs[9];
  for (int i = 0; i < 3; ++i)
    configs[i] = sample_render_config(rng, ConfigRegime::diffuse_set);
  for (int i = 3; i < 9; ++i)
    configs[i] = sample_render_config(rng, ConfigRegime::mirror_set);

  const double count = 9.0 * double(res) * double(res) * 3.0;
  double total = 0.0;
  ImageF d_radiance;
  for (const RenderConfig& cfg : configs) {
    ImageF rp = render_svbrdf(pred, cfg);
    ImageF rg = render_svbrdf(gt, cfg);
    if (grad) d_radiance = ImageF(res, res, 3);
    for (size_t i = 0; i < rp.data.size(); ++i) {
      double lp = std::log(double(rp.data[i]) + 0.01);
      double lg = std::log(double(rg.data[i]) + 0.01);
      total += std::abs(lp - lg);
      if (grad)
        d_radiance.data[i] = real(sign_or_zero(lp - lg) /
                                  ((double(rp.data[i]) + 0.01) * count));
    }
    if (grad) render_svbrdf_backward(pred, cfg, d_radiance, *grad);
  }
  return total / count;
}

double rendering_loss_with_grad(const SvbrdfMaps& pred, const SvbrdfMaps& gt,
                                Rng& rng, MapsGradient* grad) {
  if (!grad) return rendering_loss_with_grad(pred, gt, rng, (MapsGradientXyz*)nullptr);
  MapsGradientXyz xyz(pred.resolution);
  double loss = rendering_loss_with_grad(pred, gt, rng, &xyz);
  project_normal_gradient(pred, xyz, *grad);
  return loss;
}

double rendering_loss(const SvbrdfMaps& pred, const SvbrdfMaps& gt, Rng& rng) {
  return rendering_loss_with_grad(pred, gt, rng, (MapsGradientXyz*)nullptr);
}

double l1_channels_loss(const ImageF& a, const ImageF& b, ImageF* grad) {
  if (!a.same_shape(b))
    throw std::invalid_argument("l1_channels_loss: shape mismatch");
  if (grad) *grad = ImageF(a.width, a.height, a.channels);
  const double count = double(a.data.size());
  double total = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double diff = double(a.data[i]) - double(b.data[i]);
    total += std::abs(diff);
    if (grad) grad->data[i] = real(sign_or_zero(diff) / count);
  }
  return total / count;
}

double l1_map_loss(const SvbrdfMaps& pred, const SvbrdfMaps& gt) {
  if (pred.resolution != gt.resolution)
    throw std::invalid_argument("l1_map_loss: resolution mismatch");
  ImageF a = maps_to_channels(pred);
  ImageF b = maps_to_channels(gt);
  return l1_channels_loss(a, b, nullptr);
}

}  // namespace svbrdf
