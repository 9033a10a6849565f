#pragma once

#include "svbrdf/core.hpp"
#include "svbrdf/render.hpp"
#include "svbrdf/rng.hpp"

namespace svbrdf {

// Stochastic rendering loss: draws 3 diffuse_set + 6 mirror_set configs from
// `rng`, renders both materials under each identical config, and returns the
// mean over configs, pixels and channels of
// |log(r_pred + 0.01) - log(r_gt + 0.01)|.
double rendering_loss(const SvbrdfMaps& pred, const SvbrdfMaps& gt, Rng& rng);

// Same draw sequence as rendering_loss; when `grad` is non-null also
// accumulates the exact gradient of the sampled estimate with respect to
// every pred map channel (l1 subgradient at zero is zero).
double rendering_loss_with_grad(const SvbrdfMaps& pred, const SvbrdfMaps& gt,
                                Rng& rng, MapsGradient* grad);

// Variant keeping the normal gradient in unconstrained xyz for callers that
// chain through their own normal decode.
double rendering_loss_with_grad(const SvbrdfMaps& pred, const SvbrdfMaps& gt,
                                Rng& rng, MapsGradientXyz* grad);

// Mean absolute difference over the 9 encoded channels (normals in their
// 2-channel [0,1] form).
double l1_map_loss(const SvbrdfMaps& pred, const SvbrdfMaps& gt);

// l1 on already-encoded channel images; when `grad` is non-null it receives
// d(loss)/d(a), same shape as the inputs.
double l1_channels_loss(const ImageF& a, const ImageF& b, ImageF* grad);

}  // namespace svbrdf
