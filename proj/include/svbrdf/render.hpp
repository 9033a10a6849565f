#pragma once

#include <string>

#include "svbrdf/core.hpp"
#include "svbrdf/rng.hpp"
#include "svbrdf/types.hpp"

namespace svbrdf {

// One light/view configuration for the texture-space pixel shader. The
// material plane spans [-1,1]^2 at z = 0; positions are in plane units.
struct RenderConfig {
  enum class Mode { directional, positional };
  Mode mode = Mode::directional;
  Vec3 light;  // unit direction (directional) or position (positional)
  Vec3 view;   // unit direction (directional) or position (positional)
  double light_intensity = kPi;
  bool include_falloff = false;
};

// The two sampling regimes of the rendering loss.
enum class ConfigRegime { diffuse_set, mirror_set };

// Flash-photo capture geometry: fronto-parallel camera over the plane
// center, point light near the camera. The 50 degree field of view frames
// the 2x2 plane exactly, fixing the distance at 1/tan(25 deg); the intensity
// makes a Lambertian albedo-1.0 plane read 0.8 at image center.
struct FlashScene {
  double fov_degrees = 50.0;
  double camera_distance = 2.144506920509559;  // 1/tan(25 deg)
  double light_offset_x = 0.0;
  double light_offset_y = 0.0;
  double light_intensity = 0.8 * kPi * 2.144506920509559 * 2.144506920509559;

  RenderConfig to_config() const {
    RenderConfig cfg;
    cfg.mode = RenderConfig::Mode::positional;
    cfg.light = Vec3(light_offset_x, light_offset_y, camera_distance);
    cfg.view = Vec3(0.0, 0.0, camera_distance);
    cfg.light_intensity = light_intensity;
    cfg.include_falloff = true;
    return cfg;
  }
};

// Gradient of a scalar objective with respect to every map channel. The
// normal is parameterized by its x,y components (z dependent), matching the
// network's 2-channel output.
struct MapsGradient {
  ImageF d_normal_xy;  // 2 channels
  ImageF d_diffuse;    // 3 channels
  ImageF d_specular;   // 3 channels
  ImageF d_roughness;  // 1 channel

  explicit MapsGradient(int res = 0)
      : d_normal_xy(res, res, 2),
        d_diffuse(res, res, 3),
        d_specular(res, res, 3),
        d_roughness(res, res, 1) {}
};

// Same gradient with the normal kept in unconstrained xyz, for callers that
// chain through their own normal parameterization (the network decode).
struct MapsGradientXyz {
  ImageF d_normal_xyz;  // 3 channels
  ImageF d_diffuse;     // 3 channels
  ImageF d_specular;    // 3 channels
  ImageF d_roughness;   // 1 channel

  explicit MapsGradientXyz(int res = 0)
      : d_normal_xyz(res, res, 3),
        d_diffuse(res, res, 3),
        d_specular(res, res, 3),
        d_roughness(res, res, 1) {}
};

// Texture-space shading: per pixel, radiance = brdf * max(0, n.l) *
// intensity * falloff, with directions taken per pixel from positions in
// positional mode and inverse-square falloff when include_falloff. No
// perspective projection. Output is HDR RGB at the map resolution.
ImageF render_svbrdf(const SvbrdfMaps& maps, const RenderConfig& cfg);

// Accumulates d(objective)/d(map channels) into `grad` given
// d(objective)/d(radiance) for every output pixel. Pointwise: each pixel's
// radiance depends only on that pixel's parameters.
void render_svbrdf_backward(const SvbrdfMaps& maps, const RenderConfig& cfg,
                            const ImageF& d_radiance, MapsGradient& grad);
void render_svbrdf_backward(const SvbrdfMaps& maps, const RenderConfig& cfg,
                            const ImageF& d_radiance, MapsGradientXyz& grad);

// Converts an xyz-normal gradient to the x,y parameterization with
// z = sqrt(1 - x^2 - y^2), using the per-pixel normals of `maps`.
void project_normal_gradient(const SvbrdfMaps& maps,
                             const MapsGradientXyz& src, MapsGradient& dst);

// Input compaction: clamp to [0,1] then
// (log(x + 0.01) - log 0.01) / (log 1.01 - log 0.01).
double tonemap_log(double x);
double tonemap_log_inverse(double y);
ImageF tonemap_log(const ImageF& img);

// Cosine-weighted hemisphere direction: z = sqrt(1 - u1), radius sqrt(u1),
// azimuth 2 pi u2.
Vec3 sample_cosine_direction(double u1, double u2);

// diffuse_set: directional, independent cosine-weighted light and view.
// mirror_set: positional; cosine-weighted direction and its mirror about
// (0,0,1), anchored at a uniform point on the plane with independent
// lognormal distances exp(N(0.5, 0.75)).
RenderConfig sample_render_config(Rng& rng, ConfigRegime regime);

// HDR float binary: u32 width, u32 height (little endian), then rgb f32
// samples. LDR previews are 8-bit PNG after gamma 1/2.2.
void save_hdr(const std::string& path, const ImageF& img);
ImageF load_hdr(const std::string& path);
void save_ldr_preview(const std::string& path, const ImageF& img);

}  // namespace svbrdf
