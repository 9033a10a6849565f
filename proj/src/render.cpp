#include "svbrdf/render.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "svbrdf/png_io.hpp"
#include "svbrdf/shading.hpp"

namespace svbrdf {
namespace {

// Plane position of a pixel center; the plane spans [-1,1]^2.
inline void pixel_plane_pos(int res, int x, int y, double& px, double& py) {
  px = -1.0 + 2.0 * (x + 0.5) / res;
  py = -1.0 + 2.0 * (y + 0.5) / res;
}

inline BrdfPoint point_at(const SvbrdfMaps& maps, int64_t i) {
  const real* n = maps.normal.data.data() + i * 3;
  const real* d = maps.diffuse_albedo.data.data() + i * 3;
  const real* s = maps.specular_albedo.data.data() + i * 3;
  return BrdfPoint(Vec3(n[0], n[1], n[2]), Vec3(d[0], d[1], d[2]),
                   Vec3(s[0], s[1], s[2]), maps.roughness.data[i]);
}

// Light/view unit vectors and the combined intensity*falloff factor for one
// pixel under a config.
inline void directions_at(const RenderConfig& cfg, double px, double py,
                          Vec3& l, Vec3& v, double& weight) {
  weight = cfg.light_intensity;
  if (cfg.mode == RenderConfig::Mode::directional) {
    l = cfg.light;
    v = cfg.view;
    return;
  }
  Vec3 p(px, py, 0.0);
  Vec3 to_light = cfg.light - p;
  double dist2 = dot(to_light, to_light);
  l = to_light / std::sqrt(dist2);
  v = normalize(cfg.view - p);
  if (cfg.include_falloff) weight /= std::max(dist2, 1e-12);
}

}  // namespace

ImageF render_svbrdf(const SvbrdfMaps& maps, const RenderConfig& cfg) {
  int res = maps.resolution;
  ImageF out(res, res, 3);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      int64_t i = int64_t(y) * res + x;
      double px, py;
      pixel_plane_pos(res, x, y, px, py);
      Vec3 l, v;
      double weight;
      directions_at(cfg, px, py, l, v, weight);
      BrdfPoint p = point_at(maps, i);
      double cosine = dot(p.normal, l);
      if (cosine <= 0.0) continue;  // stays black
      Vec3 radiance = eval_brdf(p, l, v) * (cosine * weight);
      real* o = out.data.data() + i * 3;
      o[0] = real(radiance.x);
      o[1] = real(radiance.y);
      o[2] = real(radiance.z);
    }
  }
  return out;
}

void render_svbrdf_backward(const SvbrdfMaps& maps, const RenderConfig& cfg,
                            const ImageF& d_radiance, MapsGradientXyz& grad) {
  int res = maps.resolution;
  if (d_radiance.width != res || d_radiance.height != res ||
      d_radiance.channels != 3)
    throw std::invalid_argument("render backward: d_radiance shape mismatch");
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      int64_t i = int64_t(y) * res + x;
      double px, py;
      pixel_plane_pos(res, x, y, px, py);
      Vec3 l, v;
      double weight;
      directions_at(cfg, px, py, l, v, weight);
      BrdfPoint p = point_at(maps, i);
      double cosine = dot(p.normal, l);
      if (cosine <= 0.0) continue;  // black pixel: zero gradient

      BrdfGradient g = eval_brdf_gradient(p, l, v);
      const real* dr = d_radiance.data.data() + i * 3;
      Vec3 up(double(dr[0]) * weight, double(dr[1]) * weight,
              double(dr[2]) * weight);

      // radiance_c = f_c * cosine * weight, f_c = diffuse_c/pi + F_c * S.
      // Only F_c*S and the cosine depend on the normal:
      // d radiance_c / dn = (F_c * dS/dn) * cosine + f_c * l.
      double fres_up = dot(g.fresnel, up);
      double sum_f_up = dot(g.value, up);
      grad.d_normal_xyz.at(y, x, 0) +=
          real(fres_up * g.d_n_spec.x * cosine + sum_f_up * l.x);
      grad.d_normal_xyz.at(y, x, 1) +=
          real(fres_up * g.d_n_spec.y * cosine + sum_f_up * l.y);
      grad.d_normal_xyz.at(y, x, 2) +=
          real(fres_up * g.d_n_spec.z * cosine + sum_f_up * l.z);
      grad.d_diffuse.at(y, x, 0) += real(g.d_diffuse.x * up.x * cosine);
      grad.d_diffuse.at(y, x, 1) += real(g.d_diffuse.y * up.y * cosine);
      grad.d_diffuse.at(y, x, 2) += real(g.d_diffuse.z * up.z * cosine);
      grad.d_specular.at(y, x, 0) += real(g.d_specular.x * up.x * cosine);
      grad.d_specular.at(y, x, 1) += real(g.d_specular.y * up.y * cosine);
      grad.d_specular.at(y, x, 2) += real(g.d_specular.z * up.z * cosine);
      grad.d_roughness.at(y, x, 0) += real(dot(g.d_roughness, up) * cosine);
    }
  }
}

void project_normal_gradient(const SvbrdfMaps& maps,
                             const MapsGradientXyz& src, MapsGradient& dst) {
  int res = maps.resolution;
  for (int64_t i = 0; i < int64_t(res) * res; ++i) {
    double nx = maps.normal.data[i * 3 + 0];
    double ny = maps.normal.data[i * 3 + 1];
    double nz = std::max(double(maps.normal.data[i * 3 + 2]), 1e-6);
    double gx = src.d_normal_xyz.data[i * 3 + 0];
    double gy = src.d_normal_xyz.data[i * 3 + 1];
    double gz = src.d_normal_xyz.data[i * 3 + 2];
    dst.d_normal_xy.data[i * 2 + 0] += real(gx - (nx / nz) * gz);
    dst.d_normal_xy.data[i * 2 + 1] += real(gy - (ny / nz) * gz);
  }
  for (size_t i = 0; i < src.d_diffuse.data.size(); ++i)
    dst.d_diffuse.data[i] += src.d_diffuse.data[i];
  for (size_t i = 0; i < src.d_specular.data.size(); ++i)
    dst.d_specular.data[i] += src.d_specular.data[i];
  for (size_t i = 0; i < src.d_roughness.data.size(); ++i)
    dst.d_roughness.data[i] += src.d_roughness.data[i];
}

void render_svbrdf_backward(const SvbrdfMaps& maps, const RenderConfig& cfg,
                            const ImageF& d_radiance, MapsGradient& grad) {
  MapsGradientXyz tmp(maps.resolution);
  render_svbrdf_backward(maps, cfg, d_radiance, tmp);
  project_normal_gradient(maps, tmp, grad);
}

namespace {
const double kLogLo = std::log(0.01);
const double kLogRange = std::log(1.01) - std::log(0.01);
}  // namespace

double tonemap_log(double x) {
  double c = clamp01(x);
  return (std::log(c + 0.01) - kLogLo) / kLogRange;
}

double tonemap_log_inverse(double y) {
  double x = std::exp(y * kLogRange + kLogLo) - 0.01;
  return clamp01(x);
}

ImageF tonemap_log(const ImageF& img) {
  ImageF out(img.width, img.height, img.channels);
  for (size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = real(tonemap_log(double(img.data[i])));
  return out;
}

Vec3 sample_cosine_direction(double u1, double u2) {
  double r = std::sqrt(u1);
  double z = std::sqrt(std::max(0.0, 1.0 - u1));
  double phi = 2.0 * kPi * u2;
  return {r * std::cos(phi), r * std::sin(phi), z};
}

RenderConfig sample_render_config(Rng& rng, ConfigRegime regime) {
  RenderConfig cfg;
  if (regime == ConfigRegime::diffuse_set) {
    cfg.mode = RenderConfig::Mode::directional;
    double u1 = rng.uniform(), u2 = rng.uniform();
    cfg.light = sample_cosine_direction(u1, u2);
    u1 = rng.uniform(), u2 = rng.uniform();
    cfg.view = sample_cosine_direction(u1, u2);
    cfg.light_intensity = kPi;
    cfg.include_falloff = false;
    return cfg;
  }
  cfg.mode = RenderConfig::Mode::positional;
  double u1 = rng.uniform(), u2 = rng.uniform();
  Vec3 dir = sample_cosine_direction(u1, u2);
  Vec3 mirrored(-dir.x, -dir.y, dir.z);  // reflection about (0,0,1)
  Vec3 origin(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0);
  double dist_light = std::exp(0.5 + 0.75 * rng.normal());
  double dist_view = std::exp(0.5 + 0.75 * rng.normal());
  cfg.light = origin + dir * dist_light;
  cfg.view = origin + mirrored * dist_view;
  cfg.light_intensity = kPi;
  cfg.include_falloff = true;
  return cfg;
}

void save_hdr(const std::string& path, const ImageF& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  uint32_t w = uint32_t(img.width), h = uint32_t(img.height);
  f.write(reinterpret_cast<const char*>(&w), 4);
  f.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> buf(img.data.size());
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = float(img.data[i]);
  f.write(reinterpret_cast<const char*>(buf.data()),
          std::streamsize(buf.size() * sizeof(float)));
  if (!f) throw std::runtime_error("short write: " + path);
}

ImageF load_hdr(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  uint32_t w = 0, h = 0;
  f.read(reinterpret_cast<char*>(&w), 4);
  f.read(reinterpret_cast<char*>(&h), 4);
  ImageF img(int(w), int(h), 3);
  std::vector<float> buf(img.data.size());
  f.read(reinterpret_cast<char*>(buf.data()),
         std::streamsize(buf.size() * sizeof(float)));
  if (!f) throw std::runtime_error("short read: " + path);
  for (size_t i = 0; i < buf.size(); ++i) img.data[i] = real(buf[i]);
  return img;
}

void save_ldr_preview(const std::string& path, const ImageF& img) {
  std::vector<uint8_t> bytes(img.data.size());
  for (size_t i = 0; i < bytes.size(); ++i) {
    double v = std::pow(clamp01(double(img.data[i])), 1.0 / 2.2);
    bytes[i] = uint8_t(std::lround(v * 255.0));
  }
  write_png8(path, img.width, img.height, img.channels, bytes);
}

}  // namespace svbrdf
