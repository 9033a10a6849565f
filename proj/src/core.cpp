#include "svbrdf/core.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "svbrdf/png_io.hpp"

namespace svbrdf {
namespace {

constexpr std::array<const char*, kMaterialClassCount> kClassNames = {
    "paint", "plastic", "leather", "metal", "wood",
    "fabric", "stone",  "tiles",   "ground"};

uint16_t quantize16(double v01) {
  double v = clamp01(v01) * 65535.0;
  return static_cast<uint16_t>(std::lround(v));
}

double dequantize16(uint16_t q) { return double(q) / 65535.0; }

// Bilinear sample with edge-clamp addressing; `pos` is in pixel units with
// pixel centers at integer + 0.5.
void sample_bilinear(const ImageF& img, double px, double py, double* out) {
  double fx = px - 0.5;
  double fy = py - 0.5;
  int x0 = static_cast<int>(std::floor(fx));
  int y0 = static_cast<int>(std::floor(fy));
  double tx = fx - x0;
  double ty = fy - y0;
  auto cx = [&](int x) { return x < 0 ? 0 : (x >= img.width ? img.width - 1 : x); };
  auto cy = [&](int y) { return y < 0 ? 0 : (y >= img.height ? img.height - 1 : y); };
  int x1 = cx(x0 + 1), y1 = cy(y0 + 1);
  x0 = cx(x0);
  y0 = cy(y0);
  const real* p00 = img.pixel(y0, x0);
  const real* p01 = img.pixel(y0, x1);
  const real* p10 = img.pixel(y1, x0);
  const real* p11 = img.pixel(y1, x1);
  for (int c = 0; c < img.channels; ++c) {
    double top = double(p00[c]) * (1.0 - tx) + double(p01[c]) * tx;
    double bot = double(p10[c]) * (1.0 - tx) + double(p11[c]) * tx;
    out[c] = top * (1.0 - ty) + bot * ty;
  }
}

void check_range01(const ImageF& img, const char* name) {
  for (real v : img.data)
    if (!(v >= real(0) && v <= real(1)))
      throw std::invalid_argument(std::string(name) + " outside [0,1]");
}

}  // namespace

const char* material_class_name(MaterialClass c) {
  int i = static_cast<int>(c);
  if (i < 0 || i >= kMaterialClassCount)
    throw std::invalid_argument("bad material class");
  return kClassNames[static_cast<size_t>(i)];
}

MaterialClass material_class_from_name(const std::string& name) {
  for (int i = 0; i < kMaterialClassCount; ++i)
    if (name == kClassNames[static_cast<size_t>(i)])
      return static_cast<MaterialClass>(i);
  throw std::invalid_argument("unknown material class: " + name);
}

void validate_maps(const SvbrdfMaps& maps) {
  int res = maps.resolution;
  if (res <= 0) throw std::invalid_argument("non-positive resolution");
  auto check_shape = [&](const ImageF& img, int ch, const char* name) {
    if (img.width != res || img.height != res || img.channels != ch)
      throw std::invalid_argument(std::string(name) + " shape mismatch");
  };
  check_shape(maps.normal, 3, "normal");
  check_shape(maps.diffuse_albedo, 3, "diffuse_albedo");
  check_shape(maps.specular_albedo, 3, "specular_albedo");
  check_shape(maps.roughness, 1, "roughness");
  for (int64_t i = 0; i < int64_t(res) * res; ++i) {
    double x = maps.normal.data[i * 3 + 0];
    double y = maps.normal.data[i * 3 + 1];
    double z = maps.normal.data[i * 3 + 2];
    double len = std::sqrt(x * x + y * y + z * z);
    if (std::abs(len - 1.0) > 1e-5)
      throw std::invalid_argument("normal not unit length");
    if (z < 0.0) throw std::invalid_argument("normal z negative");
  }
  check_range01(maps.diffuse_albedo, "diffuse_albedo");
  check_range01(maps.specular_albedo, "specular_albedo");
  check_range01(maps.roughness, "roughness");
}

Vec3 decode_normal(double x01, double y01) {
  double x = x01 * 2.0 - 1.0;
  double y = y01 * 2.0 - 1.0;
  double z = std::sqrt(std::max(0.0, 1.0 - x * x - y * y));
  return normalize(Vec3(x, y, z));
}

SvbrdfMaps blend_svbrdfs(const SvbrdfMaps& a, const SvbrdfMaps& b,
                         double alpha) {
  if (a.resolution != b.resolution)
    throw std::invalid_argument("blend_svbrdfs: resolution mismatch");
  // Exact endpoints: renormalizing an already-unit normal must not perturb
  // the copy by a rounding step.
  if (alpha == 0.0) return a;
  if (alpha == 1.0) return b;
  SvbrdfMaps out(a.resolution);
  auto lerp_map = [&](const ImageF& ma, const ImageF& mb, ImageF& mo) {
    for (size_t i = 0; i < mo.data.size(); ++i)
      mo.data[i] = real((1.0 - alpha) * double(ma.data[i]) +
                        alpha * double(mb.data[i]));
  };
  lerp_map(a.diffuse_albedo, b.diffuse_albedo, out.diffuse_albedo);
  lerp_map(a.specular_albedo, b.specular_albedo, out.specular_albedo);
  lerp_map(a.roughness, b.roughness, out.roughness);
  for (int64_t i = 0; i < int64_t(a.resolution) * a.resolution; ++i) {
    Vec3 na(a.normal.data[i * 3], a.normal.data[i * 3 + 1],
            a.normal.data[i * 3 + 2]);
    Vec3 nb(b.normal.data[i * 3], b.normal.data[i * 3 + 1],
            b.normal.data[i * 3 + 2]);
    Vec3 n = normalize(na * (1.0 - alpha) + nb * alpha);
    out.normal.data[i * 3 + 0] = real(n.x);
    out.normal.data[i * 3 + 1] = real(n.y);
    out.normal.data[i * 3 + 2] = real(n.z);
  }
  return out;
}

SvbrdfMaps transform_svbrdf(const SvbrdfMaps& maps, double rotation,
                            double scale, double crop_x, double crop_y,
                            int crop_size) {
  if (!(scale > 0.0)) throw std::invalid_argument("transform: scale <= 0");
  if (crop_size <= 0) throw std::invalid_argument("transform: bad crop size");
  double res = maps.resolution;
  double c = res * 0.5;
  double cosr = std::cos(rotation);
  double sinr = std::sin(rotation);
  // Forward map T(p) = R(rotation) * (p - c) * scale + c. Output pixel
  // centers q live in transformed coordinates; we sample the source at
  // p = T^-1(q) = R(-rotation) * (q - c) / scale + c.
  auto inv = [&](double qx, double qy, double& px, double& py) {
    double dx = (qx - c) / scale;
    double dy = (qy - c) / scale;
    px = cosr * dx + sinr * dy + c;
    py = -sinr * dx + cosr * dy + c;
  };
  // The crop window must map back inside the source square; checking its
  // corners suffices because both regions are convex.
  const double eps = 1e-6;
  for (int corner = 0; corner < 4; ++corner) {
    double qx = crop_x + (corner & 1 ? crop_size : 0);
    double qy = crop_y + (corner & 2 ? crop_size : 0);
    double px, py;
    inv(qx, qy, px, py);
    if (px < -eps || py < -eps || px > res + eps || py > res + eps)
      throw std::invalid_argument("transform: crop outside domain");
  }

  SvbrdfMaps out(crop_size);
  double tmp[3];
  for (int oy = 0; oy < crop_size; ++oy) {
    for (int ox = 0; ox < crop_size; ++ox) {
      double px, py;
      inv(crop_x + ox + 0.5, crop_y + oy + 0.5, px, py);
      sample_bilinear(maps.diffuse_albedo, px, py, tmp);
      for (int ch = 0; ch < 3; ++ch)
        out.diffuse_albedo.at(oy, ox, ch) = real(tmp[ch]);
      sample_bilinear(maps.specular_albedo, px, py, tmp);
      for (int ch = 0; ch < 3; ++ch)
        out.specular_albedo.at(oy, ox, ch) = real(tmp[ch]);
      sample_bilinear(maps.roughness, px, py, tmp);
      out.roughness.at(oy, ox, 0) = real(tmp[0]);
      sample_bilinear(maps.normal, px, py, tmp);
      // Content rotated by R(rotation) carries its screen-space normals
      // along: rotate the sampled x,y by the same angle.
      double nx = cosr * tmp[0] - sinr * tmp[1];
      double ny = sinr * tmp[0] + cosr * tmp[1];
      Vec3 n = normalize(Vec3(nx, ny, tmp[2]));
      out.normal.at(oy, ox, 0) = real(n.x);
      out.normal.at(oy, ox, 1) = real(n.y);
      out.normal.at(oy, ox, 2) = real(n.z);
    }
  }
  return out;
}

ImageF maps_to_channels(const SvbrdfMaps& maps) {
  int res = maps.resolution;
  ImageF out(res, res, 9);
  for (int64_t i = 0; i < int64_t(res) * res; ++i) {
    real* px = out.data.data() + i * 9;
    px[0] = real(double(maps.normal.data[i * 3 + 0]) * 0.5 + 0.5);
    px[1] = real(double(maps.normal.data[i * 3 + 1]) * 0.5 + 0.5);
    px[2] = maps.diffuse_albedo.data[i * 3 + 0];
    px[3] = maps.diffuse_albedo.data[i * 3 + 1];
    px[4] = maps.diffuse_albedo.data[i * 3 + 2];
    px[5] = maps.roughness.data[i];
    px[6] = maps.specular_albedo.data[i * 3 + 0];
    px[7] = maps.specular_albedo.data[i * 3 + 1];
    px[8] = maps.specular_albedo.data[i * 3 + 2];
  }
  return out;
}

SvbrdfMaps channels_to_maps(const ImageF& img) {
  if (img.channels != 9 || img.width != img.height)
    throw std::invalid_argument("channels_to_maps: expected square 9-channel");
  SvbrdfMaps out(img.width);
  for (int64_t i = 0; i < int64_t(img.width) * img.height; ++i) {
    const real* px = img.data.data() + i * 9;
    Vec3 n = decode_normal(clamp01(px[0]), clamp01(px[1]));
    out.normal.data[i * 3 + 0] = real(n.x);
    out.normal.data[i * 3 + 1] = real(n.y);
    out.normal.data[i * 3 + 2] = real(n.z);
    out.diffuse_albedo.data[i * 3 + 0] = real(clamp01(px[2]));
    out.diffuse_albedo.data[i * 3 + 1] = real(clamp01(px[3]));
    out.diffuse_albedo.data[i * 3 + 2] = real(clamp01(px[4]));
    out.roughness.data[i] = real(clamp01(px[5]));
    out.specular_albedo.data[i * 3 + 0] = real(clamp01(px[6]));
    out.specular_albedo.data[i * 3 + 1] = real(clamp01(px[7]));
    out.specular_albedo.data[i * 3 + 2] = real(clamp01(px[8]));
  }
  return out;
}

void save_bundle(const std::string& dir, const SvbrdfMaps& maps,
                 MaterialClass cls, uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  int res = maps.resolution;
  int64_t n = int64_t(res) * res;

  // Normals: quantize x,y first, pull them back inside the unit disc if
  // rounding pushed them out, then derive z from the quantized x,y. Loading
  // reconstructs the identical vector, so a second save is byte-exact.
  std::vector<uint16_t> nq(size_t(n) * 3);
  for (int64_t i = 0; i < n; ++i) {
    double x = maps.normal.data[i * 3 + 0];
    double y = maps.normal.data[i * 3 + 1];
    uint16_t qx = quantize16(x * 0.5 + 0.5);
    uint16_t qy = quantize16(y * 0.5 + 0.5);
    for (int guard = 0; guard < 4; ++guard) {
      double dx = dequantize16(qx) * 2.0 - 1.0;
      double dy = dequantize16(qy) * 2.0 - 1.0;
      double r2 = dx * dx + dy * dy;
      if (r2 <= 1.0) break;
      double r = std::sqrt(r2);
      qx = quantize16((dx / r) * 0.5 + 0.5);
      qy = quantize16((dy / r) * 0.5 + 0.5);
    }
    double dx = dequantize16(qx) * 2.0 - 1.0;
    double dy = dequantize16(qy) * 2.0 - 1.0;
    double z = std::sqrt(std::max(0.0, 1.0 - dx * dx - dy * dy));
    nq[size_t(i) * 3 + 0] = qx;
    nq[size_t(i) * 3 + 1] = qy;
    nq[size_t(i) * 3 + 2] = quantize16(z * 0.5 + 0.5);
  }
  write_png16(dir + "/normal.png", res, res, 3, nq);

  auto write_rgb = [&](const std::string& path, const ImageF& img) {
    std::vector<uint16_t> q(size_t(n) * 3);
    for (size_t i = 0; i < q.size(); ++i) q[i] = quantize16(img.data[i]);
    write_png16(path, res, res, 3, q);
  };
  write_rgb(dir + "/diffuse.png", maps.diffuse_albedo);
  write_rgb(dir + "/specular.png", maps.specular_albedo);
  std::vector<uint16_t> rq(size_t(n), 0);
  for (int64_t i = 0; i < n; ++i) rq[size_t(i)] = quantize16(maps.roughness.data[i]);
  write_png16(dir + "/roughness.png", res, res, 1, rq);

  nlohmann::json meta;
  meta["resolution"] = res;
  meta["class"] = material_class_name(cls);
  meta["seed"] = seed;
  std::ofstream mf(dir + "/meta.json", std::ios::binary);
  if (!mf) throw std::runtime_error("cannot write " + dir + "/meta.json");
  mf << meta.dump(2) << "\n";
}

Bundle load_bundle(const std::string& dir) {
  std::ifstream mf(dir + "/meta.json", std::ios::binary);
  if (!mf) throw std::runtime_error("cannot read " + dir + "/meta.json");
  nlohmann::json meta = nlohmann::json::parse(mf);
  int res = meta.at("resolution").get<int>();

  Bundle out;
  out.cls = material_class_from_name(meta.at("class").get<std::string>());
  out.seed = meta.at("seed").get<uint64_t>();
  out.maps = SvbrdfMaps(res);
  int64_t n = int64_t(res) * res;

  auto expect = [&](const PngImage& img, int ch, const char* name) {
    if (img.width != res || img.height != res || img.channels != ch ||
        img.bit_depth != 16)
      throw std::runtime_error(std::string("bundle: bad ") + name);
  };

  PngImage nrm = read_png(dir + "/normal.png");
  expect(nrm, 3, "normal.png");
  for (int64_t i = 0; i < n; ++i) {
    double x = dequantize16(nrm.samples[size_t(i) * 3 + 0]) * 2.0 - 1.0;
    double y = dequantize16(nrm.samples[size_t(i) * 3 + 1]) * 2.0 - 1.0;
    double r2 = x * x + y * y;
    Vec3 v;
    if (r2 <= 1.0) {
      // Our own bundles land here: z recomputed from x,y is already unit.
      v = Vec3(x, y, std::sqrt(1.0 - r2));
    } else {
      v = decode_normal(x * 0.5 + 0.5, y * 0.5 + 0.5);
    }
    out.maps.normal.data[i * 3 + 0] = real(v.x);
    out.maps.normal.data[i * 3 + 1] = real(v.y);
    out.maps.normal.data[i * 3 + 2] = real(v.z);
  }

  auto read_rgb = [&](const std::string& path, ImageF& img, const char* name) {
    PngImage p = read_png(path);
    expect(p, 3, name);
    for (size_t i = 0; i < img.data.size(); ++i)
      img.data[i] = real(dequantize16(p.samples[i]));
  };
  read_rgb(dir + "/diffuse.png", out.maps.diffuse_albedo, "diffuse.png");
  read_rgb(dir + "/specular.png", out.maps.specular_albedo, "specular.png");
  PngImage rough = read_png(dir + "/roughness.png");
  expect(rough, 1, "roughness.png");
  for (int64_t i = 0; i < n; ++i)
    out.maps.roughness.data[i] = real(dequantize16(rough.samples[size_t(i)]));
  return out;
}

}  // namespace svbrdf
