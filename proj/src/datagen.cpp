#include "svbrdf/datagen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "svbrdf/png_io.hpp"
#include "svbrdf/render.hpp"
#include "svbrdf/rng.hpp"

namespace svbrdf {
namespace {

// ---------------------------------------------------------------------------
// Noise toolkit. Everything is a pure function of (seed, coordinates) so
// samples regenerate bit-exactly from their manifest records.

double hash01(uint64_t seed, int64_t ix, int64_t iy) {
  uint64_t h = splitmix64(seed ^ (uint64_t(ix) * 0x9e3779b97f4a7c15ULL) ^
                          (uint64_t(iy) * 0xc2b2ae3d27d4eb4fULL));
  return double(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

// Lattice value noise in [0,1].
double value_noise(uint64_t seed, double x, double y) {
  double fx = std::floor(x), fy = std::floor(y);
  int64_t ix = int64_t(fx), iy = int64_t(fy);
  double tx = fade(x - fx), ty = fade(y - fy);
  double v00 = hash01(seed, ix, iy);
  double v01 = hash01(seed, ix + 1, iy);
  double v10 = hash01(seed, ix, iy + 1);
  double v11 = hash01(seed, ix + 1, iy + 1);
  double top = v00 * (1 - tx) + v01 * tx;
  double bot = v10 * (1 - tx) + v11 * tx;
  return top * (1 - ty) + bot * ty;
}

// Fractal sum of value noise, normalized to [0,1].
double fbm(uint64_t seed, double x, double y, int octaves) {
  double sum = 0.0, amp = 1.0, norm = 0.0, freq = 1.0;
  for (int o = 0; o < octaves; ++o) {
    sum += amp * value_noise(seed + uint64_t(o) * 1013ULL, x * freq, y * freq);
    norm += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  return sum / norm;
}

struct WorleyResult {
  double f1 = 1e9;         // distance to nearest feature point
  double f2 = 1e9;         // second nearest
  uint64_t cell_hash = 0;  // id of the nearest cell
};

WorleyResult worley(uint64_t seed, double x, double y) {
  WorleyResult r;
  int64_t cx = int64_t(std::floor(x)), cy = int64_t(std::floor(y));
  for (int64_t dy = -1; dy <= 1; ++dy) {
    for (int64_t dx = -1; dx <= 1; ++dx) {
      int64_t ix = cx + dx, iy = cy + dy;
      double px = double(ix) + hash01(seed, ix, iy);
      double py = double(iy) + hash01(seed ^ 0x5851f42d4c957f2dULL, ix, iy);
      double d = std::hypot(px - x, py - y);
      if (d < r.f1) {
        r.f2 = r.f1;
        r.f1 = d;
        r.cell_hash = splitmix64(seed ^ (uint64_t(ix) * 0x100000001b3ULL) ^
                                 uint64_t(iy));
      } else if (d < r.f2) {
        r.f2 = d;
      }
    }
  }
  return r;
}

Vec3 hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  double c = v * s;
  double hp = h * 6.0;
  double xx = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = xx; }
  else if (hp < 2) { r = xx; g = c; }
  else if (hp < 3) { g = c; b = xx; }
  else if (hp < 4) { g = xx; b = c; }
  else if (hp < 5) { r = xx; b = c; }
  else { r = c; b = xx; }
  double m = v - c;
  return {r + m, g + m, b + m};
}

// Central-difference normals from a [0,1] height field, edge-clamped. The
// slope gain scales with resolution so the look is size-independent.
void height_to_normals(const std::vector<double>& height, double strength,
                       SvbrdfMaps& maps) {
  int res = maps.resolution;
  double k = 0.05 * res * strength;
  auto at = [&](int y, int x) {
    x = x < 0 ? 0 : (x >= res ? res - 1 : x);
    y = y < 0 ? 0 : (y >= res ? res - 1 : y);
    return height[size_t(y) * res + x];
  };
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      double sx = (at(y, x + 1) - at(y, x - 1)) * 0.5 * k;
      double sy = (at(y + 1, x) - at(y - 1, x)) * 0.5 * k;
      Vec3 n = normalize(Vec3(-sx, -sy, 1.0));
      int64_t i = int64_t(y) * res + x;
      maps.normal.data[i * 3 + 0] = real(n.x);
      maps.normal.data[i * 3 + 1] = real(n.y);
      maps.normal.data[i * 3 + 2] = real(n.z);
    }
  }
}

void set_px(ImageF& img, int64_t i, const Vec3& v) {
  img.data[i * 3 + 0] = real(clamp01(v.x));
  img.data[i * 3 + 1] = real(clamp01(v.y));
  img.data[i * 3 + 2] = real(clamp01(v.z));
}

// Iterates pixels handing out normalized coordinates u,v in [0,1).
template <typename Fn>
void for_uv(int res, Fn&& fn) {
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x)
      fn(int64_t(y) * res + x, double(x) / res, double(y) / res);
}

// ---------------------------------------------------------------------------
// Per-class generators. Each fills diffuse/specular/roughness and a height
// field turned into normals. `v` holds the schema parameters in order.

void gen_paint(const std::vector<double>& v, uint64_t seed, SvbrdfMaps& m) {
  int res = m.resolution;
  Vec3 base = hsv_to_rgb(v[0], v[1], v[2]);
  std::vector<double> height(size_t(res) * res);
  for_uv(res, [&](int64_t i, double u, double w) {
    double peel = fbm(seed, u * v[5], w * v[5], 3);
    height[size_t(i)] = peel;
    double mottle = (value_noise(seed + 7, u * 6, w * 6) - 0.5) * 0.04;
    set_px(m.diffuse_albedo, i, base + Vec3(mottle, mottle, mottle));
    set_px(m.specular_albedo, i, {0.04, 0.04, 0.04});
    m.roughness.data[i] =
        real(clamp01(v[3] + (peel - 0.5) * 0.1));
  });
  height_to_normals(height, v[4] * 0.15, m);
}

void gen_plastic(const std::vector<double>& v, uint64_t seed, SvbrdfMaps& m) {
  int res = m.resolution;
  Vec3 base = hsv_to_rgb(v[0], v[1], v[2]);
  std::vector<double> height(size_t(res) * res);
  for_uv(res, [&](int64_t i, double u, double w) {
    double emboss = fbm(seed, u * v[4], w * v[4], 2);
    height[size_t(i)] = emboss;
    set_px(m.diffuse_albedo, i, base);
    set_px(m.specular_albedo, i, {0.05, 0.05, 0.05});
    double rough = (1.0 - v[3]) + (value_noise(seed + 3, u * 9, w * 9) - 0.5) * 0.06;
    m.roughness.data[i] = real(clamp01(rough));
  });
  height_to_normals(height, v[5] * 0.2, m);
}

void gen_leather(const std::vector<double>& v, uint64_t seed, SvbrdfMaps& m) {
  int res = m.resolution;
  Vec3 base = hsv_to_rgb(v[2], 0.55, v[3]);
  std::vector<double> height(size_t(res) * res);
  for_uv(res, [&](int64_t i, double u, double w) {
    WorleyResult c = worley(seed, u * v[0], w * v[0]);
    double groove = 1.0 - clamp01((c.f2 - c.f1) * 4.0);  // 1 at cell borders
    double pores = value_noise(seed + 11, u * 60, w * 60) * 0.08;
    height[size_t(i)] = 1.0 - groove * v[1] - pores;
    Vec3 col = base * (1.0 - 0.35 * groove);
    set_px(m.diffuse_albedo, i, col);
    set_px(m.specular_albedo, i, {0.04, 0.04, 0.04});
    m.roughness.data[i] = real(clamp01(v[4] + v[5] * groove));
  });
  height_to_normals(height, 0.3, m);
}

void gen_metal(const std::vector<double>& v, uint64_t seed, SvbrdfMaps& m) {
  int res = m.resolution;
  std::vector<double> height(size_t(res) * res);
  for_uv(res, [&](int64_t i, double u, double w) {
    // Brushed streaks: noise stretched strongly along x.
    double streak = value_noise(seed, u * 3.0, w * v[2]);
    double scratch =
        value_noise(seed + 5, u * 2.0, w * v[2] * 3.0) > (1.0 - 0.1 * v[5])
            ? 1.0
            : 0.0;
    height[size_t(i)] = streak * 0.8 + scratch * 0.2;
    double dark = 0.02 + 0.05 * value_noise(seed + 9, u * 4, w * 4);
    set_px(m.diffuse_albedo, i, {dark, dark, dark});
    Vec3 spec = Vec3(v[0], v[0] * (1.0 - 0.25 * v[1]), v[0] * (1.0 - 0.5 * v[1]));
    set_px(m.specular_albedo, i, spec);
    double rough = v[4] + 0.12 * (streak - 0.5) + 0.25 * scratch;
    m.roughness.data[i] = real(clamp01(rough));
  });
  height_to_normals(height, v[3] * 0.08, m);
}

void gen_wood(const std::vector<double>& v, uint64_t seed, SvbrdfMaps& m) {
  int res = m.resolution;
  Vec3 dark = hsv_to_rgb(v[2], 0.6, v[4]);
  Vec3 light = hsv_to_rgb(v[2] + 0.02, 0.5, v[3]);
  std::vector<double> height(size_t(res) * res);
  for_uv(res, [&](int64_t i, double u, double w) {
    double warp = fbm(seed, u * 3, w * 3, 3);
    double grain = 0.5 + 0.5 * std::sin(2.0 * kPi * (v[0] * u + v[1] * warp) +
                                        8.0 * w * 0.1);
    double fibers = value_noise(seed + 13, u * 8, w * 160) * 0.1;
    height[size_t(i)] = grain * 0.9 + fibers;
    Vec3 col = dark * (1.0 - grain) + light * grain;
    set_px(m.diffuse_albedo, i, col);
    set_px(m.specular_albedo, i, {0.04, 0.04, 0.04});
    m.roughness.data[i] = real(clamp01(v[6] - 0.15 * grain + fibers));
  });
  height_to_normals(height, v[5] * 0.12, m);
}

void gen_fabric(const std::vector<double>& v, uint64_t seed, SvbrdfMaps& m) {
  int res = m.resolution;
  Vec3 base = hsv_to_rgb(v[2], v[3], v[4]);
  std::vector<double> height(size_t(res) * res);
  for_uv(res, [&](int64_t i, double u, double w) {
    double wu = std::sin(2.0 * kPi * u * v[0]);
    double wv = std::sin(2.0 * kPi * w * v[0]);
    double weave = 0.5 + 0.5 * wu * wv;
    double fuzz = value_noise(seed, u * 90, w * 90) * 0.15;
    height[size_t(i)] = weave + fuzz;
    Vec3 col = base * (0.85 + 0.3 * weave * 0.5);
    set_px(m.diffuse_albedo, i, col);
    set_px(m.specular_albedo, i, {0.02, 0.02, 0.02});
    m.roughness.data[i] = real(clamp01(v[5] - 0.05 * weave + fuzz * 0.3));
  });
  height_to_normals(height, v[1] * 0.1, m);
}

void gen_stone(const std::vector<double>& v, uint64_t seed, SvbrdfMaps& m) {
  int res = m.resolution;
  Vec3 tint = hsv_to_rgb(v[3], v[4], 1.0);
  std::vector<double> height(size_t(res) * res);
  for_uv(res, [&](int64_t i, double u, double w) {
    double relief = fbm(seed, u * v[0], w * v[0], 5);
    height[size_t(i)] = relief;
    double mottle = fbm(seed + 21, u * 9, w * 9, 3);
    double g = v[2] * (0.75 + 0.5 * mottle);
    Vec3 col = Vec3(g, g, g).cmul(tint * 0.25 + Vec3(0.75, 0.75, 0.75));
    set_px(m.diffuse_albedo, i, col);
    set_px(m.specular_albedo, i, {0.03, 0.03, 0.03});
    m.roughness.data[i] = real(clamp01(v[5] - 0.1 * relief + 0.1 * mottle));
  });
  height_to_normals(height, v[1] * 0.25, m);
}

void gen_tiles(const std::vector<double>& v, uint64_t seed, SvbrdfMaps& m) {
  int res = m.resolution;
  double n = std::floor(v[0]);
  std::vector<double> height(size_t(res) * res);
  for_uv(res, [&](int64_t i, double u, double w) {
    double tu = u * n, tv = w * n;
    int64_t ix = int64_t(std::floor(tu)), iy = int64_t(std::floor(tv));
    double fu = tu - std::floor(tu), fv = tv - std::floor(tv);
    double edge = std::min(std::min(fu, 1.0 - fu), std::min(fv, 1.0 - fv));
    double grout = 1.0 - clamp01(edge / v[1]);  // 1 in the grout lines
    double tile_h = hash01(seed, ix, iy);
    Vec3 tile_col =
        hsv_to_rgb(v[3] + (tile_h - 0.5) * v[4], 0.45, v[5]);
    Vec3 grout_col = {0.35, 0.33, 0.3};
    set_px(m.diffuse_albedo, i, tile_col * (1.0 - grout) + grout_col * grout);
    double spec = 0.05 * (1.0 - grout) + 0.02 * grout;
    set_px(m.specular_albedo, i, {spec, spec, spec});
    double tile_rough =
        clamp01(1.0 - v[2] + (hash01(seed + 3, ix, iy) - 0.5) * 0.1);
    m.roughness.data[i] = real(clamp01(tile_rough * (1.0 - grout) + 0.85 * grout));
    height[size_t(i)] = 1.0 - grout * grout * 0.9;
  });
  height_to_normals(height, 0.25, m);
}

void gen_ground(const std::vector<double>& v, uint64_t seed, SvbrdfMaps& m) {
  int res = m.resolution;
  Vec3 dirt = hsv_to_rgb(v[2], 0.45, v[3]);
  std::vector<double> height(size_t(res) * res);
  for_uv(res, [&](int64_t i, double u, double w) {
    WorleyResult c = worley(seed, u * v[0], w * v[0]);
    double thr = 0.45 * v[5];
    double pebble = c.f1 < thr ? std::sqrt(1.0 - c.f1 / thr) : 0.0;
    double soil = fbm(seed + 31, u * 14, w * 14, 3);
    height[size_t(i)] = pebble * v[1] + soil * 0.2;
    double g = 0.3 + 0.45 * (double(c.cell_hash >> 11) * 0x1.0p-53);
    Vec3 pebble_col = {g, g * 0.97, g * 0.92};
    Vec3 col = dirt * (0.8 + 0.4 * soil) * (1.0 - pebble) + pebble_col * pebble;
    set_px(m.diffuse_albedo, i, col);
    double spec = 0.02 + 0.03 * pebble;
    set_px(m.specular_albedo, i, {spec, spec, spec});
    m.roughness.data[i] = real(clamp01(v[4] - 0.3 * pebble + 0.1 * soil));
  });
  height_to_normals(height, 0.3, m);
}

const MaterialGenerator kGenerators[kMaterialClassCount] = {
    {MaterialClass::paint,
     {{"hue", 0.0, 0.6, 1.0},
      {"saturation", 0.0, 0.35, 0.8},
      {"value", 0.3, 0.7, 0.95},
      {"roughness", 0.15, 0.45, 0.8},
      {"orange_peel", 0.05, 0.3, 0.8},
      {"peel_scale", 8.0, 18.0, 40.0}}},
    {MaterialClass::plastic,
     {{"hue", 0.0, 0.12, 1.0},
      {"saturation", 0.3, 0.7, 1.0},
      {"value", 0.4, 0.8, 0.95},
      {"gloss", 0.4, 0.75, 0.95},
      {"emboss_scale", 2.0, 5.0, 12.0},
      {"emboss_strength", 0.0, 0.4, 1.0}}},
    {MaterialClass::leather,
     {{"cell_scale", 6.0, 12.0, 24.0},
      {"groove_depth", 0.2, 0.6, 1.0},
      {"hue", 0.05, 0.08, 0.13},
      {"value", 0.15, 0.35, 0.6},
      {"roughness_base", 0.45, 0.6, 0.75},
      {"roughness_variation", 0.0, 0.15, 0.25}}},
    {MaterialClass::metal,
     {{"specular_level", 0.4, 0.7, 0.95},
      {"tint", 0.0, 0.15, 0.4},
      {"brush_scale", 20.0, 60.0, 120.0},
      {"brush_strength", 0.0, 0.3, 0.8},
      {"roughness", 0.05, 0.2, 0.45},
      {"scratch_density", 0.0, 0.3, 1.0}}},
    {MaterialClass::wood,
     {{"ring_scale", 3.0, 7.0, 14.0},
      {"distortion", 0.05, 0.25, 0.6},
      {"hue", 0.05, 0.09, 0.12},
      {"light_value", 0.35, 0.55, 0.75},
      {"dark_value", 0.1, 0.25, 0.4},
      {"grain_bump", 0.0, 0.35, 0.8},
      {"roughness", 0.3, 0.55, 0.8}}},
    {MaterialClass::fabric,
     {{"weave_scale", 20.0, 40.0, 80.0},
      {"thread_depth", 0.1, 0.5, 1.0},
      {"hue", 0.0, 0.55, 1.0},
      {"saturation", 0.2, 0.5, 0.9},
      {"value", 0.25, 0.5, 0.8},
      {"roughness", 0.7, 0.85, 0.95}}},
    {MaterialClass::stone,
     {{"relief_scale", 3.0, 6.0, 12.0},
      {"relief_strength", 0.2, 0.6, 1.0},
      {"gray", 0.3, 0.55, 0.8},
      {"tint_hue", 0.0, 0.08, 1.0},
      {"tint_amount", 0.0, 0.08, 0.2},
      {"roughness", 0.6, 0.8, 0.95}}},
    {MaterialClass::tiles,
     {{"tile_count", 2.0, 4.0, 8.0},
      {"grout_width", 0.02, 0.06, 0.12},
      {"gloss", 0.5, 0.8, 0.95},
      {"hue_base", 0.0, 0.5, 1.0},
      {"hue_spread", 0.0, 0.15, 0.5},
      {"value", 0.3, 0.6, 0.9}}},
    {MaterialClass::ground,
     {{"pebble_scale", 6.0, 12.0, 25.0},
      {"pebble_strength", 0.2, 0.6, 1.0},
      {"dirt_hue", 0.07, 0.1, 0.14},
      {"dirt_value", 0.2, 0.35, 0.55},
      {"roughness", 0.7, 0.85, 0.95},
      {"pebble_fraction", 0.2, 0.5, 0.8}}},
};

constexpr uint64_t kPerturbStream = 0x7e57ab1eULL;

}  // namespace

MaterialGenerator generator_for(MaterialClass cls) {
  return kGenerators[size_t(static_cast<int>(cls))];
}

SvbrdfMaps generate_material(MaterialClass cls,
                             const std::vector<double>& values, uint64_t seed,
                             int resolution) {
  const MaterialGenerator& gen = kGenerators[size_t(static_cast<int>(cls))];
  if (values.size() != gen.params.size())
    throw std::invalid_argument("generate_material: parameter count mismatch");
  for (size_t i = 0; i < values.size(); ++i)
    if (values[i] < gen.params[i].min_value - 1e-9 ||
        values[i] > gen.params[i].max_value + 1e-9)
      throw std::invalid_argument("generate_material: parameter '" +
                                  gen.params[i].name + "' out of range");

  SvbrdfMaps maps(resolution);
  switch (cls) {
    case MaterialClass::paint: gen_paint(values, seed, maps); break;
    case MaterialClass::plastic: gen_plastic(values, seed, maps); break;
    case MaterialClass::leather: gen_leather(values, seed, maps); break;
    case MaterialClass::metal: gen_metal(values, seed, maps); break;
    case MaterialClass::wood: gen_wood(values, seed, maps); break;
    case MaterialClass::fabric: gen_fabric(values, seed, maps); break;
    case MaterialClass::stone: gen_stone(values, seed, maps); break;
    case MaterialClass::tiles: gen_tiles(values, seed, maps); break;
    case MaterialClass::ground: gen_ground(values, seed, maps); break;
  }
  return maps;
}

SvbrdfMaps generate_base_material(MaterialClass cls, uint64_t seed,
                                  int resolution) {
  const MaterialGenerator& gen = kGenerators[size_t(static_cast<int>(cls))];
  std::vector<double> defaults;
  defaults.reserve(gen.params.size());
  for (const ParamSpec& p : gen.params) defaults.push_back(p.default_value);
  return generate_material(cls, defaults, seed, resolution);
}

SvbrdfMaps perturb_material(const MaterialGenerator& gen, uint64_t seed,
                            int resolution) {
  Rng rng(Rng::mix(seed, kPerturbStream));
  std::vector<double> values;
  values.reserve(gen.params.size());
  for (const ParamSpec& p : gen.params)
    values.push_back(rng.uniform(p.min_value, p.max_value));
  return generate_material(gen.cls, values, seed, resolution);
}

// ---------------------------------------------------------------------------
// Dataset synthesis.

namespace {

// Largest axis-aligned square that fits inside the transformed footprint.
double inner_square_side(int base_res, double rotation, double scale) {
  double c = std::abs(std::cos(rotation)) + std::abs(std::sin(rotation));
  return double(base_res) * scale / c;
}

SampleRecord draw_record(const DatasetSpec& spec, int stored_res, int base_res,
                         int index) {
  Rng rng(Rng::mix(spec.seed, uint64_t(index)));
  SampleRecord rec;
  rec.index = index;
  rec.cls = static_cast<MaterialClass>(rng.uniform_int(kMaterialClassCount));
  rec.base_seed = rng.next_u64();
  rec.blended = rng.uniform() < spec.blend_fraction;
  if (rec.blended) {
    rec.cls2 = static_cast<MaterialClass>(rng.uniform_int(kMaterialClassCount));
    rec.seed2 = rng.next_u64();
    rec.alpha = rng.uniform();
  }
  rec.rotation = rng.uniform(0.0, 2.0 * kPi);
  rec.scale = rng.uniform(0.75, 1.25);
  double side = inner_square_side(base_res, rec.rotation, rec.scale);
  double margin = std::max(0.0, (side - stored_res) * 0.5);
  double cx = base_res * 0.5 - stored_res * 0.5;
  rec.crop_x = cx + rng.uniform(-1.0, 1.0) * margin;
  rec.crop_y = cx + rng.uniform(-1.0, 1.0) * margin;
  double ang = rng.uniform(0.0, 2.0 * kPi);
  double rad = 0.4 * std::sqrt(rng.uniform());
  rec.light_offset_x = rad * std::cos(ang);
  rec.light_offset_y = rad * std::sin(ang);
  rec.exposure = 1.0;
  return rec;
}

void write_sample_files(const std::string& dir, const Sample& s,
                        const SampleRecord& rec) {
  save_bundle(dir, s.gt, rec.cls, rec.base_seed);
  std::vector<uint16_t> q(s.input.data.size());
  for (size_t i = 0; i < q.size(); ++i)
    q[i] = uint16_t(std::lround(clamp01(double(s.input.data[i])) * 65535.0));
  write_png16(dir + "/input.png", s.input.width, s.input.height, 3, q);
}

nlohmann::json record_to_json(const SampleRecord& r) {
  nlohmann::json j;
  j["index"] = r.index;
  j["class"] = material_class_name(r.cls);
  j["base_seed"] = r.base_seed;
  j["blended"] = r.blended;
  j["class2"] = material_class_name(r.cls2);
  j["seed2"] = r.seed2;
  j["alpha"] = r.alpha;
  j["rotation"] = r.rotation;
  j["scale"] = r.scale;
  j["crop_x"] = r.crop_x;
  j["crop_y"] = r.crop_y;
  j["light_offset_x"] = r.light_offset_x;
  j["light_offset_y"] = r.light_offset_y;
  j["exposure"] = r.exposure;
  return j;
}

SampleRecord record_from_json(const nlohmann::json& j) {
  SampleRecord r;
  r.index = j.at("index").get<int>();
  r.cls = material_class_from_name(j.at("class").get<std::string>());
  r.base_seed = j.at("base_seed").get<uint64_t>();
  r.blended = j.at("blended").get<bool>();
  r.cls2 = material_class_from_name(j.at("class2").get<std::string>());
  r.seed2 = j.at("seed2").get<uint64_t>();
  r.alpha = j.at("alpha").get<double>();
  r.rotation = j.at("rotation").get<double>();
  r.scale = j.at("scale").get<double>();
  r.crop_x = j.at("crop_x").get<double>();
  r.crop_y = j.at("crop_y").get<double>();
  r.light_offset_x = j.at("light_offset_x").get<double>();
  r.light_offset_y = j.at("light_offset_y").get<double>();
  r.exposure = j.at("exposure").get<double>();
  return r;
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["count"] = m.count;
  j["resolution"] = m.resolution;
  j["stored_resolution"] = m.stored_resolution;
  j["base_resolution"] = m.base_resolution;
  j["blend_fraction"] = m.blend_fraction;
  j["samples"] = nlohmann::json::array();
  for (const SampleRecord& r : m.samples) j["samples"].push_back(record_to_json(r));
  return j;
}

}  // namespace

Sample build_sample(const DatasetManifest& manifest, const SampleRecord& rec) {
  SvbrdfMaps base = perturb_material(generator_for(rec.cls), rec.base_seed,
                                     manifest.base_resolution);
  if (rec.blended) {
    SvbrdfMaps other = perturb_material(generator_for(rec.cls2), rec.seed2,
                                        manifest.base_resolution);
    base = blend_svbrdfs(base, other, rec.alpha);
  }
  Sample s;
  s.gt = transform_svbrdf(base, rec.rotation, rec.scale, rec.crop_x,
                          rec.crop_y, manifest.stored_resolution);
  FlashScene scene;
  scene.light_offset_x = rec.light_offset_x;
  scene.light_offset_y = rec.light_offset_y;
  ImageF hdr = render_svbrdf(s.gt, scene.to_config());
  s.input = ImageF(hdr.width, hdr.height, 3);
  for (size_t i = 0; i < hdr.data.size(); ++i)
    s.input.data[i] = real(clamp01(double(hdr.data[i]) * rec.exposure));
  return s;
}

std::string sample_dir(const std::string& out_dir, int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return out_dir + "/" + buf;
}

DatasetManifest plan_dataset(const DatasetSpec& spec) {
  if (spec.count < 0 || spec.resolution <= 0)
    throw std::invalid_argument("plan_dataset: bad spec");
  DatasetManifest m;
  m.version = 1;
  m.seed = spec.seed;
  m.count = spec.count;
  m.resolution = spec.resolution;
  m.stored_resolution = spec.resolution * 5 / 4;
  m.base_resolution = m.stored_resolution * 2;
  m.blend_fraction = spec.blend_fraction;
  for (int i = 0; i < spec.count; ++i)
    m.samples.push_back(draw_record(spec, m.stored_resolution,
                                    m.base_resolution, i));
  return m;
}

DatasetManifest synthesize_dataset(const DatasetSpec& spec,
                                   const std::string& out_dir) {
  DatasetManifest m = plan_dataset(spec);
  std::filesystem::create_directories(out_dir);
  save_manifest(out_dir + "/manifest.json", m);
  regenerate_samples(m, out_dir);
  return m;
}

void regenerate_samples(const DatasetManifest& manifest,
                        const std::string& out_dir) {
  for (const SampleRecord& rec : manifest.samples) {
    try {
      Sample s = build_sample(manifest, rec);
      write_sample_files(sample_dir(out_dir, rec.index), s, rec);
    } catch (const std::exception& e) {
      throw std::runtime_error("sample " + std::to_string(rec.index) + ": " +
                               e.what());
    }
  }
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << manifest_to_json(m).dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  m.seed = j.at("seed").get<uint64_t>();
  m.count = j.at("count").get<int>();
  m.resolution = j.at("resolution").get<int>();
  m.stored_resolution = j.at("stored_resolution").get<int>();
  m.base_resolution = j.at("base_resolution").get<int>();
  m.blend_fraction = j.at("blend_fraction").get<double>();
  for (const auto& rj : j.at("samples")) m.samples.push_back(record_from_json(rj));
  return m;
}

Sample load_sample(const std::string& out_dir, int index) {
  std::string dir = sample_dir(out_dir, index);
  Sample s;
  Bundle b = load_bundle(dir);
  s.gt = std::move(b.maps);
  PngImage png = read_png(dir + "/input.png");
  if (png.channels != 3 || png.bit_depth != 16)
    throw std::runtime_error(dir + "/input.png: expected 16-bit RGB");
  s.input = ImageF(png.width, png.height, 3);
  for (size_t i = 0; i < s.input.data.size(); ++i)
    s.input.data[i] = real(double(png.samples[i]) / 65535.0);
  return s;
}

uint64_t manifest_hash(const DatasetManifest& m) {
  std::string dump = manifest_to_json(m).dump(2);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace svbrdf
