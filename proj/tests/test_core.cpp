#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "svbrdf/core.hpp"
#include "svbrdf/rng.hpp"

using namespace svbrdf;

namespace {

// Smooth low-frequency maps so resampling error stays far below test bounds.
SvbrdfMaps smooth_maps(int res) {
  SvbrdfMaps maps(res);
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      double u = (x + 0.5) / res, v = (y + 0.5) / res;
      Vec3 n = normalize(Vec3(0.3 * std::sin(2.0 * kPi * u),
                              0.3 * std::cos(2.0 * kPi * v), 1.0));
      maps.normal.at(y, x, 0) = real(n.x);
      maps.normal.at(y, x, 1) = real(n.y);
      maps.normal.at(y, x, 2) = real(n.z);
      maps.diffuse_albedo.at(y, x, 0) = real(0.3 + 0.2 * std::sin(kPi * u));
      maps.diffuse_albedo.at(y, x, 1) = real(0.5 + 0.1 * std::cos(kPi * v));
      maps.diffuse_albedo.at(y, x, 2) = real(0.4);
      maps.specular_albedo.at(y, x, 0) = real(0.05 + 0.03 * u);
      maps.specular_albedo.at(y, x, 1) = real(0.04);
      maps.specular_albedo.at(y, x, 2) = real(0.06 * v);
      maps.roughness.at(y, x, 0) = real(0.3 + 0.4 * u * v);
    }
  return maps;
}

SvbrdfMaps random_valid_maps(int res, uint64_t seed) {
  Rng rng(seed);
  SvbrdfMaps maps(res);
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      Vec3 n = decode_normal(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8));
      maps.normal.at(y, x, 0) = real(n.x);
      maps.normal.at(y, x, 1) = real(n.y);
      maps.normal.at(y, x, 2) = real(n.z);
      for (int c = 0; c < 3; ++c) {
        maps.diffuse_albedo.at(y, x, c) = real(rng.uniform());
        maps.specular_albedo.at(y, x, c) = real(rng.uniform());
      }
      maps.roughness.at(y, x, 0) = real(rng.uniform());
    }
  return maps;
}

double max_abs_diff(const ImageF& a, const ImageF& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::abs(double(a.data[i]) - double(b.data[i])));
  return worst;
}

double max_maps_diff(const SvbrdfMaps& a, const SvbrdfMaps& b) {
  double worst = max_abs_diff(a.normal, b.normal);
  worst = std::max(worst, max_abs_diff(a.diffuse_albedo, b.diffuse_albedo));
  worst = std::max(worst, max_abs_diff(a.specular_albedo, b.specular_albedo));
  worst = std::max(worst, max_abs_diff(a.roughness, b.roughness));
  return worst;
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::vector<char>(std::istreambuf_iterator<char>(f),
                           std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("decode_normal maps the flat encoding to the up vector") {
  Vec3 n = decode_normal(0.5, 0.5);
  CHECK(n.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(n.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(n.z == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("decode_normal handles the parameterization boundary") {
  Vec3 n = decode_normal(1.0, 0.5);
  CHECK(n.x == doctest::Approx(1.0));
  CHECK(n.y == doctest::Approx(0.0));
  CHECK(n.z == doctest::Approx(0.0));
}

TEST_CASE("decode_normal evaluates an interior point") {
  Vec3 n = decode_normal(0.75, 0.5);
  CHECK(n.x == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(n.y == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(n.z == doctest::Approx(std::sqrt(0.75)).epsilon(1e-9));
  CHECK(n.z == doctest::Approx(0.8660).epsilon(1e-4));
}

TEST_CASE("decode_normal is unit length with z >= 0 over the whole square") {
  for (int i = 0; i <= 40; ++i)
    for (int j = 0; j <= 40; ++j) {
      Vec3 n = decode_normal(i / 40.0, j / 40.0);
      CHECK(std::abs(length(n) - 1.0) < 1e-5);
      CHECK(n.z >= 0.0);
    }
}

TEST_CASE("blend endpoints reproduce the inputs exactly") {
  SvbrdfMaps a = random_valid_maps(8, 11);
  SvbrdfMaps b = random_valid_maps(8, 22);
  CHECK(max_maps_diff(blend_svbrdfs(a, b, 0.0), a) == 0.0);
  CHECK(max_maps_diff(blend_svbrdfs(a, b, 1.0), b) == 0.0);
}

TEST_CASE("blend midpoint averages albedo channels") {
  SvbrdfMaps a(4), b(4);
  for (size_t i = 0; i < a.diffuse_albedo.data.size(); ++i) {
    a.diffuse_albedo.data[i] = real(0.2);
    b.diffuse_albedo.data[i] = real(0.6);
  }
  SvbrdfMaps mid = blend_svbrdfs(a, b, 0.5);
  for (real v : mid.diffuse_albedo.data)
    CHECK(double(v) == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("blending a map with itself is the identity for any weight") {
  SvbrdfMaps a = random_valid_maps(6, 33);
  for (double alpha : {0.0, 0.25, 0.5, 0.9, 1.0})
    CHECK(max_maps_diff(blend_svbrdfs(a, a, alpha), a) < 1e-6);
}

TEST_CASE("blended normals stay unit length") {
  SvbrdfMaps a = random_valid_maps(8, 44);
  SvbrdfMaps b = random_valid_maps(8, 55);
  SvbrdfMaps mid = blend_svbrdfs(a, b, 0.3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      Vec3 n(mid.normal.at(y, x, 0), mid.normal.at(y, x, 1),
             mid.normal.at(y, x, 2));
      CHECK(std::abs(length(n) - 1.0) < 1e-5);
    }
}

TEST_CASE("blend rejects mismatched resolutions") {
  SvbrdfMaps a(4), b(8);
  CHECK_THROWS_AS(blend_svbrdfs(a, b, 0.5), std::invalid_argument);
}

TEST_CASE("identity transform returns the input unchanged") {
  SvbrdfMaps maps = random_valid_maps(16, 7);
  SvbrdfMaps out = transform_svbrdf(maps, 0.0, 1.0, 0.0, 0.0, 16);
  CHECK(max_maps_diff(out, maps) < 1e-6);
}

TEST_CASE("quarter-turn rotation co-rotates the normal field") {
  const int res = 16;
  SvbrdfMaps maps(res);  // constant flat field with one marked pixel
  const int sx = 4, sy = 6;
  maps.normal.at(sy, sx, 0) = 1;
  maps.normal.at(sy, sx, 1) = 0;
  maps.normal.at(sy, sx, 2) = 0;
  for (size_t i = 0; i < maps.diffuse_albedo.data.size(); ++i)
    maps.diffuse_albedo.data[i] = real(0.25);
  maps.diffuse_albedo.at(sy, sx, 0) = real(0.9);

  SvbrdfMaps out = transform_svbrdf(maps, kPi / 2.0, 1.0, 0.0, 0.0, res);
  // Forward map q = R(90) (p - c) + c sends source pixel (sx, sy) to
  // output pixel (res - 1 - sy, sx) in x,y order.
  const int ox = res - 1 - sy, oy = sx;
  CHECK(double(out.diffuse_albedo.at(oy, ox, 0)) ==
        doctest::Approx(0.9).epsilon(1e-5));
  CHECK(double(out.normal.at(oy, ox, 0)) == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(double(out.normal.at(oy, ox, 1)) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(double(out.normal.at(oy, ox, 2)) == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("two eighth turns compose to a quarter turn up to resampling") {
  const int res = 64;
  SvbrdfMaps maps = smooth_maps(res);
  // Centered crop offsets cancel in the composition, so rotating 45 degrees
  // twice with nested central windows equals one 90 degree rotation read
  // through the innermost window.
  const int s1 = 44, s2 = 30;
  SvbrdfMaps once = transform_svbrdf(maps, kPi / 4.0, 1.0, (res - s1) / 2.0,
                                     (res - s1) / 2.0, s1);
  SvbrdfMaps twice = transform_svbrdf(once, kPi / 4.0, 1.0, (s1 - s2) / 2.0,
                                      (s1 - s2) / 2.0, s2);
  SvbrdfMaps direct = transform_svbrdf(maps, kPi / 2.0, 1.0, (res - s2) / 2.0,
                                       (res - s2) / 2.0, s2);
  CHECK(max_maps_diff(twice, direct) < 2e-2);
}

TEST_CASE("transforms preserve the unit range of albedo and roughness") {
  SvbrdfMaps maps = random_valid_maps(32, 99);  // high-contrast random field
  SvbrdfMaps out = transform_svbrdf(maps, 0.7, 1.3, 3.0, 5.0, 20);
  for (const ImageF* img :
       {&out.diffuse_albedo, &out.specular_albedo, &out.roughness})
    for (real v : img->data) {
      CHECK(double(v) >= 0.0);
      CHECK(double(v) <= 1.0);
    }
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) {
      Vec3 n(out.normal.at(y, x, 0), out.normal.at(y, x, 1),
             out.normal.at(y, x, 2));
      CHECK(std::abs(length(n) - 1.0) < 1e-5);
    }
}

TEST_CASE("a constant flat normal field is fixed under any rotation") {
  SvbrdfMaps maps(24);
  for (size_t i = 0; i < maps.diffuse_albedo.data.size(); ++i)
    maps.diffuse_albedo.data[i] = real(0.5);
  for (double angle : {0.3, 1.1, 2.0, kPi / 2.0}) {
    SvbrdfMaps out = transform_svbrdf(maps, angle, 1.0, 8.0, 8.0, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        CHECK(std::abs(double(out.normal.at(y, x, 0))) < 1e-6);
        CHECK(std::abs(double(out.normal.at(y, x, 1))) < 1e-6);
        CHECK(double(out.normal.at(y, x, 2)) ==
              doctest::Approx(1.0).epsilon(1e-6));
      }
  }
}

TEST_CASE("crops outside the transformed domain are rejected") {
  SvbrdfMaps maps = random_valid_maps(16, 3);
  // A full-frame window cannot survive a 45 degree rotation.
  CHECK_THROWS_AS(transform_svbrdf(maps, kPi / 4.0, 1.0, 0.0, 0.0, 16),
                  std::invalid_argument);
  CHECK_THROWS_AS(transform_svbrdf(maps, 0.0, 1.0, 10.0, 0.0, 16),
                  std::invalid_argument);
  CHECK_THROWS_AS(transform_svbrdf(maps, 0.0, 0.0, 0.0, 0.0, 8),
                  std::invalid_argument);
}

TEST_CASE("validate_maps accepts well-formed maps and rejects violations") {
  SvbrdfMaps good = random_valid_maps(8, 5);
  CHECK_NOTHROW(validate_maps(good));

  SvbrdfMaps bad_norm = good;
  bad_norm.normal.at(2, 2, 0) = real(0.5);  // breaks unit length
  bad_norm.normal.at(2, 2, 1) = real(0.5);
  bad_norm.normal.at(2, 2, 2) = real(0.5);
  CHECK_THROWS_AS(validate_maps(bad_norm), std::invalid_argument);

  SvbrdfMaps bad_range = good;
  bad_range.diffuse_albedo.at(1, 1, 0) = real(1.5);
  CHECK_THROWS_AS(validate_maps(bad_range), std::invalid_argument);

  SvbrdfMaps bad_res = good;
  bad_res.roughness = ImageF(4, 4, 1);
  CHECK_THROWS_AS(validate_maps(bad_res), std::invalid_argument);
}

TEST_CASE("channel codec round-trips maps through the 9-channel image") {
  SvbrdfMaps maps = random_valid_maps(8, 77);
  ImageF img = maps_to_channels(maps);
  REQUIRE(img.channels == 9);
  SvbrdfMaps back = channels_to_maps(img);
  CHECK(max_maps_diff(back, maps) < 1e-5);
  // Normal x,y land in channels 0,1 as (x,y)*0.5+0.5.
  CHECK(double(img.at(3, 3, 0)) ==
        doctest::Approx(double(maps.normal.at(3, 3, 0)) * 0.5 + 0.5)
            .epsilon(1e-6));
  CHECK(double(img.at(3, 3, 5)) ==
        doctest::Approx(double(maps.roughness.at(3, 3, 0))).epsilon(1e-6));
}

TEST_CASE("material class names round-trip") {
  for (int i = 0; i < kMaterialClassCount; ++i) {
    MaterialClass c = MaterialClass(i);
    CHECK(material_class_from_name(material_class_name(c)) == c);
  }
  CHECK_THROWS(material_class_from_name("granite"));
}

TEST_CASE("bundle save/load/save is byte-exact") {
  namespace fs = std::filesystem;
  fs::path base = fs::temp_directory_path() / "svbrdf_core_bundle";
  fs::remove_all(base);
  fs::create_directories(base);
  std::string dir1 = (base / "a").string(), dir2 = (base / "b").string();

  SvbrdfMaps maps = random_valid_maps(16, 1234);
  save_bundle(dir1, maps, MaterialClass::leather, 42);
  Bundle loaded = load_bundle(dir1);
  CHECK(loaded.cls == MaterialClass::leather);
  CHECK(loaded.seed == 42);
  CHECK(loaded.maps.resolution == 16);
  // 16-bit quantization bounds the decode error per channel.
  CHECK(max_maps_diff(loaded.maps, maps) < 2.0 / 65535.0 + 1e-4);

  save_bundle(dir2, loaded.maps, loaded.cls, loaded.seed);
  for (const char* name :
       {"normal.png", "diffuse.png", "specular.png", "roughness.png",
        "meta.json"}) {
    CAPTURE(name);
    CHECK(slurp(dir1 + "/" + name) == slurp(dir2 + "/" + name));
  }
  fs::remove_all(base);
}
