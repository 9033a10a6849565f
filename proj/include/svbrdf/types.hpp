#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace svbrdf {

// Training/runtime scalar. The default build uses 32-bit floats; configure
// with -DSVBRDF_REAL64=ON to rebuild everything in double precision for
// gradient verification.
#ifdef SVBRDF_REAL64
using real = double;
#else
using real = float;
#endif

constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3 cmul(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double length(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalize(const Vec3& v) {
  double len = length(v);
  if (len < 1e-12) return {0.0, 0.0, 1.0};
  return v / len;
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Row-major interleaved image, rows top to bottom.
struct ImageF {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<real> data;

  ImageF() = default;
  ImageF(int w, int h, int c, real fill = real(0))
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  real& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  real at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  real* row(int y) { return data.data() + static_cast<size_t>(y) * width * channels; }
  const real* pixel(int y, int x) const {
    return data.data() + (static_cast<size_t>(y) * width + x) * channels;
  }
  real* pixel(int y, int x) {
    return data.data() + (static_cast<size_t>(y) * width + x) * channels;
  }

  size_t size() const { return data.size(); }
  bool same_shape(const ImageF& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

}  // namespace svbrdf
