#pragma once

#include "svbrdf/types.hpp"

namespace svbrdf {

// One pixel's material parameters. `alpha` is the GGX width, derived as
// roughness^2 exactly; the >= 1e-3 floor is applied inside the evaluators.
struct BrdfPoint {
  Vec3 normal{0, 0, 1};
  Vec3 diffuse{0, 0, 0};
  Vec3 specular{0, 0, 0};
  double roughness = 0.5;
  double alpha = 0.25;

  BrdfPoint() = default;
  BrdfPoint(const Vec3& n, const Vec3& d, const Vec3& s, double r)
      : normal(n), diffuse(d), specular(s), roughness(r), alpha(r * r) {}
};

// Partials of each RGB reflectance channel with respect to the 9 parameter
// directions. The normal is parameterized by its x,y components with
// z = sqrt(1 - x^2 - y^2) dependent, matching the network's 2-channel output.
// diffuse/specular Jacobians are diagonal (channel c only feeds channel c),
// so a single Vec3 holds the three non-zero entries.
//
// The reflectance factors as f_c = diffuse_c/pi + fresnel_c * spec_scalar,
// and only spec_scalar depends on the normal; d_n_spec and fresnel expose
// that factorization so callers chaining through a different normal
// parameterization (e.g. the clamped decode outside the unit disc) can form
// df_c/dn = fresnel_c * d_n_spec in unconstrained xyz.
struct BrdfGradient {
  Vec3 value;        // forward reflectance, same as eval_brdf
  Vec3 d_nx, d_ny;   // dRGB/d normal.x, dRGB/d normal.y
  Vec3 d_diffuse;    // df_c / d diffuse_c
  Vec3 d_specular;   // df_c / d specular_c
  Vec3 d_roughness;  // dRGB/d roughness
  Vec3 d_n_spec;     // d spec_scalar / d normal (unconstrained xyz)
  Vec3 fresnel;      // F per channel
};

// GGX normal distribution D = a^2 / (pi * ((n.h)^2 (a^2 - 1) + 1)^2).
// alpha is floored at 1e-3 before use.
double ggx_ndf(double alpha, double ndoth);

// Schlick approximation F = f0 + (1 - f0) (1 - v.h)^5, componentwise.
Vec3 fresnel_schlick(const Vec3& f0, double vdoth);

// Separable Smith-Schlick G1(x) = x / (x (1-k) + k) with k = alpha / 2;
// returns G1(ndotv) * G1(ndotl).
double smith_geometry(double alpha, double ndotv, double ndotl);

// Cook-Torrance reflectance f = diffuse/pi + D*F*G / (4 (n.l)(n.v)).
// Below-horizon directions (n.l <= 0 or n.v <= 0) return zero; interior dot
// products are clamped to [1e-6, 1].
Vec3 eval_brdf(const BrdfPoint& p, const Vec3& wi, const Vec3& wo);

// Analytic partials of eval_brdf. Clamped quantities contribute zero
// gradient beyond their clamp boundary; below-horizon configurations return
// all-zero.
BrdfGradient eval_brdf_gradient(const BrdfPoint& p, const Vec3& wi,
                                const Vec3& wo);

}  // namespace svbrdf
