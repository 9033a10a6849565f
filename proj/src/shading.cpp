#include "svbrdf/shading.hpp"

#include <algorithm>
#include <cmath>

namespace svbrdf {
namespace {

constexpr double kAlphaFloor = 1e-3;
constexpr double kDotMin = 1e-6;

struct ClampedDot {
  double value;     // clamped into [kDotMin, 1]
  double gradient;  // 1 where the clamp is inactive, else 0
};

ClampedDot clamp_dot(double raw) {
  if (raw < kDotMin) return {kDotMin, 0.0};
  if (raw > 1.0) return {1.0, 0.0};
  return {raw, 1.0};
}

// The reflectance formula is symmetric in (wi, wo); evaluating the sorted
// pair routes both argument orders through the identical instruction stream
// so Helmholtz reciprocity holds bit-exactly even under FMA contraction.
bool vec_before(const Vec3& a, const Vec3& b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  return a.z < b.z;
}

}  // namespace

double ggx_ndf(double alpha, double ndoth) {
  double a = std::max(alpha, kAlphaFloor);
  double t = ndoth;
  double den = t * t * (a * a - 1.0) + 1.0;
  return a * a / (kPi * den * den);
}

Vec3 fresnel_schlick(const Vec3& f0, double vdoth) {
  double w = 1.0 - vdoth;
  double w5 = w * w * w * w * w;
  return {f0.x + (1.0 - f0.x) * w5, f0.y + (1.0 - f0.y) * w5,
          f0.z + (1.0 - f0.z) * w5};
}

double smith_geometry(double alpha, double ndotv, double ndotl) {
  double k = std::max(alpha, kAlphaFloor) * 0.5;
  auto g1 = [k](double x) { return x / (x * (1.0 - k) + k); };
  return g1(ndotv) * g1(ndotl);
}

Vec3 eval_brdf(const BrdfPoint& p, const Vec3& wi_in, const Vec3& wo_in) {
  const Vec3& wi = vec_before(wi_in, wo_in) ? wi_in : wo_in;
  const Vec3& wo = vec_before(wi_in, wo_in) ? wo_in : wi_in;
  double nl_raw = dot(p.normal, wi);
  double nv_raw = dot(p.normal, wo);
  if (nl_raw <= 0.0 || nv_raw <= 0.0) return {0.0, 0.0, 0.0};

  Vec3 h = normalize(wi + wo);
  double nl = clamp_dot(nl_raw).value;
  double nv = clamp_dot(nv_raw).value;
  double nh = clamp_dot(dot(p.normal, h)).value;
  // v.h = l.h on the half-vector bisector; the symmetric form keeps
  // reciprocity bit-exact under wi/wo exchange.
  double vh = clamp_dot(0.5 * dot(h, wi + wo)).value;

  double d = ggx_ndf(p.alpha, nh);
  Vec3 f = fresnel_schlick(p.specular, vh);
  double g = smith_geometry(p.alpha, nv, nl);
  double spec = d * g / (4.0 * nl * nv);
  return p.diffuse / kPi + f * spec;
}

BrdfGradient eval_brdf_gradient(const BrdfPoint& p, const Vec3& wi_in,
                                const Vec3& wo_in) {
  BrdfGradient out;
  const Vec3& wi = vec_before(wi_in, wo_in) ? wi_in : wo_in;
  const Vec3& wo = vec_before(wi_in, wo_in) ? wo_in : wi_in;
  double nl_raw = dot(p.normal, wi);
  double nv_raw = dot(p.normal, wo);
  if (nl_raw <= 0.0 || nv_raw <= 0.0) return out;

  Vec3 h = normalize(wi + wo);
  ClampedDot nl = clamp_dot(nl_raw);
  ClampedDot nv = clamp_dot(nv_raw);
  ClampedDot nh = clamp_dot(dot(p.normal, h));
  ClampedDot vh = clamp_dot(0.5 * dot(h, wi + wo));

  double a = std::max(p.alpha, kAlphaFloor);
  double a2 = a * a;
  double t = nh.value;
  double den = t * t * (a2 - 1.0) + 1.0;
  double d_ndf = a2 / (kPi * den * den);

  double w = 1.0 - vh.value;
  double w5 = w * w * w * w * w;
  Vec3 fres = fresnel_schlick(p.specular, vh.value);

  double k = a * 0.5;
  // G1(x)/x = 1/(x(1-k)+k) appears directly in the specular term once the
  // 4 n.l n.v denominator is folded in.
  double gl_den = nl.value * (1.0 - k) + k;
  double gv_den = nv.value * (1.0 - k) + k;
  double g1l = nl.value / gl_den;
  double g1v = nv.value / gv_den;
  double g = g1l * g1v;

  double spec = d_ndf * g / (4.0 * nl.value * nv.value);
  out.value = p.diffuse / kPi + fres * spec;

  // Diagonal partials: the diffuse term is linear, the Fresnel term is
  // linear in f0 with slope 1 - (1-v.h)^5.
  out.d_diffuse = {1.0 / kPi, 1.0 / kPi, 1.0 / kPi};
  double df_ds = 1.0 - w5;
  out.d_specular = {df_ds * spec, df_ds * spec, df_ds * spec};

  // Roughness: alpha = roughness^2 with the 1e-3 floor cutting the chain.
  double dalpha_drho = (p.alpha >= kAlphaFloor) ? 2.0 * p.roughness : 0.0;
  double dD_da = 2.0 * a * (1.0 - t * t - a2 * t * t) / (kPi * den * den * den);
  double dG1l_dk = -nl.value * (1.0 - nl.value) / (gl_den * gl_den);
  double dG1v_dk = -nv.value * (1.0 - nv.value) / (gv_den * gv_den);
  double dG_da = (dG1v_dk * g1l + g1v * dG1l_dk) * 0.5;
  double dspec_da =
      (dD_da * g + d_ndf * dG_da) / (4.0 * nl.value * nv.value);
  out.d_roughness = fres * (dspec_da * dalpha_drho);

  // Normal: the specular term sees n through t = n.h, n.l and n.v. With
  // S(x) = G1(x)/x = 1/(x(1-k)+k), spec = D * S(nl) * S(nv) / 4.
  double dD_dt = -4.0 * a2 * t * (a2 - 1.0) / (kPi * den * den * den);
  double dS_dnl = -(1.0 - k) / (gl_den * gl_den) * nl.gradient;
  double dS_dnv = -(1.0 - k) / (gv_den * gv_den) * nv.gradient;
  double s_nl = 1.0 / gl_den;
  double s_nv = 1.0 / gv_den;
  double dspec_dt = dD_dt * s_nl * s_nv / 4.0 * nh.gradient;
  double dspec_dnl = d_ndf * dS_dnl * s_nv / 4.0;
  double dspec_dnv = d_ndf * s_nl * dS_dnv / 4.0;
  out.d_n_spec = h * dspec_dt + wi * dspec_dnl + wo * dspec_dnv;
  out.fresnel = fres;

  // Project the unconstrained xyz gradient onto the x,y parameterization:
  // z = sqrt(1 - x^2 - y^2) gives dz/dx = -x/z.
  double nz = std::max(p.normal.z, kDotMin);
  double dz_dx = -p.normal.x / nz;
  double dz_dy = -p.normal.y / nz;
  double gx = out.d_n_spec.x + out.d_n_spec.z * dz_dx;
  double gy = out.d_n_spec.y + out.d_n_spec.z * dz_dy;
  out.d_nx = fres * gx;
  out.d_ny = fres * gy;
  return out;
}

}  // namespace svbrdf
