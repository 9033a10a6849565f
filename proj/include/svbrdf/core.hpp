#pragma once

#include <cstdint>
#include <string>

#include "svbrdf/types.hpp"

namespace svbrdf {

// The nine material classes used to organize generated materials.
enum class MaterialClass : int {
  paint = 0,
  plastic,
  leather,
  metal,
  wood,
  fabric,
  stone,
  tiles,
  ground,
};
inline constexpr int kMaterialClassCount = 9;

const char* material_class_name(MaterialClass c);
MaterialClass material_class_from_name(const std::string& name);

// Four aligned per-pixel parameter maps on a square grid.
//   normal:   3 channels, unit vectors in screen/tangent space, z >= 0
//   diffuse:  3 channels in [0,1]
//   specular: 3 channels in [0,1] (Fresnel F0)
//   roughness: 1 channel in [0,1]
struct SvbrdfMaps {
  int resolution = 0;
  ImageF normal;
  ImageF diffuse_albedo;
  ImageF specular_albedo;
  ImageF roughness;

  SvbrdfMaps() = default;
  explicit SvbrdfMaps(int res)
      : resolution(res),
        normal(res, res, 3),
        diffuse_albedo(res, res, 3),
        specular_albedo(res, res, 3),
        roughness(res, res, 1) {
    for (int64_t i = 0; i < int64_t(res) * res; ++i) normal.data[i * 3 + 2] = 1;
  }
};

// Throws std::invalid_argument when any invariant is violated: shared
// resolution, unit normals (within 1e-5) with z >= 0, channels in [0,1].
void validate_maps(const SvbrdfMaps& maps);

// Tangent-plane parameterization: inputs in [0,1] remap to [-1,1],
// z = sqrt(max(0, 1 - x^2 - y^2)), result renormalized to unit length.
Vec3 decode_normal(double x01, double y01);

// Per-channel convex combination (1-alpha)*a + alpha*b; blended normals are
// renormalized. Resolution mismatch is rejected.
SvbrdfMaps blend_svbrdfs(const SvbrdfMaps& a, const SvbrdfMaps& b,
                         double alpha);

// Affine resample: the source square is rotated by `rotation` radians and
// scaled by `scale` about its center, then an axis-aligned window of
// `crop_size` pixels at `crop_x/crop_y` (in transformed coordinates) is read
// back with bilinear interpolation. Normal x/y components co-rotate so the
// field stays expressed in screen space. The crop window must lie inside the
// transformed source footprint.
SvbrdfMaps transform_svbrdf(const SvbrdfMaps& maps, double rotation,
                            double scale, double crop_x, double crop_y,
                            int crop_size);

// Network-boundary codec between maps and the flat 9-channel image
// [normal.x01, normal.y01, diffuse rgb, roughness, specular rgb], all in
// [0,1] with normals stored as (x,y)*0.5+0.5.
ImageF maps_to_channels(const SvbrdfMaps& maps);
SvbrdfMaps channels_to_maps(const ImageF& img);

// Disk bundle: directory of four 16-bit PNGs (normal.png storing
// (x,y,z)*0.5+0.5, diffuse.png, specular.png, roughness.png grayscale) plus
// meta.json {resolution, class, seed}. save -> load -> save is byte-exact:
// the saved normal z is canonicalized from the quantized x,y.
void save_bundle(const std::string& dir, const SvbrdfMaps& maps,
                 MaterialClass cls, uint64_t seed);
struct Bundle {
  SvbrdfMaps maps;
  MaterialClass cls = MaterialClass::paint;
  uint64_t seed = 0;
};
Bundle load_bundle(const std::string& dir);

}  // namespace svbrdf
