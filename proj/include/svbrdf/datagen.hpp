#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "svbrdf/core.hpp"
#include "svbrdf/types.hpp"

namespace svbrdf {

// One ranged scalar knob of a procedural generator.
struct ParamSpec {
  std::string name;
  double min_value = 0.0;
  double default_value = 0.0;
  double max_value = 0.0;
};

// A material class plus its parameter schema. Generation is a pure function
// of (class, parameter values, seed).
struct MaterialGenerator {
  MaterialClass cls = MaterialClass::paint;
  std::vector<ParamSpec> params;
};

MaterialGenerator generator_for(MaterialClass cls);

// Core generation entry point; `values` must match the generator's schema
// length and lie within the declared ranges.
SvbrdfMaps generate_material(MaterialClass cls,
                             const std::vector<double>& values, uint64_t seed,
                             int resolution);

// Defaults for every parameter.
SvbrdfMaps generate_base_material(MaterialClass cls, uint64_t seed,
                                  int resolution);

// Draws each parameter uniformly within its range (from a stream derived
// from `seed`) and regenerates with the same seed, so zero-width ranges
// reproduce the default material exactly.
SvbrdfMaps perturb_material(const MaterialGenerator& gen, uint64_t seed,
                            int resolution);

// ---------------------------------------------------------------------------
// Dataset synthesis.

struct DatasetSpec {
  int count = 500;
  uint64_t seed = 1;
  int resolution = 64;          // train-time crop size
  double blend_fraction = 0.3;  // probability a sample blends a random pair
};

// Everything needed to regenerate one sample bit-exactly.
struct SampleRecord {
  int index = 0;
  MaterialClass cls = MaterialClass::paint;
  uint64_t base_seed = 0;
  bool blended = false;
  MaterialClass cls2 = MaterialClass::paint;
  uint64_t seed2 = 0;
  double alpha = 0.0;
  double rotation = 0.0;  // radians
  double scale = 1.0;
  double crop_x = 0.0;
  double crop_y = 0.0;
  double light_offset_x = 0.0;
  double light_offset_y = 0.0;
  double exposure = 1.0;
};

struct DatasetManifest {
  int version = 1;
  uint64_t seed = 0;
  int count = 0;
  int resolution = 0;         // train-time crop size
  int stored_resolution = 0;  // on-disk sample size (1.25x oversized)
  int base_resolution = 0;    // pre-transform generation size
  double blend_fraction = 0.0;
  std::vector<SampleRecord> samples;
};

// Draws all sample records from per-sample RNG streams without touching the
// filesystem. Deterministic for a fixed spec.
DatasetManifest plan_dataset(const DatasetSpec& spec);

// plan_dataset + write every sample (input.png + ground-truth bundle) under
// out_dir/NNNNNN/ + store manifest.json.
DatasetManifest synthesize_dataset(const DatasetSpec& spec,
                                   const std::string& out_dir);

// Replays stored records: byte-identical to the original synthesis.
void regenerate_samples(const DatasetManifest& manifest,
                        const std::string& out_dir);

// Produces one sample's maps and LDR input from its record.
struct Sample {
  ImageF input;  // LDR flash-lit RGB in [0,1]
  SvbrdfMaps gt;
};
Sample build_sample(const DatasetManifest& manifest, const SampleRecord& rec);

// On-disk access.
std::string sample_dir(const std::string& out_dir, int index);
void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);
Sample load_sample(const std::string& out_dir, int index);

// FNV-1a64 over the canonical manifest serialization.
uint64_t manifest_hash(const DatasetManifest& m);

}  // namespace svbrdf
