#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mhaff/annotations.hpp"
#include "mhaff/random.hpp"
#include "mhaff/volume.hpp"

namespace mhaff::preprocess {

inline constexpr double kDefaultSpacing = 0.625;  // mm, isotropic
inline constexpr std::size_t kRoiSide = 32;
inline constexpr float kAirHU = -1000.0f;
inline constexpr float kLungThresholdHU = -320.0f;
inline constexpr std::array<std::size_t, 3> kCubeSides{16, 32, 48};

struct HuWindow {
  double min = -1000.0;
  double max = 400.0;
};

// new dims = round(dims * spacing / target), at least 1. Samples outside
// the source grid clamp to the nearest voxel.
Volume resample_trilinear(const Volume& volume, const Vec3& target_spacing);
// Binary masks: trilinear, then threshold at 0.5.
Volume resample_mask(const Volume& mask, const Vec3& target_spacing);
Index3 map_center(const Index3& center, const Vec3& source_spacing, const Vec3& target_spacing);

float normalize_hu(float hu, const HuWindow& window);
Volume normalize_hu(const Volume& volume, const HuWindow& window);

// n slices of side x side pixels, values in [0, 1].
struct RoiStack {
  std::size_t slices = 0;
  std::size_t side = kRoiSide;
  std::vector<float> values;
  std::string nodule_id;
  std::vector<std::int64_t> slice_z;

  float& at(std::size_t s, std::size_t y, std::size_t x) { return values[(s * side + y) * side + x]; }
  float at(std::size_t s, std::size_t y, std::size_t x) const { return values[(s * side + y) * side + x]; }
};

// Slices cz-(n-1)/2 .. cz+(n-1)/2, each cropped to x in [cx-16, cx+15] and
// y in [cy-16, cy+15]. Pixels outside the volume are `fill`.
RoiStack extract_roi_stack(const Volume& volume, const NoduleAnnotation& annotation, std::size_t n, float fill = 0.0f);

struct NoduleCube {
  std::size_t side = 0;
  std::vector<float> values;  // x fastest
  Index3 center;
  Vec3 spacing{1.0, 1.0, 1.0};

  float at(std::size_t x, std::size_t y, std::size_t z) const { return values[x + side * (y + side * z)]; }
};

// Cube covering [c - side/2, c + side/2 - 1] on each axis.
NoduleCube extract_cube(const Volume& hu, const Index3& center, std::size_t side, float fill = kAirHU);
std::array<NoduleCube, 3> extract_cubes(const Volume& hu, const Index3& center);

// Threshold below -320 HU, 6-connected components, drop components touching
// the x/y faces, keep the two largest, close with a radius-2 ball and fill
// holes slice by slice. Returns a 0/1 volume; throws EmptyMask when nothing survives.
Volume compute_lung_mask(const Volume& hu);

struct AugmentParams {
  int rotate_quarters = 0;  // 0 = none, else 1..3
  bool flip_horizontal = false;
  bool flip_vertical = false;
  int shift_x = 0;
  int shift_y = 0;
  double amplification = 1.0;
};

// Each transform is enabled with probability 0.5.
AugmentParams draw_augment(Rng& rng);
void apply_augment(RoiStack& stack, const AugmentParams& params);
void apply_augment(NoduleCube& cube, const AugmentParams& params);
RoiStack augment(const RoiStack& stack, Rng& rng);
NoduleCube augment(const NoduleCube& cube, Rng& rng);

}  // namespace mhaff::preprocess
