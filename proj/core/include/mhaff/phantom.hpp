#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mhaff/annotations.hpp"
#include "mhaff/random.hpp"
#include "mhaff/volume.hpp"

namespace mhaff::phantom {

inline constexpr std::size_t kSide = 96;
inline constexpr double kSpacing = 0.625;
inline constexpr float kBodyHU = 0.0f;
inline constexpr float kLungHU = -850.0f;
inline constexpr double kLungNoise = 30.0;
inline constexpr double kMinRadiusMm = 4.0;
inline constexpr double kMaxRadiusMm = 9.0;

// Recipes: 0 ground-glass ellipsoid, 1 ground-glass rim with solid core,
// 2 solid with spicules and texture.
inline constexpr int kRecipes = 3;

struct Ellipsoid {
  Vec3 center;
  Vec3 semi_axes;
  bool contains(double x, double y, double z, double margin = 0.0) const;
};

// The two lung cavities of every phantom, in voxel coordinates.
std::array<Ellipsoid, 2> lung_ellipsoids();

// Nodule on a cube patch of odd side centred at voxel (half, half, half).
struct NodulePatch {
  std::int64_t half = 0;
  std::vector<float> hu;       // NaN outside the nodule
  std::vector<std::uint8_t> mask;
  Vec3 semi_axes{};            // of the ellipsoid body, voxels
  std::size_t side() const { return static_cast<std::size_t>(2 * half + 1); }
  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    const auto s = static_cast<std::int64_t>(side());
    return static_cast<std::size_t>((x + half) + s * ((y + half) + s * (z + half)));
  }
};

// `rng` drives geometry; texture noise comes from a Philox stream keyed by a
// draw from `rng`. Throws UnknownClass for recipes outside 0..2.
NodulePatch gen_nodule(int recipe, double radius_mm, double spacing, Rng& rng);

struct Options {
  std::size_t count_per_class = 100;
  std::size_t classes = 3;  // 2: recipes 0 and 2
  std::uint64_t seed = 0;
};

struct PlanEntry {
  std::string patient_id;
  int recipe = 0;
  int label = 0;
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
};

// Balanced, patient-disjoint plan; floor(N/5) validation and test cases,
// the remainder train, classes interleaved so every split stays balanced.
std::vector<PlanEntry> plan_dataset(const Options& options);

struct Case {
  PlanEntry entry;
  Volume hu;
  Volume mask;  // 1 inside the nodule
  Index3 center;
  double radius_mm = 0;
  int lung = 0;
};

Case gen_case(const PlanEntry& entry);

// Writes volumes/<id>.mhd, masks/<id>_nodule.mhd, annotations.csv, splits.csv.
std::vector<NoduleAnnotation> write_dataset(const Options& options, const std::filesystem::path& out_dir);

}  // namespace mhaff::phantom
