#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mhaff/annotations.hpp"
#include "mhaff/preprocess.hpp"
#include "mhaff/volume.hpp"

namespace mhaff::radiomics {

inline constexpr int kDefaultBins = 32;
inline constexpr double kShapeThresholdHU = -400.0;
inline constexpr double kCoarsenessCap = 1.0e6;

inline constexpr std::array<std::string_view, 7> kCategories{"firstorder", "shape", "glcm", "glrlm",
                                                            "glszm", "gldm", "ngtdm"};
inline constexpr std::array<std::string_view, 4> kRegions{"cube16", "cube32", "cube48", "lung"};

// Ordered (name, value) pairs; sentinel (NaN) marks an undefined value.
using Features = std::vector<std::pair<std::string, double>>;

// Masked 3D grid of HU values, x fastest.
struct Region {
  Dims3 dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};
  std::vector<double> values;
  std::vector<std::uint8_t> mask;

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + dims[0] * (y + dims[1] * z); }
  std::size_t voxel_count() const;
};

// Unmasked region, convenient for hand-built test images.
Region make_region(Dims3 dims, std::vector<double> values, Vec3 spacing = {1.0, 1.0, 1.0});
Region region_from_cube(const preprocess::NoduleCube& cube);
// Crops to the bounding box of the mask; an empty mask gives an empty region.
Region region_from_mask(const Volume& hu, const Volume& mask);

// Gray levels 1..bins inside the mask, 0 outside.
struct QuantizedRegion {
  Dims3 dims{0, 0, 0};
  std::vector<int> levels;
  int bins = kDefaultBins;
  double min = 0.0;
  double max = 0.0;
  std::size_t voxel_count = 0;

  bool inside(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return x >= 0 && y >= 0 && z >= 0 && static_cast<std::size_t>(x) < dims[0] &&
           static_cast<std::size_t>(y) < dims[1] && static_cast<std::size_t>(z) < dims[2] &&
           levels[static_cast<std::size_t>(x) + dims[0] * (static_cast<std::size_t>(y) + dims[1] * static_cast<std::size_t>(z))] > 0;
  }
  int level(std::size_t x, std::size_t y, std::size_t z) const { return levels[x + dims[0] * (y + dims[1] * z)]; }
};

// level = 1 + floor(bins * (v - min) / (max - min + eps)), capped at bins.
QuantizedRegion quantize(const Region& region, int bins = kDefaultBins);

using Offset = std::array<int, 3>;
// The 13 unique 3D neighbour directions (one of each +/- pair).
extern const std::array<Offset, 13> kDirections;

Features first_order(const Region& region, int bins = kDefaultBins);

// Shape of a binary mask over a grid with physical spacing.
Features shape_from_mask(const Dims3& dims, const std::vector<std::uint8_t>& mask, const Vec3& spacing);
// Pseudo-segmentation: voxels above `threshold`, largest 6-connected component.
Features shape_features(const Region& region, double threshold = kShapeThresholdHU);

// Per-direction matrices, exposed for inspection and tests.
using Matrix = std::vector<std::vector<double>>;
Matrix glcm_matrix(const QuantizedRegion& q, const Offset& offset);  // symmetric, raw counts
Matrix glrlm_matrix(const QuantizedRegion& q, const Offset& direction);  // [level-1][length-1]
Matrix glszm_matrix(const QuantizedRegion& q);  // [level-1][size-1], 26-connected zones
Matrix gldm_matrix(const QuantizedRegion& q);   // [level-1][dependence], dependence 0..26
int dependence_count(const QuantizedRegion& q, std::size_t x, std::size_t y, std::size_t z);

struct NgtdmTable {
  std::vector<double> count;  // n_i per level (index level-1)
  std::vector<double> s;      // s_i per level
  double valid_voxels = 0.0;
};
NgtdmTable ngtdm_table(const QuantizedRegion& q);

Features glcm_from_matrix(const Matrix& counts);
Features glrlm_from_matrix(const Matrix& runs, double voxel_count);

Features glcm_features(const QuantizedRegion& q);
Features glcm_features(const QuantizedRegion& q, const std::vector<Offset>& offsets);
Features glrlm_features(const QuantizedRegion& q);
Features glrlm_features(const QuantizedRegion& q, const std::vector<Offset>& directions);
Features glszm_features(const QuantizedRegion& q);
Features gldm_features(const QuantizedRegion& q);
Features ngtdm_features(const QuantizedRegion& q);

// Feature names of one family in output order, without region/category prefix.
const std::vector<std::string>& family_names(std::string_view category);
// All 304 column names: <region>_<category>_<feature>.
std::vector<std::string> all_feature_names();
// Category token of a full column name ("cube16_glcm_contrast" -> "glcm"); empty if malformed.
std::string category_of(std::string_view column);

// 76 features per region over cube16/32/48 and the lung mask (304 total).
// Families that fail produce sentinels; the vector is always complete.
Features extract_all(const Volume& hu, const NoduleAnnotation& annotation, const Volume& lung_mask,
                     int bins = kDefaultBins);

}  // namespace mhaff::radiomics
