#include <algorithm>
#include <cmath>
#include <map>

#include "mhaff/error.hpp"
#include "mhaff/feature_table.hpp"
#include "mhaff/radiomics.hpp"

namespace mhaff::radiomics {

const std::array<Offset, 13> kDirections{{{1, 0, 0},
                                          {0, 1, 0},
                                          {0, 0, 1},
                                          {1, 1, 0},
                                          {1, -1, 0},
                                          {1, 0, 1},
                                          {1, 0, -1},
                                          {0, 1, 1},
                                          {0, 1, -1},
                                          {1, 1, 1},
                                          {1, 1, -1},
                                          {1, -1, 1},
                                          {1, -1, -1}}};

std::size_t Region::voxel_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

Region make_region(Dims3 dims, std::vector<double> values, Vec3 spacing) {
  if (values.size() != dims[0] * dims[1] * dims[2]) {
    throw Error(ErrorCode::kShapeMismatch, "region values do not match dims");
  }
  Region r;
  r.dims = dims;
  r.spacing = spacing;
  r.values = std::move(values);
  r.mask.assign(r.values.size(), 1);
  return r;
}

Region region_from_cube(const preprocess::NoduleCube& cube) {
  std::vector<double> values(cube.values.begin(), cube.values.end());
  return make_region({cube.side, cube.side, cube.side}, std::move(values), cube.spacing);
}

Region region_from_mask(const Volume& hu, const Volume& mask) {
  if (hu.dims() != mask.dims()) throw Error(ErrorCode::kShapeMismatch, "mask and volume dims differ");
  const auto& d = hu.dims();
  std::array<std::size_t, 3> lo{d[0], d[1], d[2]}, hi{0, 0, 0};
  bool any = false;
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        if (mask.at(x, y, z) < 0.5f) continue;
        any = true;
        lo = {std::min(lo[0], x), std::min(lo[1], y), std::min(lo[2], z)};
        hi = {std::max(hi[0], x), std::max(hi[1], y), std::max(hi[2], z)};
      }
  Region r;
  r.spacing = hu.spacing();
  if (!any) return r;
  r.dims = {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1};
  const std::size_t n = r.dims[0] * r.dims[1] * r.dims[2];
  r.values.resize(n);
  r.mask.resize(n);
  for (std::size_t z = 0; z < r.dims[2]; ++z)
    for (std::size_t y = 0; y < r.dims[1]; ++y)
      for (std::size_t x = 0; x < r.dims[0]; ++x) {
        const std::size_t i = r.index(x, y, z);
        r.values[i] = hu.at(x + lo[0], y + lo[1], z + lo[2]);
        r.mask[i] = mask.at(x + lo[0], y + lo[1], z + lo[2]) >= 0.5f ? 1 : 0;
      }
  return r;
}

QuantizedRegion quantize(const Region& region, int bins) {
  if (bins < 1) throw Error(ErrorCode::kInvalidValue, "bin count must be >= 1");
  QuantizedRegion q;
  q.dims = region.dims;
  q.bins = bins;
  q.levels.assign(region.values.size(), 0);
  bool any = false;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < region.values.size(); ++i) {
    if (!region.mask[i]) continue;
    const double v = region.values[i];
    lo = any ? std::min(lo, v) : v;
    hi = any ? std::max(hi, v) : v;
    any = true;
  }
  if (!any) throw Error(ErrorCode::kEmptyMask, "cannot quantize an empty region");
  q.min = lo;
  q.max = hi;
  constexpr double kEps = 1e-9;
  for (std::size_t i = 0; i < region.values.size(); ++i) {
    if (!region.mask[i]) continue;
    ++q.voxel_count;
    if (hi == lo) {
      q.levels[i] = 1;
      continue;
    }
    const double scaled = bins * (region.values[i] - lo) / (hi - lo + kEps);
    q.levels[i] = std::min(bins, 1 + static_cast<int>(std::floor(scaled)));
  }
  return q;
}

const std::vector<std::string>& family_names(std::string_view category) {
  static const std::map<std::string, std::vector<std::string>, std::less<>> kNames{
      {"firstorder",
       {"mean", "variance", "skewness", "kurtosis", "median", "minimum", "maximum", "range", "interquartile_range",
        "energy", "total_energy", "entropy", "mean_absolute_deviation", "robust_mean_absolute_deviation",
        "root_mean_squared", "uniformity", "p10", "p90"}},
      {"shape",
       {"volume", "surface_area", "surface_volume_ratio", "sphericity", "compactness", "maximum_3d_diameter",
        "major_axis_length", "minor_axis_length", "elongation", "flatness"}},
      {"glcm",
       {"contrast", "dissimilarity", "angular_second_moment", "inverse_difference_moment", "correlation", "entropy",
        "sum_average", "cluster_shade", "cluster_prominence", "maximum_probability"}},
      {"glrlm",
       {"short_run_emphasis", "long_run_emphasis", "gray_level_nonuniformity", "run_length_nonuniformity",
        "run_percentage", "low_gray_level_run_emphasis", "high_gray_level_run_emphasis",
        "short_run_low_gray_level_emphasis", "short_run_high_gray_level_emphasis",
        "long_run_low_gray_level_emphasis", "long_run_high_gray_level_emphasis"}},
      {"glszm",
       {"small_area_emphasis", "large_area_emphasis", "gray_level_nonuniformity", "size_zone_nonuniformity",
        "zone_percentage", "low_gray_level_zone_emphasis", "high_gray_level_zone_emphasis",
        "small_area_low_gray_level_emphasis", "small_area_high_gray_level_emphasis",
        "large_area_low_gray_level_emphasis", "large_area_high_gray_level_emphasis"}},
      {"gldm",
       {"small_dependence_emphasis", "large_dependence_emphasis", "gray_level_nonuniformity",
        "dependence_nonuniformity", "dependence_entropy", "low_gray_level_emphasis", "high_gray_level_emphasis",
        "small_dependence_low_gray_level_emphasis", "small_dependence_high_gray_level_emphasis",
        "large_dependence_low_gray_level_emphasis", "large_dependence_high_gray_level_emphasis"}},
      {"ngtdm", {"coarseness", "contrast", "busyness", "complexity", "strength"}},
  };
  const auto it = kNames.find(category);
  if (it == kNames.end()) throw Error(ErrorCode::kInvalidValue, "unknown feature category " + std::string(category));
  return it->second;
}

std::vector<std::string> all_feature_names() {
  std::vector<std::string> names;
  for (auto region : kRegions)
    for (auto category : kCategories)
      for (const auto& f : family_names(category))
        names.push_back(std::string(region) + "_" + std::string(category) + "_" + f);
  return names;
}

std::string category_of(std::string_view column) {
  const auto first = column.find('_');
  if (first == std::string_view::npos) return {};
  const auto second = column.find('_', first + 1);
  if (second == std::string_view::npos) return {};
  const auto cat = column.substr(first + 1, second - first - 1);
  for (auto c : kCategories) {
    if (c == cat) return std::string(cat);
  }
  return {};
}

namespace {

Features sentinel_family(std::string_view category) {
  Features out;
  for (const auto& name : family_names(category)) out.emplace_back(name, kSentinel);
  return out;
}

void append(Features& out, std::string_view region, std::string_view category, const Features& family) {
  for (const auto& [name, value] : family) {
    out.emplace_back(std::string(region) + "_" + std::string(category) + "_" + name, value);
  }
}

Features region_features(const Region& region, int bins, bool shape_from_mask_directly, std::string_view name) {
  Features out;
  if (region.voxel_count() == 0) {
    for (auto c : kCategories) append(out, name, c, sentinel_family(c));
    return out;
  }
  const QuantizedRegion q = quantize(region, bins);
  append(out, name, "firstorder", first_order(region, bins));
  append(out, name, "shape",
         shape_from_mask_directly ? shape_from_mask(region.dims, region.mask, region.spacing) : shape_features(region));
  append(out, name, "glcm", glcm_features(q));
  append(out, name, "glrlm", glrlm_features(q));
  append(out, name, "glszm", glszm_features(q));
  append(out, name, "gldm", gldm_features(q));
  append(out, name, "ngtdm", ngtdm_features(q));
  return out;
}

}  // namespace

Features extract_all(const Volume& hu, const NoduleAnnotation& annotation, const Volume& lung_mask, int bins) {
  Features out;
  const auto cubes = preprocess::extract_cubes(hu, annotation.center);
  for (std::size_t c = 0; c < cubes.size(); ++c) {
    const auto part = region_features(region_from_cube(cubes[c]), bins, false, kRegions[c]);
    out.insert(out.end(), part.begin(), part.end());
  }
  const auto lung = region_features(region_from_mask(hu, lung_mask), bins, true, kRegions[3]);
  out.insert(out.end(), lung.begin(), lung.end());
  return out;
}

}  // namespace mhaff::radiomics
