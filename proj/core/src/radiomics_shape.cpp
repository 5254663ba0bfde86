#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "mhaff/feature_table.hpp"
#include "mhaff/radiomics.hpp"

namespace mhaff::radiomics {

namespace {

Features shape_sentinels() {
  Features out;
  for (const auto& name : family_names("shape")) out.emplace_back(name, kSentinel);
  return out;
}

// Vertices of the convex hull are extreme along every axis-aligned line through
// them, so only voxels that are first/last in their x-row, y-column and
// z-column can realise the maximum pairwise distance.
std::vector<std::array<double, 3>> diameter_candidates(const Dims3& d, const std::vector<std::uint8_t>& mask,
                                                       const Vec3& sp) {
  auto at = [&](std::size_t x, std::size_t y, std::size_t z) { return mask[x + d[0] * (y + d[1] * z)] != 0; };
  std::vector<std::uint8_t> extreme(mask.size(), 0);
  // Bit 0: x-row extreme, bit 1: y-column extreme, bit 2: z-column extreme.
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y) {
      std::size_t first = d[0], last = 0;
      for (std::size_t x = 0; x < d[0]; ++x)
        if (at(x, y, z)) {
          first = std::min(first, x);
          last = x;
        }
      if (first < d[0]) {
        extreme[first + d[0] * (y + d[1] * z)] |= 1;
        extreme[last + d[0] * (y + d[1] * z)] |= 1;
      }
    }
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t x = 0; x < d[0]; ++x) {
      std::size_t first = d[1], last = 0;
      for (std::size_t y = 0; y < d[1]; ++y)
        if (at(x, y, z)) {
          first = std::min(first, y);
          last = y;
        }
      if (first < d[1]) {
        extreme[x + d[0] * (first + d[1] * z)] |= 2;
        extreme[x + d[0] * (last + d[1] * z)] |= 2;
      }
    }
  for (std::size_t y = 0; y < d[1]; ++y)
    for (std::size_t x = 0; x < d[0]; ++x) {
      std::size_t first = d[2], last = 0;
      for (std::size_t z = 0; z < d[2]; ++z)
        if (at(x, y, z)) {
          first = std::min(first, z);
          last = z;
        }
      if (first < d[2]) {
        extreme[x + d[0] * (y + d[1] * first)] |= 4;
        extreme[x + d[0] * (y + d[1] * last)] |= 4;
      }
    }
  std::vector<std::array<double, 3>> pts;
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x)
        if (extreme[x + d[0] * (y + d[1] * z)] == 7) pts.push_back({x * sp[0], y * sp[1], z * sp[2]});
  return pts;
}

}  // namespace

Features shape_from_mask(const Dims3& d, const std::vector<std::uint8_t>& mask, const Vec3& sp) {
  std::size_t count = 0;
  double faces_x = 0.0, faces_y = 0.0, faces_z = 0.0;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  auto inside = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    if (x < 0 || y < 0 || z < 0 || x >= static_cast<std::int64_t>(d[0]) || y >= static_cast<std::int64_t>(d[1]) ||
        z >= static_cast<std::int64_t>(d[2]))
      return false;
    return mask[static_cast<std::size_t>(x) + d[0] * (static_cast<std::size_t>(y) + d[1] * static_cast<std::size_t>(z))] != 0;
  };
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        if (!mask[x + d[0] * (y + d[1] * z)]) continue;
        ++count;
        const auto X = static_cast<std::int64_t>(x), Y = static_cast<std::int64_t>(y), Z = static_cast<std::int64_t>(z);
        faces_x += !inside(X - 1, Y, Z) + !inside(X + 1, Y, Z);
        faces_y += !inside(X, Y - 1, Z) + !inside(X, Y + 1, Z);
        faces_z += !inside(X, Y, Z - 1) + !inside(X, Y, Z + 1);
        sum += Eigen::Vector3d(x * sp[0], y * sp[1], z * sp[2]);
      }
  if (count == 0) return shape_sentinels();

  const double n = static_cast<double>(count);
  const double volume = n * sp[0] * sp[1] * sp[2];
  const double area = faces_x * sp[1] * sp[2] + faces_y * sp[0] * sp[2] + faces_z * sp[0] * sp[1];
  const double sphericity = std::cbrt(std::numbers::pi) * std::pow(6.0 * volume, 2.0 / 3.0) / area;
  const double compactness = volume / (std::sqrt(std::numbers::pi) * std::pow(area, 1.5));

  const Eigen::Vector3d mean = sum / n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        if (!mask[x + d[0] * (y + d[1] * z)]) continue;
        const Eigen::Vector3d p = Eigen::Vector3d(x * sp[0], y * sp[1], z * sp[2]) - mean;
        cov += p * p.transpose();
      }
  cov /= n;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov, Eigen::EigenvaluesOnly);
  // Ascending order; clamp tiny negative round-off.
  const double l3 = std::max(0.0, solver.eigenvalues()[0]);
  const double l2 = std::max(0.0, solver.eigenvalues()[1]);
  const double l1 = std::max(0.0, solver.eigenvalues()[2]);

  const auto pts = diameter_candidates(d, mask, sp);
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dx = pts[i][0] - pts[j][0], dy = pts[i][1] - pts[j][1], dz = pts[i][2] - pts[j][2];
      best = std::max(best, dx * dx + dy * dy + dz * dz);
    }

  return {{"volume", volume},
          {"surface_area", area},
          {"surface_volume_ratio", area / volume},
          {"sphericity", sphericity},
          {"compactness", compactness},
          {"maximum_3d_diameter", std::sqrt(best)},
          {"major_axis_length", 4.0 * std::sqrt(l1)},
          {"minor_axis_length", 4.0 * std::sqrt(l2)},
          {"elongation", l1 > 0.0 ? std::sqrt(l2 / l1) : kSentinel},
          {"flatness", l1 > 0.0 ? std::sqrt(l3 / l1) : kSentinel}};
}

Features shape_features(const Region& region, double threshold) {
  const auto& d = region.dims;
  std::vector<std::int32_t> label(region.values.size(), -1);
  std::vector<std::size_t> queue;
  std::int32_t best_label = -1;
  std::size_t best_size = 0;
  std::int32_t next = 0;
  auto fg = [&](std::size_t i) { return region.mask[i] && region.values[i] > threshold; };
  for (std::size_t start = 0; start < label.size(); ++start) {
    if (label[start] >= 0 || !fg(start)) continue;
    const std::int32_t id = next++;
    label[start] = id;
    queue.assign(1, start);
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t i = queue[head];
      const std::size_t x = i % d[0], y = (i / d[0]) % d[1], z = i / (d[0] * d[1]);
      auto visit = [&](bool ok, std::size_t j) {
        if (ok && label[j] < 0 && fg(j)) {
          label[j] = id;
          queue.push_back(j);
        }
      };
      visit(x > 0, i - 1);
      visit(x + 1 < d[0], i + 1);
      visit(y > 0, i - d[0]);
      visit(y + 1 < d[1], i + d[0]);
      visit(z > 0, i - d[0] * d[1]);
      visit(z + 1 < d[2], i + d[0] * d[1]);
    }
    if (queue.size() > best_size) {
      best_size = queue.size();
      best_label = id;
    }
  }
  if (best_label < 0) return shape_sentinels();
  std::vector<std::uint8_t> mask(label.size(), 0);
  for (std::size_t i = 0; i < label.size(); ++i) mask[i] = label[i] == best_label;
  return shape_from_mask(d, mask, region.spacing);
}

}  // namespace mhaff::radiomics
