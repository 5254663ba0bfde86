#include <algorithm>
#include <cmath>

#include "mhaff/error.hpp"
#include "mhaff/feature_table.hpp"
#include "mhaff/radiomics.hpp"

namespace mhaff::radiomics {

namespace {

using Idx = std::int64_t;

Features sentinels(std::string_view category) {
  Features out;
  for (const auto& name : family_names(category)) out.emplace_back(name, kSentinel);
  return out;
}

// Averages equally-named feature lists; the order of the first list is kept.
Features average(const std::vector<Features>& parts) {
  Features out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i)
    for (std::size_t f = 0; f < out.size(); ++f) out[f].second += parts[i][f].second;
  for (auto& [name, v] : out) v /= static_cast<double>(parts.size());
  return out;
}

std::vector<Offset> all_directions() { return {kDirections.begin(), kDirections.end()}; }

// Sum-of-weights helpers over a level x length style matrix (both 1-based in formulas).
struct Emphasis {
  double total = 0.0;
  double short_e = 0.0, long_e = 0.0, low_g = 0.0, high_g = 0.0;
  double short_low = 0.0, short_high = 0.0, long_low = 0.0, long_high = 0.0;
  double gln = 0.0, ln = 0.0, entropy = 0.0;
};

// `length_offset` is the 1-based value of column 0.
Emphasis emphasis(const Matrix& m, double length_offset) {
  Emphasis e;
  std::vector<double> per_length(m.empty() ? 0 : m.front().size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double g = static_cast<double>(i + 1);
    double row = 0.0;
    for (std::size_t j = 0; j < m[i].size(); ++j) {
      const double c = m[i][j];
      if (c == 0.0) continue;
      const double l = static_cast<double>(j) + length_offset;
      e.total += c;
      row += c;
      per_length[j] += c;
      e.short_e += c / (l * l);
      e.long_e += c * l * l;
      e.low_g += c / (g * g);
      e.high_g += c * g * g;
      e.short_low += c / (g * g * l * l);
      e.short_high += c * g * g / (l * l);
      e.long_low += c * l * l / (g * g);
      e.long_high += c * g * g * l * l;
    }
    e.gln += row * row;
  }
  for (double c : per_length) e.ln += c * c;
  for (const auto& row : m)
    for (double c : row)
      if (c > 0.0) {
        const double p = c / e.total;
        e.entropy -= p * std::log2(p);
      }
  return e;
}

// 26-neighbourhood offsets excluding the centre.
const std::vector<Offset>& neighbors26() {
  static const std::vector<Offset> kN = [] {
    std::vector<Offset> n;
    for (int z = -1; z <= 1; ++z)
      for (int y = -1; y <= 1; ++y)
        for (int x = -1; x <= 1; ++x)
          if (x || y || z) n.push_back({x, y, z});
    return n;
  }();
  return kN;
}

}  // namespace

Matrix glcm_matrix(const QuantizedRegion& q, const Offset& o) {
  const auto g = static_cast<std::size_t>(q.bins);
  Matrix m(g, std::vector<double>(g, 0.0));
  const auto& d = q.dims;
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        const int a = q.level(x, y, z);
        if (a == 0) continue;
        const Idx X = static_cast<Idx>(x) + o[0], Y = static_cast<Idx>(y) + o[1], Z = static_cast<Idx>(z) + o[2];
        if (!q.inside(X, Y, Z)) continue;
        const int b = q.level(static_cast<std::size_t>(X), static_cast<std::size_t>(Y), static_cast<std::size_t>(Z));
        m[a - 1][b - 1] += 1.0;
        m[b - 1][a - 1] += 1.0;
      }
  return m;
}

Features glcm_from_matrix(const Matrix& counts) {
  double total = 0.0;
  for (const auto& row : counts)
    for (double c : row) total += c;
  if (total <= 0.0) throw Error(ErrorCode::kNoValidPairs, "co-occurrence matrix is empty");
  const std::size_t g = counts.size();
  double mu_x = 0.0, mu_y = 0.0;
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t j = 0; j < g; ++j) {
      const double p = counts[i][j] / total;
      mu_x += (i + 1.0) * p;
      mu_y += (j + 1.0) * p;
    }
  double var_x = 0.0, var_y = 0.0, cross = 0.0;
  double contrast = 0.0, dissimilarity = 0.0, asm_ = 0.0, idm = 0.0, entropy = 0.0;
  double sum_average = 0.0, shade = 0.0, prominence = 0.0, max_p = 0.0;
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t j = 0; j < g; ++j) {
      const double p = counts[i][j] / total;
      if (p == 0.0) continue;
      const double a = i + 1.0, b = j + 1.0, diff = a - b;
      var_x += (a - mu_x) * (a - mu_x) * p;
      var_y += (b - mu_y) * (b - mu_y) * p;
      cross += (a - mu_x) * (b - mu_y) * p;
      contrast += diff * diff * p;
      dissimilarity += std::abs(diff) * p;
      asm_ += p * p;
      idm += p / (1.0 + diff * diff);
      entropy -= p * std::log2(p);
      sum_average += (a + b) * p;
      const double s = a + b - mu_x - mu_y;
      shade += s * s * s * p;
      prominence += s * s * s * s * p;
      max_p = std::max(max_p, p);
    }
  // Zero variance (a single gray level): correlation defined as 1.
  const double correlation = (var_x > 0.0 && var_y > 0.0) ? cross / std::sqrt(var_x * var_y) : 1.0;
  return {{"contrast", contrast},       {"dissimilarity", dissimilarity}, {"angular_second_moment", asm_},
          {"inverse_difference_moment", idm}, {"correlation", correlation},     {"entropy", entropy},
          {"sum_average", sum_average}, {"cluster_shade", shade},         {"cluster_prominence", prominence},
          {"maximum_probability", max_p}};
}

Features glcm_features(const QuantizedRegion& q) { return glcm_features(q, all_directions()); }

Features glcm_features(const QuantizedRegion& q, const std::vector<Offset>& offsets) {
  std::vector<Features> parts;
  for (const auto& o : offsets) {
    const Matrix m = glcm_matrix(q, o);
    bool any = false;
    for (const auto& row : m)
      for (double c : row) any = any || c > 0.0;
    if (any) parts.push_back(glcm_from_matrix(m));
  }
  if (parts.empty()) return sentinels("glcm");
  return average(parts);
}

Matrix glrlm_matrix(const QuantizedRegion& q, const Offset& o) {
  const auto& d = q.dims;
  const std::size_t max_len = std::max({d[0], d[1], d[2]});
  Matrix m(static_cast<std::size_t>(q.bins), std::vector<double>(max_len, 0.0));
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        const int a = q.level(x, y, z);
        if (a == 0) continue;
        Idx X = static_cast<Idx>(x), Y = static_cast<Idx>(y), Z = static_cast<Idx>(z);
        // Only start a run where the previous voxel along the direction differs.
        if (q.inside(X - o[0], Y - o[1], Z - o[2]) &&
            q.level(static_cast<std::size_t>(X - o[0]), static_cast<std::size_t>(Y - o[1]),
                    static_cast<std::size_t>(Z - o[2])) == a)
          continue;
        std::size_t len = 0;
        while (q.inside(X, Y, Z) &&
               q.level(static_cast<std::size_t>(X), static_cast<std::size_t>(Y), static_cast<std::size_t>(Z)) == a) {
          ++len;
          X += o[0];
          Y += o[1];
          Z += o[2];
        }
        m[static_cast<std::size_t>(a - 1)][len - 1] += 1.0;
      }
  return m;
}

Features glrlm_from_matrix(const Matrix& runs, double voxel_count) {
  const Emphasis e = emphasis(runs, 1.0);
  if (e.total <= 0.0) throw Error(ErrorCode::kEmptyMask, "run-length matrix is empty");
  const double n = e.total;
  return {{"short_run_emphasis", e.short_e / n},
          {"long_run_emphasis", e.long_e / n},
          {"gray_level_nonuniformity", e.gln / n},
          {"run_length_nonuniformity", e.ln / n},
          {"run_percentage", n / voxel_count},
          {"low_gray_level_run_emphasis", e.low_g / n},
          {"high_gray_level_run_emphasis", e.high_g / n},
          {"short_run_low_gray_level_emphasis", e.short_low / n},
          {"short_run_high_gray_level_emphasis", e.short_high / n},
          {"long_run_low_gray_level_emphasis", e.long_low / n},
          {"long_run_high_gray_level_emphasis", e.long_high / n}};
}

Features glrlm_features(const QuantizedRegion& q) { return glrlm_features(q, all_directions()); }

Features glrlm_features(const QuantizedRegion& q, const std::vector<Offset>& directions) {
  if (q.voxel_count == 0) throw Error(ErrorCode::kEmptyMask, "run-length features of an empty region");
  std::vector<Features> parts;
  for (const auto& o : directions) parts.push_back(glrlm_from_matrix(glrlm_matrix(q, o), static_cast<double>(q.voxel_count)));
  return average(parts);
}

Matrix glszm_matrix(const QuantizedRegion& q) {
  const auto& d = q.dims;
  std::vector<std::uint8_t> seen(q.levels.size(), 0);
  std::vector<std::pair<int, std::size_t>> zones;
  std::vector<std::size_t> stack;
  std::size_t largest = 1;
  for (std::size_t start = 0; start < q.levels.size(); ++start) {
    const int a = q.levels[start];
    if (a == 0 || seen[start]) continue;
    seen[start] = 1;
    stack.assign(1, start);
    std::size_t size = 0;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++size;
      const auto x = static_cast<Idx>(i % d[0]), y = static_cast<Idx>((i / d[0]) % d[1]),
                 z = static_cast<Idx>(i / (d[0] * d[1]));
      for (const auto& o : neighbors26()) {
        const Idx X = x + o[0], Y = y + o[1], Z = z + o[2];
        if (!q.inside(X, Y, Z)) continue;
        const std::size_t j = static_cast<std::size_t>(X) + d[0] * (static_cast<std::size_t>(Y) + d[1] * static_cast<std::size_t>(Z));
        if (!seen[j] && q.levels[j] == a) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
    zones.emplace_back(a, size);
    largest = std::max(largest, size);
  }
  Matrix m(static_cast<std::size_t>(q.bins), std::vector<double>(largest, 0.0));
  for (const auto& [level, size] : zones) m[static_cast<std::size_t>(level - 1)][size - 1] += 1.0;
  return m;
}

Features glszm_features(const QuantizedRegion& q) {
  if (q.voxel_count == 0) throw Error(ErrorCode::kEmptyMask, "size-zone features of an empty region");
  const Emphasis e = emphasis(glszm_matrix(q), 1.0);
  const double n = e.total;
  return {{"small_area_emphasis", e.short_e / n},
          {"large_area_emphasis", e.long_e / n},
          {"gray_level_nonuniformity", e.gln / n},
          {"size_zone_nonuniformity", e.ln / n},
          {"zone_percentage", n / static_cast<double>(q.voxel_count)},
          {"low_gray_level_zone_emphasis", e.low_g / n},
          {"high_gray_level_zone_emphasis", e.high_g / n},
          {"small_area_low_gray_level_emphasis", e.short_low / n},
          {"small_area_high_gray_level_emphasis", e.short_high / n},
          {"large_area_low_gray_level_emphasis", e.long_low / n},
          {"large_area_high_gray_level_emphasis", e.long_high / n}};
}

int dependence_count(const QuantizedRegion& q, std::size_t x, std::size_t y, std::size_t z) {
  const int a = q.level(x, y, z);
  int count = 0;
  for (const auto& o : neighbors26()) {
    const Idx X = static_cast<Idx>(x) + o[0], Y = static_cast<Idx>(y) + o[1], Z = static_cast<Idx>(z) + o[2];
    if (q.inside(X, Y, Z) &&
        q.level(static_cast<std::size_t>(X), static_cast<std::size_t>(Y), static_cast<std::size_t>(Z)) == a)
      ++count;
  }
  return count;
}

Matrix gldm_matrix(const QuantizedRegion& q) {
  Matrix m(static_cast<std::size_t>(q.bins), std::vector<double>(27, 0.0));
  const auto& d = q.dims;
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        const int a = q.level(x, y, z);
        if (a == 0) continue;
        m[static_cast<std::size_t>(a - 1)][static_cast<std::size_t>(dependence_count(q, x, y, z))] += 1.0;
      }
  return m;
}

Features gldm_features(const QuantizedRegion& q) {
  if (q.voxel_count == 0) throw Error(ErrorCode::kEmptyMask, "dependence features of an empty region");
  // Column j holds dependence j, i.e. 1-based index j + 1.
  const Emphasis e = emphasis(gldm_matrix(q), 1.0);
  const double n = e.total;
  return {{"small_dependence_emphasis", e.short_e / n},
          {"large_dependence_emphasis", e.long_e / n},
          {"gray_level_nonuniformity", e.gln / n},
          {"dependence_nonuniformity", e.ln / n},
          {"dependence_entropy", e.entropy},
          {"low_gray_level_emphasis", e.low_g / n},
          {"high_gray_level_emphasis", e.high_g / n},
          {"small_dependence_low_gray_level_emphasis", e.short_low / n},
          {"small_dependence_high_gray_level_emphasis", e.short_high / n},
          {"large_dependence_low_gray_level_emphasis", e.long_low / n},
          {"large_dependence_high_gray_level_emphasis", e.long_high / n}};
}

NgtdmTable ngtdm_table(const QuantizedRegion& q) {
  NgtdmTable t;
  t.count.assign(static_cast<std::size_t>(q.bins), 0.0);
  t.s.assign(static_cast<std::size_t>(q.bins), 0.0);
  const auto& d = q.dims;
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        const int a = q.level(x, y, z);
        if (a == 0) continue;
        double sum = 0.0;
        int n = 0;
        for (const auto& o : neighbors26()) {
          const Idx X = static_cast<Idx>(x) + o[0], Y = static_cast<Idx>(y) + o[1], Z = static_cast<Idx>(z) + o[2];
          if (!q.inside(X, Y, Z)) continue;
          sum += q.level(static_cast<std::size_t>(X), static_cast<std::size_t>(Y), static_cast<std::size_t>(Z));
          ++n;
        }
        if (n == 0) continue;
        const auto i = static_cast<std::size_t>(a - 1);
        t.count[i] += 1.0;
        t.s[i] += std::abs(a - sum / n);
        t.valid_voxels += 1.0;
      }
  return t;
}

Features ngtdm_features(const QuantizedRegion& q) {
  if (q.voxel_count == 0) throw Error(ErrorCode::kEmptyMask, "NGTDM features of an empty region");
  const NgtdmTable t = ngtdm_table(q);
  if (t.valid_voxels == 0.0) return sentinels("ngtdm");
  const std::size_t g = t.count.size();
  std::vector<double> p(g);
  double ps = 0.0, s_total = 0.0;
  std::size_t present = 0;
  for (std::size_t i = 0; i < g; ++i) {
    p[i] = t.count[i] / t.valid_voxels;
    ps += p[i] * t.s[i];
    s_total += t.s[i];
    if (p[i] > 0.0) ++present;
  }
  const double coarseness = ps > 0.0 ? 1.0 / ps : kCoarsenessCap;
  double contrast = 0.0, busy_den = 0.0, complexity = 0.0, strength_num = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    if (p[i] == 0.0) continue;
    for (std::size_t j = 0; j < g; ++j) {
      if (p[j] == 0.0) continue;
      const double a = i + 1.0, b = j + 1.0;
      contrast += p[i] * p[j] * (a - b) * (a - b);
      busy_den += std::abs(a * p[i] - b * p[j]);
      complexity += std::abs(a - b) * (p[i] * t.s[i] + p[j] * t.s[j]) / (p[i] + p[j]);
      strength_num += (p[i] + p[j]) * (a - b) * (a - b);
    }
  }
  const auto ng = static_cast<double>(present);
  contrast = present > 1 ? contrast / (ng * (ng - 1.0)) * (s_total / t.valid_voxels) : 0.0;
  const double busyness = (present > 1 && busy_den > 0.0) ? ps / busy_den : 0.0;
  complexity /= t.valid_voxels;
  const double strength = s_total > 0.0 ? strength_num / s_total : 0.0;
  return {{"coarseness", coarseness},
          {"contrast", contrast},
          {"busyness", busyness},
          {"complexity", complexity},
          {"strength", strength}};
}

}  // namespace mhaff::radiomics
