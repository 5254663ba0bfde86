#include <algorithm>
#include <cmath>

#include "mhaff/error.hpp"
#include "mhaff/radiomics.hpp"

namespace mhaff::radiomics {

namespace {

// Nearest-rank percentile on sorted data: element ceil(p/100 * N), 1-based.
double nearest_rank(const std::vector<double>& sorted, double p) {
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

}  // namespace

Features first_order(const Region& region, int bins) {
  std::vector<double> v;
  v.reserve(region.values.size());
  for (std::size_t i = 0; i < region.values.size(); ++i) {
    if (region.mask[i]) v.push_back(region.values[i]);
  }
  if (v.empty()) throw Error(ErrorCode::kEmptyMask, "first-order features of an empty region");
  const auto n = static_cast<double>(v.size());

  double sum = 0.0, energy = 0.0;
  for (double x : v) {
    sum += x;
    energy += x * x;
  }
  const double mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0, mad = 0.0;
  for (double x : v) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
    mad += std::abs(d);
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  mad /= n;
  const double skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  const double kurtosis = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;

  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  const double p10 = nearest_rank(sorted, 10.0);
  const double p25 = nearest_rank(sorted, 25.0);
  const double p75 = nearest_rank(sorted, 75.0);
  const double p90 = nearest_rank(sorted, 90.0);

  double robust_sum = 0.0, robust_n = 0.0;
  for (double x : sorted) {
    if (x >= p10 && x <= p90) {
      robust_sum += x;
      robust_n += 1.0;
    }
  }
  const double robust_mean = robust_sum / robust_n;
  double robust_mad = 0.0;
  for (double x : sorted) {
    if (x >= p10 && x <= p90) robust_mad += std::abs(x - robust_mean);
  }
  robust_mad /= robust_n;

  const QuantizedRegion q = quantize(region, bins);
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  for (int level : q.levels) {
    if (level > 0) hist[static_cast<std::size_t>(level - 1)] += 1.0;
  }
  double entropy = 0.0, uniformity = 0.0;
  for (double h : hist) {
    if (h <= 0.0) continue;
    const double p = h / n;
    entropy -= p * std::log2(p);
    uniformity += p * p;
  }

  return {{"mean", mean},
          {"variance", m2},
          {"skewness", skewness},
          {"kurtosis", kurtosis},
          {"median", median},
          {"minimum", sorted.front()},
          {"maximum", sorted.back()},
          {"range", sorted.back() - sorted.front()},
          {"interquartile_range", p75 - p25},
          {"energy", energy},
          {"total_energy", energy * region.spacing[0] * region.spacing[1] * region.spacing[2]},
          {"entropy", entropy},
          {"mean_absolute_deviation", mad},
          {"robust_mean_absolute_deviation", robust_mad},
          {"root_mean_squared", std::sqrt(energy / n)},
          {"uniformity", uniformity},
          {"p10", p10},
          {"p90", p90}};
}

}  // namespace mhaff::radiomics
