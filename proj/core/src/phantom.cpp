#include "mhaff/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mhaff/error.hpp"

namespace mhaff::phantom {

namespace {

constexpr float kAirHU = -1000.0f;

// Standard normal from one Philox block (Box-Muller on two 64-bit uniforms).
double philox_normal(PhiloxKey key, std::uint64_t index, std::uint32_t stream) {
  const auto r = philox4x32_10({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), stream, 0}, key);
  const double u1 = u32_to_open_unit(r[0], r[1]);
  const double u2 = u32_to_open_unit(r[2], r[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

PhiloxKey key_from(std::uint64_t v) { return {static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v >> 32)}; }

std::string patient_name(std::size_t i) {
  std::string s = std::to_string(i);
  return "PH" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

}  // namespace

bool Ellipsoid::contains(double x, double y, double z, double margin) const {
  const double dx = (x - center[0]) / (semi_axes[0] - margin);
  const double dy = (y - center[1]) / (semi_axes[1] - margin);
  const double dz = (z - center[2]) / (semi_axes[2] - margin);
  return dx * dx + dy * dy + dz * dz <= 1.0;
}

std::array<Ellipsoid, 2> lung_ellipsoids() {
  return {Ellipsoid{{23.5, 47.5, 47.5}, {20.5, 30.0, 42.0}}, Ellipsoid{{71.5, 47.5, 47.5}, {20.5, 30.0, 42.0}}};
}

NodulePatch gen_nodule(int recipe, double radius_mm, double spacing, Rng& rng) {
  if (recipe < 0 || recipe >= kRecipes) throw Error(ErrorCode::kUnknownClass, "nodule recipe " + std::to_string(recipe));
  const double r = radius_mm / spacing;
  NodulePatch p;
  p.semi_axes = {r, r * rng.uniform(0.8, 1.0), r * rng.uniform(0.8, 1.0)};
  const bool spiculated = recipe == 2;
  p.half = static_cast<std::int64_t>(std::ceil(r)) + (spiculated ? 6 : 1);
  const std::size_t n = p.side() * p.side() * p.side();
  p.hu.assign(n, std::nanf(""));
  p.mask.assign(n, 0);
  const PhiloxKey key = key_from(rng.next_u64());
  const double sigma = spiculated ? 80.0 : 20.0;
  const auto set = [&](std::int64_t x, std::int64_t y, std::int64_t z, double base) {
    const std::size_t i = p.index(x, y, z);
    p.mask[i] = 1;
    p.hu[i] = static_cast<float>(std::round(base + sigma * philox_normal(key, i, 1)));
  };
  for (std::int64_t z = -p.half; z <= p.half; ++z)
    for (std::int64_t y = -p.half; y <= p.half; ++y)
      for (std::int64_t x = -p.half; x <= p.half; ++x) {
        const double ex = x / p.semi_axes[0], ey = y / p.semi_axes[1], ez = z / p.semi_axes[2];
        const double rho = std::sqrt(ex * ex + ey * ey + ez * ez);
        if (rho > 1.0) continue;
        double base = -600.0;
        if (recipe == 1 && rho <= 0.5) base = -100.0;
        if (recipe == 2) base = 20.0;
        set(x, y, z, base);
      }
  if (spiculated) {
    const auto rays = rng.uniform_int(6, 10);
    for (std::int64_t s = 0; s < rays; ++s) {
      // Uniform direction on the sphere.
      const double cz = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double sz = std::sqrt(1.0 - cz * cz);
      const double dir[3] = {sz * std::cos(phi), sz * std::sin(phi), cz};
      const double length = rng.uniform(2.0, 5.0);
      // Distance to the ellipsoid surface along dir.
      double inv = 0;
      for (int a = 0; a < 3; ++a) inv += (dir[a] / p.semi_axes[a]) * (dir[a] / p.semi_axes[a]);
      const double surface = 1.0 / std::sqrt(inv);
      for (double t = 0.5 * surface; t <= surface + length; t += 0.25) {
        const auto x = static_cast<std::int64_t>(std::lround(t * dir[0]));
        const auto y = static_cast<std::int64_t>(std::lround(t * dir[1]));
        const auto z = static_cast<std::int64_t>(std::lround(t * dir[2]));
        if (std::max({std::abs(x), std::abs(y), std::abs(z)}) > p.half) break;
        if (!p.mask[p.index(x, y, z)]) set(x, y, z, 20.0);
      }
    }
  }
  return p;
}

std::vector<PlanEntry> plan_dataset(const Options& o) {
  if (o.count_per_class < 1) throw Error(ErrorCode::kInvalidValue, "count per class must be >= 1");
  if (o.classes != 2 && o.classes != 3) throw Error(ErrorCode::kInvalidValue, "classes must be 2 or 3");
  const std::size_t total = o.count_per_class * o.classes;
  const std::size_t holdout = total / 5;
  std::vector<PlanEntry> plan;
  Rng rng(hash_seed({o.seed, 0x5e1}));
  // Patient numbers are a seeded permutation so identifiers carry no class information.
  std::vector<std::size_t> ids(total);
  for (std::size_t i = 0; i < total; ++i) ids[i] = i;
  for (std::size_t i = total; i > 1; --i) std::swap(ids[i - 1], ids[static_cast<std::size_t>(rng.uniform_int(0, i - 1))]);
  for (std::size_t i = 0; i < o.count_per_class; ++i)
    for (std::size_t c = 0; c < o.classes; ++c) {
      const std::size_t pos = plan.size();
      PlanEntry e;
      e.patient_id = patient_name(ids[pos]);
      e.label = static_cast<int>(c);
      e.recipe = o.classes == 2 ? (c == 0 ? 0 : 2) : static_cast<int>(c);
      e.split = pos < holdout ? Split::kVal : pos < 2 * holdout ? Split::kTest : Split::kTrain;
      e.seed = hash_seed({o.seed, c, i});
      plan.push_back(e);
    }
  std::sort(plan.begin(), plan.end(), [](const PlanEntry& a, const PlanEntry& b) { return a.patient_id < b.patient_id; });
  return plan;
}

Case gen_case(const PlanEntry& entry) {
  Case out;
  out.entry = entry;
  Rng rng(entry.seed);
  const Dims3 dims{kSide, kSide, kSide};
  const Vec3 spacing{kSpacing, kSpacing, kSpacing};
  out.hu = Volume(dims, spacing, {0, 0, 0}, kAirHU);
  out.mask = Volume(dims, spacing, {0, 0, 0}, 0.0f);
  const auto lungs = lung_ellipsoids();
  const PhiloxKey key = key_from(rng.next_u64());
  const double body_r = kSide / 2.0;
  for (std::size_t z = 0; z < kSide; ++z)
    for (std::size_t y = 0; y < kSide; ++y)
      for (std::size_t x = 0; x < kSide; ++x) {
        const double dx = x - (body_r - 0.5), dy = y - (body_r - 0.5);
        if (dx * dx + dy * dy > body_r * body_r) continue;
        const std::size_t i = out.hu.index(x, y, z);
        float v = kBodyHU;
        if (lungs[0].contains(x, y, z) || lungs[1].contains(x, y, z)) {
          v = static_cast<float>(std::round(kLungHU + kLungNoise * philox_normal(key, i, 0)));
        }
        out.hu.voxels()[i] = v;
      }

  out.radius_mm = rng.uniform(kMinRadiusMm, kMaxRadiusMm);
  out.lung = static_cast<int>(rng.uniform_int(0, 1));
  const auto patch = gen_nodule(entry.recipe, out.radius_mm, kSpacing, rng);
  const Ellipsoid& lung = lungs[static_cast<std::size_t>(out.lung)];
  // Jitter the centre while keeping the whole patch footprint one voxel inside the lung.
  const double reach = static_cast<double>(patch.half) + 2.0;
  const double slack = std::max(0.0, std::min({lung.semi_axes[0], lung.semi_axes[1], lung.semi_axes[2]}) - reach);
  const double jitter = rng.uniform(0.0, 1.0) * slack / std::sqrt(3.0);
  const double jx = rng.uniform(-1.0, 1.0) * jitter, jy = rng.uniform(-1.0, 1.0) * jitter, jz = rng.uniform(-1.0, 1.0) * jitter;
  out.center = {static_cast<std::int64_t>(std::lround(lung.center[0] + jx)), static_cast<std::int64_t>(std::lround(lung.center[1] + jy)),
                static_cast<std::int64_t>(std::lround(lung.center[2] + jz))};
  for (std::int64_t z = -patch.half; z <= patch.half; ++z)
    for (std::int64_t y = -patch.half; y <= patch.half; ++y)
      for (std::int64_t x = -patch.half; x <= patch.half; ++x) {
        const std::size_t pi = patch.index(x, y, z);
        if (!patch.mask[pi]) continue;
        const std::int64_t gx = out.center.x + x, gy = out.center.y + y, gz = out.center.z + z;
        if (!lung.contains(static_cast<double>(gx), static_cast<double>(gy), static_cast<double>(gz), 1.0)) continue;
        const auto i = out.hu.index(static_cast<std::size_t>(gx), static_cast<std::size_t>(gy), static_cast<std::size_t>(gz));
        out.hu.voxels()[i] = patch.hu[pi];
        out.mask.voxels()[i] = 1.0f;
      }
  return out;
}

std::vector<NoduleAnnotation> write_dataset(const Options& options, const std::filesystem::path& out_dir) {
  const auto plan = plan_dataset(options);
  std::vector<NoduleAnnotation> annotations;
  std::vector<SplitEntry> splits;
  for (const auto& e : plan) {
    const Case c = gen_case(e);
    const std::string rel = "volumes/" + e.patient_id + ".mhd";
    write_mhd(c.hu, out_dir / rel);
    write_mhd(c.mask, out_dir / "masks" / (e.patient_id + "_nodule.mhd"));
    annotations.push_back({e.patient_id, rel, c.center, e.label});
    splits.push_back({e.patient_id, e.split});
  }
  write_text_file(out_dir / "annotations.csv", format_annotations(annotations));
  write_text_file(out_dir / "splits.csv", format_split_manifest(splits));
  return annotations;
}

}  // namespace mhaff::phantom
