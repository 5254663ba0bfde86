#include "mhaff/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "mhaff/error.hpp"

namespace mhaff::preprocess {

namespace {

struct AxisSample {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double t = 0.0;
};

AxisSample axis_sample(double u, std::size_t n) {
  u = std::clamp(u, 0.0, static_cast<double>(n - 1));
  AxisSample s;
  s.lo = static_cast<std::size_t>(std::floor(u));
  s.hi = std::min(s.lo + 1, n - 1);
  s.t = u - static_cast<double>(s.lo);
  return s;
}

}  // namespace

Volume resample_trilinear(const Volume& volume, const Vec3& target) {
  for (double s : target) {
    if (!(s > 0.0)) throw Error(ErrorCode::kInvalidValue, "target spacing must be > 0");
  }
  const auto& dims = volume.dims();
  const auto& spacing = volume.spacing();
  if (spacing == target) return volume;

  Dims3 out_dims{};
  for (std::size_t d = 0; d < 3; ++d) {
    const double extent = static_cast<double>(dims[d]) * spacing[d] / target[d];
    out_dims[d] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(extent)));
  }
  Volume out(out_dims, target, volume.origin());

  std::array<std::vector<AxisSample>, 3> samples;
  for (std::size_t d = 0; d < 3; ++d) {
    samples[d].resize(out_dims[d]);
    for (std::size_t i = 0; i < out_dims[d]; ++i) {
      samples[d][i] = axis_sample(static_cast<double>(i) * target[d] / spacing[d], dims[d]);
    }
  }
  for (std::size_t k = 0; k < out_dims[2]; ++k) {
    const auto& sz = samples[2][k];
    for (std::size_t j = 0; j < out_dims[1]; ++j) {
      const auto& sy = samples[1][j];
      for (std::size_t i = 0; i < out_dims[0]; ++i) {
        const auto& sx = samples[0][i];
        auto v = [&](std::size_t x, std::size_t y, std::size_t z) { return static_cast<double>(volume.at(x, y, z)); };
        const double c00 = v(sx.lo, sy.lo, sz.lo) * (1 - sx.t) + v(sx.hi, sy.lo, sz.lo) * sx.t;
        const double c10 = v(sx.lo, sy.hi, sz.lo) * (1 - sx.t) + v(sx.hi, sy.hi, sz.lo) * sx.t;
        const double c01 = v(sx.lo, sy.lo, sz.hi) * (1 - sx.t) + v(sx.hi, sy.lo, sz.hi) * sx.t;
        const double c11 = v(sx.lo, sy.hi, sz.hi) * (1 - sx.t) + v(sx.hi, sy.hi, sz.hi) * sx.t;
        const double c0 = c00 * (1 - sy.t) + c10 * sy.t;
        const double c1 = c01 * (1 - sy.t) + c11 * sy.t;
        out.at(i, j, k) = static_cast<float>(c0 * (1 - sz.t) + c1 * sz.t);
      }
    }
  }
  return out;
}

Volume resample_mask(const Volume& mask, const Vec3& target) {
  Volume out = resample_trilinear(mask, target);
  for (float& v : out.voxels()) v = v >= 0.5f ? 1.0f : 0.0f;
  return out;
}

Index3 map_center(const Index3& c, const Vec3& source, const Vec3& target) {
  auto map = [](std::int64_t v, double s, double t) { return static_cast<std::int64_t>(std::llround(v * s / t)); };
  return {map(c.x, source[0], target[0]), map(c.y, source[1], target[1]), map(c.z, source[2], target[2])};
}

float normalize_hu(float hu, const HuWindow& w) {
  const double v = (static_cast<double>(hu) - w.min) / (w.max - w.min);
  return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

Volume normalize_hu(const Volume& volume, const HuWindow& window) {
  Volume out = volume;
  for (float& v : out.voxels()) v = normalize_hu(v, window);
  return out;
}

RoiStack extract_roi_stack(const Volume& volume, const NoduleAnnotation& a, std::size_t n, float fill) {
  if (n == 0 || n % 2 == 0) throw Error(ErrorCode::kEvenSliceCount, "slice count must be odd, got " + std::to_string(n));
  RoiStack stack;
  stack.slices = n;
  stack.side = kRoiSide;
  stack.nodule_id = a.patient_id;
  stack.values.assign(n * kRoiSide * kRoiSide, fill);
  const auto half = static_cast<std::int64_t>(kRoiSide / 2);
  const auto reach = static_cast<std::int64_t>((n - 1) / 2);
  for (std::size_t s = 0; s < n; ++s) {
    const std::int64_t z = a.center.z - reach + static_cast<std::int64_t>(s);
    stack.slice_z.push_back(z);
    for (std::size_t y = 0; y < kRoiSide; ++y) {
      const std::int64_t vy = a.center.y - half + static_cast<std::int64_t>(y);
      for (std::size_t x = 0; x < kRoiSide; ++x) {
        const std::int64_t vx = a.center.x - half + static_cast<std::int64_t>(x);
        if (volume.contains(vx, vy, z)) {
          stack.at(s, y, x) = volume.at(static_cast<std::size_t>(vx), static_cast<std::size_t>(vy), static_cast<std::size_t>(z));
        }
      }
    }
  }
  return stack;
}

NoduleCube extract_cube(const Volume& hu, const Index3& c, std::size_t side, float fill) {
  NoduleCube cube;
  cube.side = side;
  cube.center = c;
  cube.spacing = hu.spacing();
  cube.values.assign(side * side * side, fill);
  const auto half = static_cast<std::int64_t>(side / 2);
  for (std::size_t z = 0; z < side; ++z) {
    const std::int64_t vz = c.z - half + static_cast<std::int64_t>(z);
    for (std::size_t y = 0; y < side; ++y) {
      const std::int64_t vy = c.y - half + static_cast<std::int64_t>(y);
      for (std::size_t x = 0; x < side; ++x) {
        const std::int64_t vx = c.x - half + static_cast<std::int64_t>(x);
        if (hu.contains(vx, vy, vz)) {
          cube.values[x + side * (y + side * z)] =
              hu.at(static_cast<std::size_t>(vx), static_cast<std::size_t>(vy), static_cast<std::size_t>(vz));
        }
      }
    }
  }
  return cube;
}

std::array<NoduleCube, 3> extract_cubes(const Volume& hu, const Index3& center) {
  return {extract_cube(hu, center, kCubeSides[0]), extract_cube(hu, center, kCubeSides[1]),
          extract_cube(hu, center, kCubeSides[2])};
}

namespace {

constexpr std::array<std::array<int, 3>, 6> kFaceNeighbors{
    {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

std::vector<std::array<int, 3>> ball_offsets(int radius) {
  std::vector<std::array<int, 3>> out;
  for (int z = -radius; z <= radius; ++z)
    for (int y = -radius; y <= radius; ++y)
      for (int x = -radius; x <= radius; ++x)
        if (x * x + y * y + z * z <= radius * radius) out.push_back({x, y, z});
  return out;
}

// Out-of-volume neighbours are ignored, so erosion does not eat voxels at the
// volume border and closing stays extensive.
std::vector<std::uint8_t> morph(const std::vector<std::uint8_t>& in, const Dims3& d,
                                const std::vector<std::array<int, 3>>& ball, bool dilate) {
  std::vector<std::uint8_t> out(in.size(), 0);
  const auto nx = static_cast<std::int64_t>(d[0]);
  const auto ny = static_cast<std::int64_t>(d[1]);
  const auto nz = static_cast<std::int64_t>(d[2]);
  for (std::int64_t z = 0; z < nz; ++z)
    for (std::int64_t y = 0; y < ny; ++y)
      for (std::int64_t x = 0; x < nx; ++x) {
        const auto idx = static_cast<std::size_t>(x + nx * (y + ny * z));
        if (dilate && in[idx]) {
          out[idx] = 1;
          continue;
        }
        if (!dilate && !in[idx]) continue;
        bool hit = !dilate;
        for (const auto& o : ball) {
          const std::int64_t X = x + o[0], Y = y + o[1], Z = z + o[2];
          if (X < 0 || Y < 0 || Z < 0 || X >= nx || Y >= ny || Z >= nz) continue;
          const bool v = in[static_cast<std::size_t>(X + nx * (Y + ny * Z))] != 0;
          if (dilate && v) {
            hit = true;
            break;
          }
          if (!dilate && !v) {
            hit = false;
            break;
          }
        }
        out[idx] = hit ? 1 : 0;
      }
  return out;
}

void fill_holes_per_slice(std::vector<std::uint8_t>& mask, const Dims3& d) {
  const std::size_t nx = d[0], ny = d[1];
  std::vector<std::uint8_t> outside(nx * ny);
  std::vector<std::size_t> stack;
  for (std::size_t z = 0; z < d[2]; ++z) {
    std::uint8_t* slice = mask.data() + z * nx * ny;
    std::fill(outside.begin(), outside.end(), 0);
    stack.clear();
    auto seed = [&](std::size_t x, std::size_t y) {
      const std::size_t i = x + nx * y;
      if (!slice[i] && !outside[i]) {
        outside[i] = 1;
        stack.push_back(i);
      }
    };
    for (std::size_t x = 0; x < nx; ++x) {
      seed(x, 0);
      seed(x, ny - 1);
    }
    for (std::size_t y = 0; y < ny; ++y) {
      seed(0, y);
      seed(nx - 1, y);
    }
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t x = i % nx, y = i / nx;
      if (x > 0) seed(x - 1, y);
      if (x + 1 < nx) seed(x + 1, y);
      if (y > 0) seed(x, y - 1);
      if (y + 1 < ny) seed(x, y + 1);
    }
    for (std::size_t i = 0; i < nx * ny; ++i) {
      if (!outside[i]) slice[i] = 1;
    }
  }
}

}  // namespace

Volume compute_lung_mask(const Volume& hu) {
  const auto& d = hu.dims();
  const auto nx = static_cast<std::int64_t>(d[0]);
  const auto ny = static_cast<std::int64_t>(d[1]);
  const auto nz = static_cast<std::int64_t>(d[2]);
  const auto voxels = hu.voxels();

  std::vector<std::int32_t> label(voxels.size(), -1);
  struct Component {
    std::size_t size = 0;
    bool touches_side = false;
  };
  std::vector<Component> components;
  std::vector<std::size_t> queue;

  for (std::size_t start = 0; start < voxels.size(); ++start) {
    if (label[start] >= 0 || !(voxels[start] < kLungThresholdHU)) continue;
    const auto id = static_cast<std::int32_t>(components.size());
    components.emplace_back();
    auto& comp = components.back();
    queue.assign(1, start);
    label[start] = id;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t idx = queue[head];
      const auto x = static_cast<std::int64_t>(idx % d[0]);
      const auto y = static_cast<std::int64_t>((idx / d[0]) % d[1]);
      const auto z = static_cast<std::int64_t>(idx / (d[0] * d[1]));
      ++comp.size;
      if (x == 0 || y == 0 || x == nx - 1 || y == ny - 1) comp.touches_side = true;
      for (const auto& o : kFaceNeighbors) {
        const std::int64_t X = x + o[0], Y = y + o[1], Z = z + o[2];
        if (X < 0 || Y < 0 || Z < 0 || X >= nx || Y >= ny || Z >= nz) continue;
        const auto n = static_cast<std::size_t>(X + nx * (Y + ny * Z));
        if (label[n] < 0 && voxels[n] < kLungThresholdHU) {
          label[n] = id;
          queue.push_back(n);
        }
      }
    }
  }

  std::vector<std::int32_t> keep;
  for (std::size_t c = 0; c < components.size(); ++c) {
    if (!components[c].touches_side) keep.push_back(static_cast<std::int32_t>(c));
  }
  std::stable_sort(keep.begin(), keep.end(),
                   [&](std::int32_t a, std::int32_t b) { return components[a].size > components[b].size; });
  if (keep.size() > 2) keep.resize(2);
  if (keep.empty()) throw Error(ErrorCode::kEmptyMask, "no lung component below -320 HU away from the x/y faces");

  std::vector<std::uint8_t> mask(voxels.size(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (label[i] >= 0 && std::find(keep.begin(), keep.end(), label[i]) != keep.end()) mask[i] = 1;
  }
  const auto ball = ball_offsets(2);
  mask = morph(morph(mask, d, ball, true), d, ball, false);
  fill_holes_per_slice(mask, d);

  Volume out(d, hu.spacing(), hu.origin());
  auto ov = out.voxels();
  for (std::size_t i = 0; i < mask.size(); ++i) ov[i] = mask[i];
  return out;
}

AugmentParams draw_augment(Rng& rng) {
  AugmentParams p;
  if (rng.bernoulli(0.5)) p.rotate_quarters = static_cast<int>(rng.uniform_int(1, 3));
  p.flip_horizontal = rng.bernoulli(0.5);
  p.flip_vertical = rng.bernoulli(0.5);
  if (rng.bernoulli(0.5)) {
    p.shift_x = static_cast<int>(rng.uniform_int(-2, 2));
    p.shift_y = static_cast<int>(rng.uniform_int(-2, 2));
  }
  if (rng.bernoulli(0.5)) p.amplification = rng.uniform(0.9, 1.1);
  return p;
}

namespace {

// In-plane transforms over `depth` square planes of `side` pixels (row-major y, x).
void transform_planes(std::vector<float>& values, std::size_t depth, std::size_t side, const AugmentParams& p,
                      float fill, bool clamp_unit) {
  std::vector<float> plane(side * side), tmp(side * side);
  const std::size_t last = side - 1;
  for (std::size_t s = 0; s < depth; ++s) {
    float* data = values.data() + s * side * side;
    std::copy(data, data + side * side, plane.begin());
    for (int q = 0; q < p.rotate_quarters; ++q) {
      // 90 degrees counter-clockwise: out(y, x) = in(x, last - y)
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) tmp[y * side + x] = plane[x * side + (last - y)];
      plane.swap(tmp);
    }
    if (p.flip_horizontal) {
      for (std::size_t y = 0; y < side; ++y) std::reverse(plane.begin() + y * side, plane.begin() + (y + 1) * side);
    }
    if (p.flip_vertical) {
      for (std::size_t y = 0; y < side / 2; ++y)
        std::swap_ranges(plane.begin() + y * side, plane.begin() + (y + 1) * side, plane.begin() + (last - y) * side);
    }
    if (p.shift_x != 0 || p.shift_y != 0) {
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const auto sy = static_cast<std::int64_t>(y) - p.shift_y;
          const auto sx = static_cast<std::int64_t>(x) - p.shift_x;
          const bool inside = sy >= 0 && sx >= 0 && sy < static_cast<std::int64_t>(side) && sx < static_cast<std::int64_t>(side);
          tmp[y * side + x] = inside ? plane[static_cast<std::size_t>(sy) * side + static_cast<std::size_t>(sx)] : fill;
        }
      plane.swap(tmp);
    }
    if (p.amplification != 1.0) {
      for (float& v : plane) {
        double a = static_cast<double>(v) * p.amplification;
        if (clamp_unit) a = std::clamp(a, 0.0, 1.0);
        v = static_cast<float>(a);
      }
    }
    std::copy(plane.begin(), plane.end(), data);
  }
}

}  // namespace

void apply_augment(RoiStack& stack, const AugmentParams& params) {
  transform_planes(stack.values, stack.slices, stack.side, params, 0.0f, true);
}

// Cubes are x fastest with z planes, so each z plane is (y, x) row-major as well.
void apply_augment(NoduleCube& cube, const AugmentParams& params) {
  transform_planes(cube.values, cube.side, cube.side, params, kAirHU, false);
}

RoiStack augment(const RoiStack& stack, Rng& rng) {
  RoiStack out = stack;
  apply_augment(out, draw_augment(rng));
  return out;
}

NoduleCube augment(const NoduleCube& cube, Rng& rng) {
  NoduleCube out = cube;
  apply_augment(out, draw_augment(rng));
  return out;
}

}  // namespace mhaff::preprocess
