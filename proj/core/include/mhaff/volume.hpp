#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mhaff {

using Dims3 = std::array<std::size_t, 3>;
using Vec3 = std::array<double, 3>;

struct Index3 {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
};

inline constexpr float kMinHU = -2048.0f;
inline constexpr float kMaxHU = 4095.0f;

// Dense 3D grid, x fastest. Holds HU values, normalized intensities or
// binary masks depending on context.
class Volume {
 public:
  Volume() = default;
  Volume(Dims3 dims, Vec3 spacing, Vec3 origin = {0.0, 0.0, 0.0}, float fill = 0.0f);

  const Dims3& dims() const noexcept { return dims_; }
  const Vec3& spacing() const noexcept { return spacing_; }
  const Vec3& origin() const noexcept { return origin_; }
  void set_origin(const Vec3& origin) { origin_ = origin; }
  std::size_t size() const noexcept { return voxels_.size(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + dims_[0] * (j + dims_[1] * k);
  }
  bool contains(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
    return i >= 0 && j >= 0 && k >= 0 && static_cast<std::size_t>(i) < dims_[0] &&
           static_cast<std::size_t>(j) < dims_[1] && static_cast<std::size_t>(k) < dims_[2];
  }
  bool contains(const Index3& p) const noexcept { return contains(p.x, p.y, p.z); }

  float& at(std::size_t i, std::size_t j, std::size_t k) { return voxels_[index(i, j, k)]; }
  float at(std::size_t i, std::size_t j, std::size_t k) const { return voxels_[index(i, j, k)]; }

  std::span<float> voxels() noexcept { return voxels_; }
  std::span<const float> voxels() const noexcept { return voxels_; }

  double voxel_volume() const noexcept { return spacing_[0] * spacing_[1] * spacing_[2]; }

 private:
  Dims3 dims_{0, 0, 0};
  Vec3 spacing_{1.0, 1.0, 1.0};
  Vec3 origin_{0.0, 0.0, 0.0};
  std::vector<float> voxels_;
};

struct VolumeHeader {
  Dims3 dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  std::string element_type;
  std::string data_file;

  std::size_t raw_byte_count() const noexcept { return dims[0] * dims[1] * dims[2] * 2; }
};

// MetaImage header parser. Only uncompressed little-endian MET_SHORT is accepted.
VolumeHeader parse_mhd(std::string_view header_text);
std::string format_mhd(const VolumeHeader& header);

// Decodes little-endian int16 voxels; raw length must match the header exactly.
Volume load_volume(const VolumeHeader& header, std::span<const std::byte> raw);
// Encodes voxels rounded to the nearest integer; rejects values outside the HU range.
std::vector<std::byte> encode_raw(const Volume& volume);

Volume read_mhd(const std::filesystem::path& mhd_path);
// Writes the header at mhd_path and a sibling .raw file.
void write_mhd(const Volume& volume, const std::filesystem::path& mhd_path);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::byte> read_binary_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
void write_binary_file(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace mhaff
