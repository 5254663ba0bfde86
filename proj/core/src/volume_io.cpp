#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mhaff/error.hpp"
#include "mhaff/volume.hpp"
#include "mhaff/detail/text_util.hpp"

namespace mhaff {

Volume::Volume(Dims3 dims, Vec3 spacing, Vec3 origin, float fill)
    : dims_(dims), spacing_(spacing), origin_(origin) {
  for (std::size_t d = 0; d < 3; ++d) {
    if (dims[d] == 0) throw Error(ErrorCode::kInvalidValue, "volume dimensions must be >= 1");
    if (!(spacing[d] > 0.0)) throw Error(ErrorCode::kInvalidValue, "volume spacing must be > 0");
  }
  voxels_.assign(dims[0] * dims[1] * dims[2], fill);
}

namespace {

std::vector<double> parse_numbers(std::string_view key, std::string_view value) {
  std::vector<double> out;
  for (const auto& tok : detail::split_whitespace(value)) {
    double v = 0.0;
    if (!detail::parse_double(tok, v)) {
      throw Error(ErrorCode::kInvalidValue, std::string(key) + ": not a number: " + tok);
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

VolumeHeader parse_mhd(std::string_view header_text) {
  std::map<std::string, std::string, std::less<>> fields;
  for (const auto& raw_line : detail::split_lines(header_text)) {
    const std::string_view line = detail::trim(raw_line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidValue, "malformed header line: " + std::string(line));
    }
    fields[std::string(detail::trim(line.substr(0, eq)))] = std::string(detail::trim(line.substr(eq + 1)));
  }

  auto require = [&](const char* key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorCode::kMissingKey, key);
    return it->second;
  };

  VolumeHeader header;

  const auto dim_tokens = detail::split_whitespace(require("DimSize"));
  if (dim_tokens.size() != 3) throw Error(ErrorCode::kInvalidValue, "DimSize must have 3 entries");
  for (std::size_t d = 0; d < 3; ++d) {
    std::int64_t v = 0;
    if (!detail::parse_int(dim_tokens[d], v) || v < 1) {
      throw Error(ErrorCode::kInvalidValue, "DimSize entries must be positive integers: " + dim_tokens[d]);
    }
    header.dims[d] = static_cast<std::size_t>(v);
  }

  const auto spacing = parse_numbers("ElementSpacing", require("ElementSpacing"));
  if (spacing.size() != 3) throw Error(ErrorCode::kInvalidValue, "ElementSpacing must have 3 entries");
  for (std::size_t d = 0; d < 3; ++d) {
    if (!(spacing[d] > 0.0)) throw Error(ErrorCode::kInvalidValue, "ElementSpacing entries must be > 0");
    header.spacing[d] = spacing[d];
  }

  header.element_type = require("ElementType");
  if (header.element_type != "MET_SHORT") {
    throw Error(ErrorCode::kUnsupportedType, "ElementType " + header.element_type);
  }
  header.data_file = require("ElementDataFile");

  for (const char* key : {"Offset", "Origin", "Position"}) {
    if (auto it = fields.find(key); it != fields.end()) {
      const auto origin = parse_numbers(key, it->second);
      if (origin.size() != 3) throw Error(ErrorCode::kInvalidValue, std::string(key) + " must have 3 entries");
      header.origin = {origin[0], origin[1], origin[2]};
      break;
    }
  }
  for (const char* key : {"BinaryDataByteOrderMSB", "ElementByteOrderMSB"}) {
    if (auto it = fields.find(key); it != fields.end() && detail::iequals(it->second, "True")) {
      throw Error(ErrorCode::kUnsupportedType, "big-endian MetaImage data");
    }
  }
  if (auto it = fields.find("CompressedData"); it != fields.end() && detail::iequals(it->second, "True")) {
    throw Error(ErrorCode::kUnsupportedType, "compressed MetaImage data");
  }
  if (auto it = fields.find("NDims"); it != fields.end() && it->second != "3") {
    throw Error(ErrorCode::kUnsupportedType, "NDims " + it->second);
  }
  return header;
}

std::string format_mhd(const VolumeHeader& h) {
  std::ostringstream os;
  os.precision(17);
  os << "ObjectType = Image\n"
     << "NDims = 3\n"
     << "BinaryData = True\n"
     << "BinaryDataByteOrderMSB = False\n"
     << "CompressedData = False\n"
     << "Offset = " << h.origin[0] << ' ' << h.origin[1] << ' ' << h.origin[2] << '\n'
     << "ElementSpacing = " << h.spacing[0] << ' ' << h.spacing[1] << ' ' << h.spacing[2] << '\n'
     << "DimSize = " << h.dims[0] << ' ' << h.dims[1] << ' ' << h.dims[2] << '\n'
     << "ElementType = MET_SHORT\n"
     << "ElementDataFile = " << h.data_file << '\n';
  return os.str();
}

Volume load_volume(const VolumeHeader& header, std::span<const std::byte> raw) {
  const std::size_t expected = header.raw_byte_count();
  if (raw.size() != expected) {
    throw Error(ErrorCode::kSizeMismatch,
                "raw data has " + std::to_string(raw.size()) + " bytes, expected " + std::to_string(expected));
  }
  Volume volume(header.dims, header.spacing, header.origin);
  auto voxels = volume.voxels();
  for (std::size_t n = 0; n < voxels.size(); ++n) {
    const auto lo = static_cast<std::uint16_t>(std::to_integer<std::uint8_t>(raw[2 * n]));
    const auto hi = static_cast<std::uint16_t>(std::to_integer<std::uint8_t>(raw[2 * n + 1]));
    const auto value = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
    if (value < kMinHU || value > kMaxHU) {
      throw Error(ErrorCode::kOutOfRangeHU, "voxel " + std::to_string(n) + " = " + std::to_string(value));
    }
    voxels[n] = static_cast<float>(value);
  }
  return volume;
}

std::vector<std::byte> encode_raw(const Volume& volume) {
  std::vector<std::byte> raw(volume.size() * 2);
  const auto voxels = volume.voxels();
  for (std::size_t n = 0; n < voxels.size(); ++n) {
    const float rounded = std::nearbyint(voxels[n]);
    if (!(rounded >= kMinHU && rounded <= kMaxHU)) {
      throw Error(ErrorCode::kOutOfRangeHU, "voxel " + std::to_string(n) + " = " + std::to_string(voxels[n]));
    }
    const auto bits = static_cast<std::uint16_t>(static_cast<std::int16_t>(rounded));
    raw[2 * n] = static_cast<std::byte>(bits & 0xFF);
    raw[2 * n + 1] = static_cast<std::byte>(bits >> 8);
  }
  return raw;
}

Volume read_mhd(const std::filesystem::path& mhd_path) {
  const VolumeHeader header = parse_mhd(read_text_file(mhd_path));
  std::filesystem::path raw_path = header.data_file;
  if (raw_path.is_relative()) raw_path = mhd_path.parent_path() / raw_path;
  return load_volume(header, read_binary_file(raw_path));
}

void write_mhd(const Volume& volume, const std::filesystem::path& mhd_path) {
  VolumeHeader header;
  header.dims = volume.dims();
  header.spacing = volume.spacing();
  header.origin = volume.origin();
  header.element_type = "MET_SHORT";
  std::filesystem::path raw_path = mhd_path;
  raw_path.replace_extension(".raw");
  header.data_file = raw_path.filename().string();
  const auto raw = encode_raw(volume);
  if (mhd_path.has_parent_path()) std::filesystem::create_directories(mhd_path.parent_path());
  write_binary_file(raw_path, raw);
  write_text_file(mhd_path, format_mhd(header));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::byte> read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  return bytes;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace mhaff
