#include "mhaff/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "mhaff/detail/text_util.hpp"
#include "mhaff/error.hpp"
#include "mhaff/volume.hpp"

namespace mhaff {

namespace {

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::byte>((v >> (8 * b)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  std::span<const std::byte> take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::kTruncated, "checkpoint payload ends early");
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32() {
    const auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(std::to_integer<std::uint8_t>(b[i])) << (8 * i);
    return v;
  }
  std::string text(std::size_t n) {
    const auto b = take(n);
    return std::string(reinterpret_cast<const char*>(b.data()), n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::byte> write_checkpoint(const Checkpoint& checkpoint) {
  std::vector<std::byte> out;
  for (char c : kCheckpointMagic) out.push_back(static_cast<std::byte>(c));

  std::ostringstream config;
  for (const auto& [key, value] : checkpoint.config) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw Error(ErrorCode::kInvalidValue, "config entry not representable: " + key);
    }
    config << key << " = " << value << '\n';
  }
  const std::string config_text = config.str();
  put_u32(out, static_cast<std::uint32_t>(config_text.size()));
  for (char c : config_text) out.push_back(static_cast<std::byte>(c));

  put_u32(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, tensor] : checkpoint.tensors) {
    std::size_t count = 1;
    for (auto d : tensor.dims) count *= d;
    if (count != tensor.values.size()) {
      throw Error(ErrorCode::kShapeMismatch, "tensor " + name + " dims do not match its value count");
    }
    for (float v : tensor.values) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteTensor, "tensor " + name);
    }
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    for (char c : name) out.push_back(static_cast<std::byte>(c));
    put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
    for (auto d : tensor.dims) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : tensor.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint read_checkpoint(std::span<const std::byte> bytes) {
  Reader in(bytes);
  if (bytes.size() < sizeof(kCheckpointMagic)) throw Error(ErrorCode::kBadMagic, "payload shorter than magic");
  const auto magic = in.take(sizeof(kCheckpointMagic));
  if (std::memcmp(magic.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw Error(ErrorCode::kBadMagic, "expected MHAFF001");
  }

  Checkpoint checkpoint;
  const std::string config_text = in.text(in.u32());
  for (const auto line : detail::split_lines(config_text)) {
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::kInvalidValue, "bad config line in checkpoint");
    checkpoint.config[std::string(detail::trim(line.substr(0, eq)))] = std::string(detail::trim(line.substr(eq + 1)));
  }

  const std::uint32_t count = in.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = in.text(in.u32());
    NamedTensor tensor;
    const std::uint32_t rank = in.u32();
    if (rank > 8) throw Error(ErrorCode::kInvalidValue, "tensor " + name + " has implausible rank");
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      tensor.dims.push_back(in.u32());
      n *= tensor.dims.back();
    }
    if (n > (bytes.size() / 4)) throw Error(ErrorCode::kTruncated, "tensor " + name + " larger than payload");
    tensor.values.resize(n);
    for (auto& v : tensor.values) v = std::bit_cast<float>(in.u32());
    checkpoint.tensors.emplace(name, std::move(tensor));
  }
  if (!in.done()) throw Error(ErrorCode::kInvalidValue, "trailing bytes after checkpoint payload");
  return checkpoint;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_binary_file(path, write_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kIo, "checkpoint not found: " + path.string());
  return read_checkpoint(read_binary_file(path));
}

}  // namespace mhaff
