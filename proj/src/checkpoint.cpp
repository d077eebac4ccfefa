#include "varmaformer/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace varmaformer {

namespace {

constexpr std::array<char, 4> kMagic{'V', 'M', 'F', '1'};

template <typename T>
void put_le(std::ofstream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) {
    bits = std::bit_cast<std::uint64_t>(value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& in, const std::filesystem::path& path) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw CheckpointError(path.string() + ": truncated checkpoint");
  }
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  if constexpr (std::is_floating_point_v<T>) {
    return std::bit_cast<T>(bits);
  } else {
    return static_cast<T>(bits);
  }
}

std::string get_string(std::ifstream& in, const std::filesystem::path& path, std::uint32_t length) {
  std::string s(length, '\0');
  if (length > 0 && !in.read(s.data(), length)) throw CheckpointError(path.string() + ": truncated checkpoint");
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.config_text.size()));
  out.write(checkpoint.config_text.data(), static_cast<std::streamsize>(checkpoint.config_text.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.parameters.size()));
  for (const NamedArray& a : checkpoint.parameters) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t extent : a.shape) put_le<std::uint64_t>(out, extent);
    for (double v : a.values) put_le<double>(out, v);
  }
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint not found: " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError(path.string() + ": not a VMF1 checkpoint");
  }
  Checkpoint cp;
  cp.config_text = get_string(in, path, get_le<std::uint32_t>(in, path));
  const auto records = get_le<std::uint32_t>(in, path);
  for (std::uint32_t r = 0; r < records; ++r) {
    NamedArray a;
    a.name = get_string(in, path, get_le<std::uint32_t>(in, path));
    const auto rank = get_le<std::uint32_t>(in, path);
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto extent = get_le<std::uint64_t>(in, path);
      if (extent == 0 || count > std::numeric_limits<std::uint32_t>::max() / extent) {
        throw CheckpointError(path.string() + ": bad extent in record '" + a.name + "'");
      }
      a.shape.push_back(extent);
      count *= extent;
    }
    a.values.resize(count);
    for (double& v : a.values) v = get_le<double>(in, path);
    cp.parameters.push_back(std::move(a));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError(path.string() + ": trailing bytes");
  return cp;
}

}  // namespace varmaformer
