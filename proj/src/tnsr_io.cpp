#include "synthlabel/tnsr_io.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

#include "synthlabel/error.hpp"

namespace synthlabel {

namespace {

constexpr std::array<char, 4> kMagic{'T', 'N', 'S', 'R'};
constexpr std::uint64_t kMaxBlob = std::uint64_t{1} << 32;

template <typename T>
void write_le(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
  if (!out) throw IoError("write failed");
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError("unexpected end of stream");
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void write_u8(std::ostream& out, std::uint8_t v) { write_le(out, v); }
void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }
std::uint8_t read_u8(std::istream& in) { return read_le<std::uint8_t>(in); }
std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
double read_f64(std::istream& in) { return std::bit_cast<double>(read_le<std::uint64_t>(in)); }

void write_blob(std::ostream& out, const std::string& bytes) {
  write_u64(out, bytes.size());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed");
}

std::string read_blob(std::istream& in) {
  const auto n = read_u64(in);
  if (n > kMaxBlob) throw IoError("blob length " + std::to_string(n) + " is implausible");
  std::string bytes(n, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) throw IoError("truncated blob");
  return bytes;
}

void write_tnsr(std::ostream& out, const Tensor& tensor) {
  if (tensor.rank() > 255) throw DimensionError("TNSR supports at most 255 dimensions");
  out.write(kMagic.data(), kMagic.size());
  write_u32(out, kTnsrVersion);
  write_u8(out, 0);
  write_u8(out, static_cast<std::uint8_t>(tensor.rank()));
  for (auto d : tensor.shape()) write_u64(out, d);
  for (double v : tensor.data()) write_f64(out, v);
}

Tensor read_tnsr(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kMagic) throw IoError("not a TNSR stream (bad magic)");
  const auto version = read_u32(in);
  if (version != kTnsrVersion) {
    throw IoError("unsupported TNSR version " + std::to_string(version));
  }
  const auto dtype = read_u8(in);
  if (dtype != 0) throw IoError("unsupported TNSR dtype " + std::to_string(dtype));
  const auto ndims = read_u8(in);
  if (ndims == 0) throw IoError("TNSR with zero dimensions");
  Shape shape(ndims);
  std::uint64_t numel = 1;
  for (auto& d : shape) {
    d = read_u64(in);
    if (d == 0 || numel > (std::uint64_t{1} << 40) / d) {
      throw IoError("TNSR dimension out of range");
    }
    numel *= d;
  }
  std::vector<double> data(numel);
  for (auto& v : data) v = read_f64(in);
  return Tensor(std::move(shape), std::move(data));
}

void save_tnsr(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_tnsr(out, tensor);
}

Tensor load_tnsr(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tnsr(in);
}

}  // namespace synthlabel
