#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "synthlabel/tensor.hpp"

namespace synthlabel {

// TNSR layout: "TNSR", u32 version (1), u8 dtype (0 = f64), u8 ndims,
// ndims x u64 dims, row-major payload. All integers and floats little-endian.
inline constexpr std::uint32_t kTnsrVersion = 1;

void write_tnsr(std::ostream& out, const Tensor& tensor);
Tensor read_tnsr(std::istream& in);

void save_tnsr(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_tnsr(const std::filesystem::path& path);

// Little-endian primitives shared by the other binary formats.
void write_u8(std::ostream& out, std::uint8_t v);
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint8_t read_u8(std::istream& in);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);

/// u64 byte length followed by the raw bytes.
void write_blob(std::ostream& out, const std::string& bytes);
std::string read_blob(std::istream& in);

}  // namespace synthlabel
