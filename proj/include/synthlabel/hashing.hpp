#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace synthlabel {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// First 16 hex digits of the SHA-256, used for short provenance tags.
std::string short_hash(std::string_view bytes);

}  // namespace synthlabel
