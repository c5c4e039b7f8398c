#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace synthlabel {

/// Flat key/value record. Canonical text is "key=value\n" per entry in key
/// order, which makes it stable under hashing.
class KeyValues {
 public:
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
  void set(const std::string& key, double value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::uint64_t>(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  /// Throws ConfigError when the key is missing or the value malformed.
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  std::string canonical_text() const;
  static KeyValues parse(std::string_view text);

  bool operator==(const KeyValues&) const = default;

 private:
  std::map<std::string, std::string> entries_;
};

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& context);
std::uint64_t parse_u64(const std::string& text, const std::string& context);

}  // namespace synthlabel
