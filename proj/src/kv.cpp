#include "synthlabel/kv.hpp"

#include <charconv>
#include <cmath>

#include "synthlabel/error.hpp"

namespace synthlabel {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& context) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
    throw ConfigError(context + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& context) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError(context + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

void KeyValues::set(const std::string& key, double value) { entries_[key] = format_double(value); }

void KeyValues::set(const std::string& key, std::uint64_t value) {
  entries_[key] = std::to_string(value);
}

const std::string& KeyValues::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing key '" + key + "'");
  return it->second;
}

double KeyValues::get_double(const std::string& key) const { return parse_double(get(key), key); }

std::uint64_t KeyValues::get_u64(const std::string& key) const { return parse_u64(get(key), key); }

bool KeyValues::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string KeyValues::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ConfigError("malformed key/value line '" + std::string(line) + "'");
    }
    kv.set(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
  }
  return kv;
}

}  // namespace synthlabel
