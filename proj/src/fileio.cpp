#include "picosim/fileio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace pico {

namespace {

std::uint32_t low_mask(int width) {
  return width >= 32 ? 0xffffffffu : ((1u << width) - 1u);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::uint32_t parse_value(std::string_view token, const ValueType& type, const std::string& path,
                          int line) {
  std::string_view digits = token;
  bool neg = false;
  if (!digits.empty() && digits.front() == '-') {
    neg = true;
    digits.remove_prefix(1);
  }
  int base = 10;
  bool hex = false;
  if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X')) {
    base = 16;
    hex = true;
    digits.remove_prefix(2);
  }
  std::uint64_t mag = 0;
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), mag, base);
  if (digits.empty() || ec != std::errc() || p != digits.data() + digits.size()) {
    throw FileFormatError(path, line, "not a number: '" + std::string(token) + "'");
  }
  const int w = type.width;
  const std::uint64_t span = 1ull << w;
  if (type.sign == Signedness::Signed && !hex) {
    const std::int64_t lo = -static_cast<std::int64_t>(span / 2);
    const std::int64_t hi = static_cast<std::int64_t>(span / 2) - 1;
    if (mag > span) {
      throw FileFormatError(path, line, "value " + std::string(token) + " exceeds " + type.describe());
    }
    std::int64_t v = neg ? -static_cast<std::int64_t>(mag) : static_cast<std::int64_t>(mag);
    if (v < lo || v > hi) {
      throw FileFormatError(path, line, "value " + std::string(token) + " exceeds " + type.describe());
    }
    return static_cast<std::uint32_t>(static_cast<std::int32_t>(v));
  }
  if (neg) throw FileFormatError(path, line, "negative value for " + type.describe());
  if (mag >= span) {
    throw FileFormatError(path, line, "value " + std::string(token) + " exceeds " + type.describe());
  }
  auto v = static_cast<std::uint32_t>(mag);
  if (type.sign == Signedness::Signed && w < 32 && (v >> (w - 1)) & 1u) v |= ~low_mask(w);
  return v;
}

std::vector<std::uint32_t> parse_value_text(std::string_view text, const ValueType& type,
                                            const std::string& path) {
  std::vector<std::uint32_t> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) out.push_back(parse_value(line, type, path, line_no));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

std::vector<std::uint32_t> read_value_file(const std::string& path, const ValueType& type) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_value_text(ss.str(), type, path);
}

std::string format_value(std::uint32_t value, const ValueType& type) {
  std::uint32_t bits = value & low_mask(type.width);
  if (type.sign == Signedness::Signed) {
    std::int64_t v = bits;
    if (type.width < 64 && (bits >> (type.width - 1)) & 1u) v -= static_cast<std::int64_t>(1ull << type.width);
    return std::to_string(v);
  }
  return std::to_string(bits);
}

void append_value_file(const std::string& path, std::span<const std::uint32_t> values,
                       const ValueType& type) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot write " + path);
  for (auto v : values) out << format_value(v, type) << '\n';
}

void write_value_file(const std::string& path, std::span<const std::uint32_t> values,
                      const ValueType& type) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  for (auto v : values) out << format_value(v, type) << '\n';
}

}  // namespace pico
