#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "picosim/netlist.hpp"

namespace pico {

// Value files: one value per line, decimal (negative allowed for signed
// types) or 0x-prefixed hex, `#` comments, blank lines ignored. Values are
// held as the 32-bit pattern; signed values are sign-extended.

std::uint32_t parse_value(std::string_view token, const ValueType& type, const std::string& path,
                          int line);
std::vector<std::uint32_t> parse_value_text(std::string_view text, const ValueType& type,
                                            const std::string& path = "<input>");
std::vector<std::uint32_t> read_value_file(const std::string& path, const ValueType& type);

// Canonical form: signed types in signed decimal, others in unsigned decimal,
// both taken from the low `width` bits.
std::string format_value(std::uint32_t value, const ValueType& type);
void append_value_file(const std::string& path, std::span<const std::uint32_t> values,
                       const ValueType& type);
void write_value_file(const std::string& path, std::span<const std::uint32_t> values,
                      const ValueType& type);

}  // namespace pico
