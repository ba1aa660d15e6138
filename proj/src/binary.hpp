#pragma once

#include "prcnn/errors.hpp"

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace prcnn::binary {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xffu);
  os.write(b, 4);
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

// Returns false on a clean end of stream before any byte was read.
inline bool try_get_u32(std::istream& is, std::uint32_t& v, const std::string& what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() == 0 && is.eof()) return false;
  if (is.gcount() != 4) throw FormatError("truncated " + what);
  v = std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
  return true;
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  std::uint32_t v;
  if (!try_get_u32(is, v, what)) throw FormatError("truncated " + what);
  return v;
}

inline float get_f32(std::istream& is, const std::string& what) {
  return std::bit_cast<float>(get_u32(is, what));
}

}  // namespace prcnn::binary
