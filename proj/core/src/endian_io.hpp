#pragma once

// Little-endian scalar (de)serialization independent of host byte order.

#include <algorithm>
#include <bit>
#include <cstring>

namespace hsissl::detail {

template <typename U>
U load_le(const char* p) {
  U v;
  std::memcpy(&v, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(U));
  }
  return v;
}

template <typename U>
void store_le(U v, char* p) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(U));
  }
  std::memcpy(p, &v, sizeof(U));
}

}  // namespace hsissl::detail
