#include "cogtree/digest.hpp"

#include <bit>
#include <cstdio>

namespace cogtree {

namespace {
constexpr std::uint64_t kPrime = 0x100000001b3ULL;
}

void Digest::update(std::string_view bytes) noexcept {
  for (unsigned char c : bytes) {
    h_ ^= c;
    h_ *= kPrime;
  }
}

// Integers are hashed as little-endian bytes regardless of host order.
void Digest::update(std::uint64_t value) noexcept {
  for (int i = 0; i < 8; ++i) {
    h_ ^= (value >> (8 * i)) & 0xffU;
    h_ *= kPrime;
  }
}

void Digest::update(double value) noexcept { update(std::bit_cast<std::uint64_t>(value)); }

void Digest::update(std::span<const double> values) noexcept {
  for (double v : values) update(v);
}

std::string Digest::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
  return buf;
}

std::string digest_hex(std::string_view bytes) {
  Digest d;
  d.update(bytes);
  return d.hex();
}

}  // namespace cogtree
