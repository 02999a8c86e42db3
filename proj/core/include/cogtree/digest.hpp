#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace cogtree {

/// Streaming 64-bit FNV-1a content digest. Used for provenance fields
/// (`built_from`, `config_digest`) and for deriving per-purpose seeds; it is
/// not a cryptographic hash.
class Digest {
 public:
  void update(std::string_view bytes) noexcept;
  void update(std::uint64_t value) noexcept;
  void update(double value) noexcept;
  void update(std::span<const double> values) noexcept;

  std::uint64_t value() const noexcept { return h_; }
  std::string hex() const;

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string digest_hex(std::string_view bytes);

}  // namespace cogtree
