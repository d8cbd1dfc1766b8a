#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "chorus/types.hpp"

namespace chorus {

// FNV-1a 64-bit; used for config/dataset fingerprints and output file
// digests. Stability across platforms matters, cryptographic strength does
// not.
class Fnv1a64 {
 public:
  Fnv1a64& bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001B3ull;
    }
    return *this;
  }
  Fnv1a64& str(std::string_view s) { return bytes(s.data(), s.size()); }
  Fnv1a64& u64(uint64_t x) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(x >> (8 * i));
    return bytes(buf, 8);
  }
  Fnv1a64& i64(int64_t x) { return u64(static_cast<uint64_t>(x)); }
  Fnv1a64& f64(double x) {
    uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    return u64(bits);
  }

  uint64_t value() const { return hash_; }

 private:
  uint64_t hash_ = 0xCBF29CE484222325ull;
};

std::string digest_hex(uint64_t digest);

// Structural fingerprint of a dataset: dimensions, site map, every cell,
// covariate bits. Used to verify dataset pairing across model variants.
uint64_t dataset_digest(const Dataset& dataset);

}  // namespace chorus
