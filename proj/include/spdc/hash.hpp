#ifndef SPDC_HASH_HPP
#define SPDC_HASH_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace spdc {

using Bytes = std::vector<std::uint8_t>;

// SHA-256 over a byte buffer.
std::array<std::uint8_t, 32> sha256(const Bytes& data);

std::string hex_encode(const std::uint8_t* data, std::size_t len);
Bytes hex_decode(const std::string& hex);  // throws IoError on bad input

// Deterministic byte stream keyed by an arbitrary seed buffer: block i is
// SHA-256(key || counter). Stands in for a CSPRNG where reproducibility
// across runs and platforms matters more than entropy.
class HashStream {
 public:
  explicit HashStream(const Bytes& key_material);

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit();

  // Uniform in [lo, hi).
  double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

 private:
  void refill();

  std::array<std::uint8_t, 32> key_;
  std::array<std::uint8_t, 32> block_;
  std::uint64_t counter_ = 0;
  std::size_t pos_ = 32;  // forces refill on first use
};

}  // namespace spdc

#endif
