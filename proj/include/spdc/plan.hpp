#ifndef SPDC_PLAN_HPP
#define SPDC_PLAN_HPP

#include <cstddef>

namespace spdc {

// Padding plan: p is the smallest count of determinant-preserving borders
// that makes the side divisible by the server count with blocks larger
// than 1x1.
struct PartitionPlan {
  std::size_t n = 0;        // ciphertext side before padding
  std::size_t servers = 0;  // N
  std::size_t pad = 0;      // p
  std::size_t block_size = 0;
};

PartitionPlan plan_partition(std::size_t n, std::size_t servers);

}  // namespace spdc

#endif
