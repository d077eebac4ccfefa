#pragma once

#include <cstdint>
#include <random>

namespace varmaformer {

// Seedable generator with a fully specified output stream:
//   engine  : std::mt19937_64 (bit-exact across standard libraries)
//   uniform : top 53 bits of one draw scaled by 2^-53, in [0, 1)
//   normal  : Box-Muller on two uniforms, second variate cached
// std::*_distribution is avoided because its algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace varmaformer
