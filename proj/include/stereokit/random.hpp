#pragma once

#include <cstdint>
#include <random>

namespace stereokit {

// mt19937_64's output sequence is fixed by the standard; the distribution
// below is hand-rolled so seeded draws are identical across standard libraries.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace stereokit
