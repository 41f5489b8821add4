#pragma once

#include <cstdint>
#include <random>

namespace jointdep {

// mt19937_64 with a platform-independent uniform draw (the standard
// distributions are implementation-defined, which would break reproducibility).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(uniform() * (hi - lo + 1));
  }

  template <class Weights>
  int categorical(const Weights& w) {
    double total = 0.0;
    for (auto v : w) total += v;
    double r = uniform() * total;
    int last = 0;
    int i = 0;
    for (auto v : w) {
      if (v > 0.0) {
        last = i;
        if (r < v) return i;
        r -= v;
      }
      ++i;
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace jointdep
