#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "pointda/common.hpp"

namespace pointda {

// Counter-free splittable RNG. Every consumer derives its own stream from
// (seed, tags...), so results never depend on thread scheduling or on how
// many draws some other component made.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(mix(state)) {}

  static std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = fnv1a(tag.data(), tag.size(), kFnvOffset ^ seed);
    return mix(h);
  }
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag,
                              std::int64_t a) {
    std::uint64_t h = derive(seed, tag);
    return mix(h ^ (static_cast<std::uint64_t>(a) * 0x9e3779b97f4a7c15ULL));
  }
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag,
                              std::int64_t a, std::int64_t b) {
    return mix(derive(seed, tag, a) ^
               (static_cast<std::uint64_t>(b) * 0xbf58476d1ce4e5b9ULL));
  }

  // splitmix64
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi_inclusive) {
    const auto span = static_cast<std::uint64_t>(hi_inclusive - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  // Box-Muller, spare discarded so draw count stays predictable.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
    z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    return z ^ (z >> 33);
  }

  std::uint64_t state_;
};

}  // namespace pointda
