#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace gps {

// Counter-based splittable RNG. A stream is (key, counter); drawing advances
// the counter, splitting derives a child key from a label. Draw order inside
// a stream is deterministic and independent of any other stream, so results
// do not depend on thread scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix(key_ + kGolden * ++counter_); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // standard normal, Box-Muller (two uniforms per draw)
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  bool bernoulli(double p) { return uniform() < p; }

  RngStream split(std::string_view name) const {
    std::uint64_t h = key_ ^ 0x9e3779b97f4a7c15ull;
    for (char c : name) h = mix(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    return RngStream(h);
  }

  RngStream split(std::uint64_t salt) const {
    return RngStream(mix(key_ ^ mix(salt + 0x2545f4914f6cdd1dull)));
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;
  static constexpr double kPi = 3.14159265358979323846;

  // SplitMix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += kGolden;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace gps
