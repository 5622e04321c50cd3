#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace grtm {

// Seedable generator with portable, cache-free variate transforms.
//
// All draws are built from the raw 64-bit engine output, so the whole
// generator state is the engine state: saving state() and restoring it
// with set_state() resumes the exact draw sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream for (seed, stream), e.g. one per fold or document.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  double normal();
  double exponential();

  // Gamma(shape, rate = 1).
  double gamma(double shape);

  std::string state() const;
  void set_state(const std::string& s);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace grtm
