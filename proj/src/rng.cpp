#include "grtm/rng.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "grtm/error.hpp"

namespace grtm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL)));
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw ArgumentError("uniform_index: n must be positive");
  // Lemire-style rejection on the top of the range.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

namespace {

// Marsaglia & Tsang (2000) ziggurat with 128 layers. The low 7 bits of a
// draw pick the layer and the top 56 bits give a signed 55-bit abscissa.
struct Ziggurat {
  static constexpr double kR = 3.442619855899;
  static constexpr double kScale = 36028797018963968.0;  // 2^55
  std::int64_t k[128];
  double w[128];
  double f[128];

  Ziggurat() {
    const double v = 9.91256303526217e-3;
    double dn = kR, tn = kR;
    const double q = v / std::exp(-0.5 * dn * dn);
    k[0] = static_cast<std::int64_t>((dn / q) * kScale);
    k[1] = 0;
    w[0] = q / kScale;
    w[127] = dn / kScale;
    f[0] = 1.0;
    f[127] = std::exp(-0.5 * dn * dn);
    for (int i = 126; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(v / dn + std::exp(-0.5 * dn * dn)));
      k[i + 1] = static_cast<std::int64_t>((dn / tn) * kScale);
      tn = dn;
      f[i] = std::exp(-0.5 * dn * dn);
      w[i] = dn / kScale;
    }
  }
};

const Ziggurat kZig;

}  // namespace

double Rng::normal() {
  for (;;) {
    const std::uint64_t u = engine_();
    const int i = static_cast<int>(u & 127);
    const std::int64_t h = static_cast<std::int64_t>(u) >> 8;
    const double x = static_cast<double>(h) * kZig.w[i];
    if ((h < 0 ? -h : h) < kZig.k[i]) return x;
    if (i == 0) {
      // Tail beyond R.
      double tx, ty;
      do {
        tx = -std::log(uniform()) / Ziggurat::kR;
        ty = -std::log(uniform());
      } while (ty + ty < tx * tx);
      return h > 0 ? Ziggurat::kR + tx : -Ziggurat::kR - tx;
    }
    if (kZig.f[i] + uniform() * (kZig.f[i - 1] - kZig.f[i]) < std::exp(-0.5 * x * x)) return x;
  }
}

double Rng::exponential() { return -std::log(uniform()); }

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw ArgumentError("gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost to shape + 1 and rescale by U^(1/shape).
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform(), 1.0 / shape);
  }
  // Marsaglia & Tsang (2000).
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (!is) throw FormatError("invalid RNG state");
}

}  // namespace grtm
