#include "grtm/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "grtm/error.hpp"

namespace grtm {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPi2 = kPi * kPi;
// Switch point between the left and right series of the Jacobi density.
constexpr double kTrunc = 2.0 / kPi;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Piecewise coefficients a_n(x) of the alternating series for J*(1, 0).
double jacobi_coef(int n, double x) {
  const double h = n + 0.5;
  if (x <= kTrunc) {
    return std::exp(std::log(kPi * h) + 1.5 * std::log(2.0 / (kPi * x)) - 2.0 * h * h / x);
  }
  return kPi * h * std::exp(-0.5 * h * h * kPi2 * x);
}

// IG(mean, 1) truncated to (0, kTrunc); z = 1 / mean.
double truncated_inverse_gaussian(double z, Rng& rng) {
  const double mean = z > 0.0 ? 1.0 / z : std::numeric_limits<double>::infinity();
  if (mean > kTrunc) {
    // Propose from the truncated 1/chi^2_1 and accept with exp(-z^2 x / 2).
    for (;;) {
      double e1, e2;
      do {
        e1 = rng.exponential();
        e2 = rng.exponential();
      } while (e1 * e1 > 2.0 * e2 / kTrunc);
      const double x = kTrunc / ((1.0 + kTrunc * e1) * (1.0 + kTrunc * e1));
      if (rng.uniform() <= std::exp(-0.5 * z * z * x)) return x;
    }
  }
  for (;;) {
    const double x = sample_inverse_gaussian(mean, 1.0, rng);
    if (x < kTrunc) return x;
  }
}

// J*(1, z) for z >= 0.
double sample_jacobi_tilted(double z, Rng& rng) {
  const double k = 0.5 * z * z + kPi2 / 8.0;
  // Mixture weights of the exponential (right) and truncated IG (left)
  // envelope pieces.
  const double p = kPi / (2.0 * k) * std::exp(-k * kTrunc);
  const double sqrt_t = std::sqrt(kTrunc);
  const double left_cdf =
      normal_cdf((kTrunc * z - 1.0) / sqrt_t) +
      std::exp(2.0 * z + std::log(normal_cdf(-(kTrunc * z + 1.0) / sqrt_t)));
  const double q = 2.0 * std::exp(-z) * left_cdf;
  const double right_prob = p / (p + q);

  for (;;) {
    double x;
    if (rng.uniform() < right_prob) {
      x = kTrunc + rng.exponential() / k;
    } else {
      x = truncated_inverse_gaussian(z, rng);
    }
    double s = jacobi_coef(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= jacobi_coef(n, x);
        if (y <= s) return x;
      } else {
        s += jacobi_coef(n, x);
        if (y > s) break;
      }
    }
  }
}

bool is_integral(double b) { return b <= 1e6 && std::abs(b - std::round(b)) < 1e-12; }

}  // namespace

double sample_polya_gamma(double b, double c, Rng& rng) {
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw ArgumentError("sample_polya_gamma: b must be positive, got " + std::to_string(b));
  }
  if (!is_integral(b)) return sample_polya_gamma_series(b, c, rng);
  const double z = 0.5 * std::abs(c);
  const long n = std::lround(b);
  double sum = 0.0;
  for (long i = 0; i < n; ++i) sum += sample_jacobi_tilted(z, rng);
  return 0.25 * sum;
}

double sample_polya_gamma_series(double b, double c, Rng& rng, int terms) {
  if (!(b > 0.0)) {
    throw ArgumentError("sample_polya_gamma: b must be positive, got " + std::to_string(b));
  }
  if (terms < 1) throw ArgumentError("sample_polya_gamma_series: terms must be >= 1");
  const double a2 = c * c / (4.0 * kPi2);
  double sum = 0.0;
  for (int m = 1; m <= terms; ++m) {
    const double h = m - 0.5;
    sum += rng.gamma(b) / (h * h + a2);
  }
  // E[tail] = b * sum_{m > terms} 1 / ((m - 1/2)^2 + a2), midpoint integral.
  const double a = std::sqrt(a2);
  const double tail = a > 1e-12 ? (kPi / 2.0 - std::atan(terms / a)) / a : 1.0 / terms;
  sum += b * tail;
  return sum / (2.0 * kPi2);
}

double sample_inverse_gaussian(double mean, double shape, Rng& rng) {
  if (!(mean > 0.0) || !(shape > 0.0)) {
    throw ArgumentError("sample_inverse_gaussian: parameters must be positive (mean=" +
                        std::to_string(mean) + ", shape=" + std::to_string(shape) + ")");
  }
  const double nu = rng.normal();
  // Smaller root of the quadratic, mean * (1 + a - sqrt(a^2 + 2a)) with
  // a = mean * nu^2 / (2 shape), written without cancellation.
  const double a = mean * nu * nu / (2.0 * shape);
  const double x = mean / (1.0 + a + std::sqrt(a * a + 2.0 * a));
  if (rng.uniform() <= mean / (mean + x)) return x;
  return mean * mean / x;
}

double sample_hinge_lambda(double c, double zeta, Rng& rng) {
  if (!(c > 0.0)) throw ArgumentError("sample_hinge_lambda: c must be positive");
  const double abs_zeta = std::max(std::abs(zeta), kHingeZetaFloor);
  const double inv = sample_inverse_gaussian(1.0 / (c * abs_zeta), 1.0, rng);
  return 1.0 / inv;
}

Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& spd) {
  if (spd.rows() != spd.cols()) throw ArgumentError("cholesky_lower: matrix is not square");
  Eigen::LLT<Eigen::MatrixXd> llt(spd);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd l = llt.matrixL();
    if (l.allFinite()) return l;
  }
  // Locate the failing leading minor with an unblocked pass.
  const Eigen::Index n = spd.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = spd(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NumericalError("Cholesky factorization failed: leading minor of order " +
                           std::to_string(j + 1) + " is not positive definite");
    }
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (spd(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  throw NumericalError("Cholesky factorization failed: matrix is numerically indefinite");
}

namespace {

void check_gaussian(const PrecisionGaussian& g) {
  const Eigen::Index d = g.dim();
  if (g.precision.rows() != d || g.precision.cols() != d) {
    throw ArgumentError("PrecisionGaussian: precision must be " + std::to_string(d) + "x" +
                        std::to_string(d));
  }
  const double scale = std::max(1.0, g.precision.cwiseAbs().maxCoeff());
  const double asym = (g.precision - g.precision.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    throw ArgumentError("PrecisionGaussian: precision is not symmetric");
  }
}

}  // namespace

Eigen::VectorXd precision_gaussian_mean(const PrecisionGaussian& g) {
  check_gaussian(g);
  const Eigen::MatrixXd l = cholesky_lower(g.precision);
  Eigen::VectorXd v = l.triangularView<Eigen::Lower>().solve(g.linear_term);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(v);
  return v;
}

Eigen::VectorXd sample_precision_gaussian(const PrecisionGaussian& g, Rng& rng) {
  check_gaussian(g);
  const Eigen::MatrixXd l = cholesky_lower(g.precision);
  // precision = L L^T, so mean = L^-T L^-1 b and L^-T eps has covariance
  // precision^-1.
  Eigen::VectorXd v = l.triangularView<Eigen::Lower>().solve(g.linear_term);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += rng.normal();
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(v);
  return v;
}

}  // namespace grtm
