#pragma once

#include <Eigen/Dense>

#include "grtm/rng.hpp"

namespace grtm {

// Number of gamma terms kept when PG(b, c) is drawn for non-integer b.
inline constexpr int kPolyaGammaTruncationTerms = 200;

// |zeta| is clamped to this before the hinge augmentation draw.
inline constexpr double kHingeZetaFloor = 1e-8;

// Gaussian in information form: mean = precision^-1 * linear_term.
struct PrecisionGaussian {
  Eigen::MatrixXd precision;
  Eigen::VectorXd linear_term;

  Eigen::Index dim() const { return linear_term.size(); }
};

// Draw from PG(b, c).
//
// Integer b sums b exact PG(1, c) draws (alternating-series sampler on the
// tilted Jacobi distribution). Non-integer b uses the gamma-series
// definition truncated after `kPolyaGammaTruncationTerms` terms; the
// expected value of the dropped tail is added back so the mean is unbiased
// to O(1e-7).
double sample_polya_gamma(double b, double c, Rng& rng);

// The truncated gamma-series draw, exposed so both routes can be compared.
double sample_polya_gamma_series(double b, double c, Rng& rng,
                                 int terms = kPolyaGammaTruncationTerms);

// IG(mean, shape) via the transformation with multiple roots
// (Michael, Schucany & Haas).
double sample_inverse_gaussian(double mean, double shape, Rng& rng);

// lambda ~ GIG(1/2, 1, c^2 zeta^2), drawn as 1 / IG(1 / (c |zeta|), 1).
double sample_hinge_lambda(double c, double zeta, Rng& rng);

// Lower Cholesky factor of an SPD matrix. Throws NumericalError naming the
// first leading minor that is not positive.
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& spd);

// One draw from N(precision^-1 linear_term, precision^-1) by factoring the
// precision and back-substituting; the inverse is never formed.
Eigen::VectorXd sample_precision_gaussian(const PrecisionGaussian& g, Rng& rng);

// Mean of the information-form Gaussian (deterministic part of the draw).
Eigen::VectorXd precision_gaussian_mean(const PrecisionGaussian& g);

}  // namespace grtm
