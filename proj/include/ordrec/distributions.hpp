#pragma once

#include <Eigen/Dense>

#include "ordrec/rng.hpp"

namespace ordrec {

// Polya-Gamma PG(shape, tilt) with integer shape >= 1. The sampler draws it
// as a sum of `shape` exact PG(1, tilt) variates (Devroye-style rejection),
// which is exact and fast for the small shapes an ordinal rating scale
// produces.
struct PolyaGammaParams {
  int shape = 1;    // number of PG(1, tilt) summands
  double tilt = 0;  // the linear predictor entering the augmentation
};

double sample_pg(const PolyaGammaParams& params, RandomSource& rng);

// Analytic mean (shape/2c)*tanh(c/2), with the c -> 0 limit shape/4.
double pg_mean(const PolyaGammaParams& params);

// Draw from N(P^-1 l, P^-1) given the precision P and linear term l, via one
// Cholesky factorization and triangular solves; the inverse is never formed.
Eigen::VectorXd sample_mvn_from_precision(const Eigen::MatrixXd& precision,
                                          const Eigen::VectorXd& linear_term,
                                          RandomSource& rng);

// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale/x).
double sample_inverse_gamma(double shape, double scale, RandomSource& rng);

// The ordinal observation law: a Binomial(k-1, p) shifted onto {1..k}
// (one_based), or plain Binomial(k, p) on {0..k} (zero_based).
enum class SupportBase { one_based, zero_based };

struct ShiftedBinomialParams {
  int k = 2;       // number of categories (one_based) / top category (zero_based)
  double p = 0.5;  // success probability
  SupportBase support_base = SupportBase::one_based;
};

int support_min(const ShiftedBinomialParams& params);
int support_max(const ShiftedBinomialParams& params);

// pmf at r. Out-of-support r is an error rather than 0, to catch data
// encoding bugs loudly. Degenerate p in {0,1} gives exact point masses.
double shifted_binomial_pmf(int r, const ShiftedBinomialParams& params);
double shifted_binomial_log_pmf(int r, const ShiftedBinomialParams& params);

int sample_shifted_binomial(const ShiftedBinomialParams& params,
                            RandomSource& rng);

// E[r] = 1 + (k-1)p for one_based, k*p for zero_based.
double shifted_binomial_mean(const ShiftedBinomialParams& params);

}  // namespace ordrec
