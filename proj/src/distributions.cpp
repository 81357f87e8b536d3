#include "ordrec/distributions.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ordrec {

namespace {

constexpr double kPi = 3.14159265358979323846;

// --- exact PG(1, z) sampler, Devroye-style alternating-series rejection ---
//
// Follows Polson, Scott & Windle (2013) and Devroye (2009): propose from a
// mixture of a truncated inverse-Gaussian (left of the split point t) and a
// truncated exponential (right of t), then accept via the alternating series
// for the Jacobi density. t = 0.64 is the standard split point.

constexpr double kTrunc = 0.64;

// log Phi(x), stable far into the left tail where erfc underflows.
double log_norm_cdf(double x) {
  if (x > -30.0) {
    return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
  }
  const double x2 = x * x;
  return -0.5 * x2 - 0.5 * std::log(2.0 * kPi) - std::log(-x) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

// Coefficient a_n(x) of the alternating series, piecewise around t.
double series_coef(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kTrunc) {
    return k * std::exp(-0.5 * k * k * x);
  }
  if (x > 0.0) {
    const double expnt = -1.5 * (std::log(0.5 * kPi) + std::log(x)) +
                         std::log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x;
    return std::exp(expnt);
  }
  return 0.0;
}

// Probability that the proposal comes from the truncated-exponential branch.
double mass_texpon(double z) {
  const double t = kTrunc;
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
  const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);
  const double x0 = std::log(fz) + fz * t;
  const double xb = x0 - z + log_norm_cdf(b);
  const double xa = x0 + z + log_norm_cdf(a);
  const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + qdivp);
}

// Inverse-Gaussian(mu = 1/z, lambda = 1) truncated to (0, t].
double rtigauss(double z, RandomSource& rng) {
  z = std::fabs(z);
  const double t = kTrunc;
  double x = t + 1.0;
  if (1.0 / t > z) {
    // mu > t: rejection from the chi-based proposal for the truncated region
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1;
      double e2;
      do {
        e1 = rng.exponential();
        e2 = rng.exponential();
      } while (e1 * e1 > 2.0 * e2 / t);
      x = 1.0 + e1 * t;
      x = t / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    }
  } else {
    const double mu = 1.0 / z;
    while (x > t) {
      double y = rng.normal();
      y *= y;
      const double half_mu = 0.5 * mu;
      const double mu_y = mu * y;
      x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
      if (rng.uniform() > mu / (mu + x)) {
        x = mu * mu / x;
      }
    }
  }
  return x;
}

double draw_pg1(double tilt, RandomSource& rng) {
  const double z = 0.5 * std::fabs(tilt);
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  for (;;) {
    double x;
    if (rng.uniform() < mass_texpon(z)) {
      x = kTrunc + rng.exponential() / fz;
    } else {
      x = rtigauss(z, rng);
    }
    // Alternating-series accept/reject on the proposed x.
    double s = series_coef(0, x);
    const double y = rng.uniform() * s;
    int n = 0;
    for (;;) {
      ++n;
      if (n % 2 == 1) {
        s -= series_coef(n, x);
        if (y <= s) return 0.25 * x;  // accepted
      } else {
        s += series_coef(n, x);
        if (y > s) break;  // rejected, repropose
      }
    }
  }
}

int trials_of(const ShiftedBinomialParams& params) {
  return params.support_base == SupportBase::one_based ? params.k - 1
                                                       : params.k;
}

void check_shifted_binomial(const ShiftedBinomialParams& params) {
  if (params.k < 2) {
    throw std::invalid_argument("shifted binomial needs k >= 2, got k=" +
                                std::to_string(params.k));
  }
  if (!(params.p >= 0.0 && params.p <= 1.0)) {
    throw std::invalid_argument("shifted binomial needs p in [0,1], got p=" +
                                std::to_string(params.p));
  }
}

double log_choose(int n, int x) {
  return std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0);
}

}  // namespace

double sample_pg(const PolyaGammaParams& params, RandomSource& rng) {
  if (params.shape < 1) {
    throw std::invalid_argument("PG shape must be a positive integer, got " +
                                std::to_string(params.shape));
  }
  if (!std::isfinite(params.tilt)) {
    throw std::invalid_argument("PG tilt must be finite");
  }
  double sum = 0.0;
  for (int i = 0; i < params.shape; ++i) {
    sum += draw_pg1(params.tilt, rng);
  }
  return sum;
}

double pg_mean(const PolyaGammaParams& params) {
  const double b = params.shape;
  const double c = params.tilt;
  if (std::fabs(c) < 1e-8) {
    return 0.25 * b;  // limit of (b/2c) tanh(c/2)
  }
  return b / (2.0 * c) * std::tanh(0.5 * c);
}

Eigen::VectorXd sample_mvn_from_precision(const Eigen::MatrixXd& precision,
                                          const Eigen::VectorXd& linear_term,
                                          RandomSource& rng) {
  const Eigen::Index dim = precision.rows();
  if (precision.cols() != dim || linear_term.size() != dim) {
    throw std::invalid_argument("precision/linear term dimensions disagree");
  }
  if (!precision.isApprox(precision.transpose(), 1e-10)) {
    throw std::invalid_argument("precision matrix must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    // Name the first failing leading minor for the diagnostic.
    for (Eigen::Index d = 1; d <= dim; ++d) {
      if (Eigen::LLT<Eigen::MatrixXd>(precision.topLeftCorner(d, d)).info() !=
          Eigen::Success) {
        throw std::runtime_error(
            "precision matrix is not positive definite: leading minor of "
            "order " +
            std::to_string(d) + " failed Cholesky factorization");
      }
    }
    throw std::runtime_error("precision matrix is not positive definite");
  }
  const Eigen::VectorXd mean = llt.solve(linear_term);
  Eigen::VectorXd noise(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    noise[i] = rng.normal();
  }
  // x = mean + U^-1 noise has covariance U^-1 U^-T = P^-1.
  return mean + llt.matrixU().solve(noise);
}

double sample_inverse_gamma(double shape, double scale, RandomSource& rng) {
  if (!(shape > 0.0) || !(scale > 0.0)) {
    throw std::invalid_argument(
        "inverse-gamma needs positive shape and scale, got shape=" +
        std::to_string(shape) + " scale=" + std::to_string(scale));
  }
  return scale / rng.gamma(shape);
}

int support_min(const ShiftedBinomialParams& params) {
  return params.support_base == SupportBase::one_based ? 1 : 0;
}

int support_max(const ShiftedBinomialParams& params) { return params.k; }

double shifted_binomial_log_pmf(int r, const ShiftedBinomialParams& params) {
  check_shifted_binomial(params);
  if (r < support_min(params) || r > support_max(params)) {
    throw std::out_of_range(
        "rating " + std::to_string(r) + " outside declared support {" +
        std::to_string(support_min(params)) + ".." +
        std::to_string(support_max(params)) + "}");
  }
  const int trials = trials_of(params);
  const int successes = r - support_min(params);
  // Degenerate p handled as exact point masses rather than via log(0).
  if (params.p == 0.0) {
    return successes == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  }
  if (params.p == 1.0) {
    return successes == trials ? 0.0
                               : -std::numeric_limits<double>::infinity();
  }
  return log_choose(trials, successes) + successes * std::log(params.p) +
         (trials - successes) * std::log1p(-params.p);
}

double shifted_binomial_pmf(int r, const ShiftedBinomialParams& params) {
  return std::exp(shifted_binomial_log_pmf(r, params));
}

int sample_shifted_binomial(const ShiftedBinomialParams& params,
                            RandomSource& rng) {
  check_shifted_binomial(params);
  const int trials = trials_of(params);
  const int shift = support_min(params);
  if (params.p == 0.0) return shift;
  if (params.p == 1.0) return shift + trials;
  // Inverse-CDF walk; one uniform per draw, pmf advanced by recurrence.
  const double u = rng.uniform();
  const double odds = params.p / (1.0 - params.p);
  double pmf = std::pow(1.0 - params.p, trials);
  double cdf = pmf;
  int x = 0;
  while (cdf < u && x < trials) {
    pmf *= odds * (trials - x) / (x + 1.0);
    ++x;
    cdf += pmf;
  }
  return shift + x;
}

double shifted_binomial_mean(const ShiftedBinomialParams& params) {
  check_shifted_binomial(params);
  const double trials = trials_of(params);
  return support_min(params) + trials * params.p;
}

}  // namespace ordrec
