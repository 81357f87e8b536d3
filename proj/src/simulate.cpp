#include "ordrec/simulate.hpp"

#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "ordrec/distributions.hpp"

namespace ordrec {

namespace {

void validate_config(const SimConfig& c) {
  if (c.n < 1 || c.m < 1) {
    throw std::invalid_argument("simulation needs n >= 1 users and m >= 1 items");
  }
  if (c.p < 1 || c.q < 1) {
    throw std::invalid_argument(
        "simulation needs p >= 1 user covariates and q >= 1 item covariates");
  }
  if (c.k < 2) {
    throw std::invalid_argument("rating scale needs k >= 2 categories; got " +
                                std::to_string(c.k));
  }
  if (c.rated_per_user < 1 || c.rated_per_user > c.m) {
    throw std::invalid_argument(
        "rated_per_user (|M_i|) must be in [1, m]; got " +
        std::to_string(c.rated_per_user) + " with m = " + std::to_string(c.m));
  }
  if (c.latent_rank < 0) {
    throw std::invalid_argument("latent_rank must be non-negative");
  }
  if (!(c.latent_sparsity >= 0.0 && c.latent_sparsity <= 1.0)) {
    throw std::invalid_argument("latent_sparsity must lie in [0, 1]");
  }
  if (c.replicates < 1) {
    throw std::invalid_argument("replicates must be >= 1");
  }
}

Eigen::MatrixXd standard_normal_matrix(int rows, int cols, RandomSource& rng) {
  Eigen::MatrixXd a(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) a(i, j) = rng.normal();
  }
  return a;
}

// Zeroes exactly floor(fraction * size) entries, chosen uniformly without
// replacement via a partial Fisher-Yates pass over flat row-major indices.
void zero_fraction(Eigen::MatrixXd& a, double fraction, RandomSource& rng) {
  const int size = static_cast<int>(a.size());
  const int zeros = static_cast<int>(fraction * size);
  std::vector<int> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  const int cols = static_cast<int>(a.cols());
  for (int t = 0; t < zeros; ++t) {
    std::swap(idx[t], idx[t + static_cast<int>(rng.uniform_int(
                                static_cast<std::uint64_t>(size - t)))]);
    a(idx[t] / cols, idx[t] % cols) = 0.0;
  }
}

}  // namespace

std::uint64_t replicate_seed(const SimConfig& config, int index) {
  if (index < 0 || index >= config.replicates) {
    throw std::invalid_argument("replicate index " + std::to_string(index) +
                                " outside [0, " +
                                std::to_string(config.replicates) + ")");
  }
  return derive_seed(config.seed, static_cast<std::uint64_t>(index));
}

std::vector<Rating> sample_rating_grid(const CovariateSet& cov,
                                       const Coefficients& coef,
                                       const LatentFactors& latent, int k,
                                       RandomSource& rng) {
  const int n = static_cast<int>(cov.X.rows());
  const int m = static_cast<int>(cov.Y.rows());
  const bool has_latent = latent.rank() > 0;
  std::vector<Rating> ratings;
  ratings.reserve(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double eta = predictor(cov.X.row(i), cov.Y.row(j), coef);
      if (has_latent) eta += latent.U.row(i).dot(latent.V.row(j));
      ratings.push_back(
          {i, j, sample_shifted_binomial({k, logistic(eta)}, rng)});
    }
  }
  return ratings;
}

SimulatedData simulate_dataset(const SimConfig& config) {
  validate_config(config);
  RandomSource rng(config.seed);

  CovariateSet cov{standard_normal_matrix(config.n, config.p, rng),
                   standard_normal_matrix(config.m, config.q, rng)};

  const int d = coefficient_dim(config.form, config.p, config.q);
  Eigen::VectorXd values(d);
  for (int i = 0; i < d; ++i) values[i] = rng.normal();
  Coefficients coef{config.form, config.p, config.q, std::move(values)};

  LatentFactors latent;
  if (config.latent_rank > 0) {
    latent.U = standard_normal_matrix(config.n, config.latent_rank, rng);
    zero_fraction(latent.U, config.latent_sparsity, rng);
    latent.V = standard_normal_matrix(config.m, config.latent_rank, rng);
    zero_fraction(latent.V, config.latent_sparsity, rng);
  } else {
    latent.U.resize(config.n, 0);
    latent.V.resize(config.m, 0);
  }

  // |M_i| distinct observed items per user, sampled uniformly.
  std::vector<std::vector<char>> is_observed(
      config.n, std::vector<char>(config.m, 0));
  std::vector<int> items(config.m);
  for (int i = 0; i < config.n; ++i) {
    std::iota(items.begin(), items.end(), 0);
    for (int t = 0; t < config.rated_per_user; ++t) {
      std::swap(items[t],
                items[t + static_cast<int>(rng.uniform_int(
                              static_cast<std::uint64_t>(config.m - t)))]);
      is_observed[i][items[t]] = 1;
    }
  }

  const std::vector<Rating> grid =
      sample_rating_grid(cov, coef, latent, config.k, rng);
  std::vector<Rating> in_sample;
  std::vector<Rating> held_out;
  in_sample.reserve(static_cast<std::size_t>(config.n) * config.rated_per_user);
  held_out.reserve(grid.size() - in_sample.capacity());
  for (const Rating& r : grid) {
    (is_observed[r.user][r.item] ? in_sample : held_out).push_back(r);
  }

  RatingData observed(config.n, config.m, in_sample, RatingScale(config.k));
  return SimulatedData{std::move(cov), std::move(coef), std::move(latent),
                       std::move(observed), std::move(held_out)};
}

}  // namespace ordrec
