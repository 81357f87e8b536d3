#pragma once

#include <cstdint>
#include <vector>

#include "ordrec/model.hpp"
#include "ordrec/rng.hpp"

namespace ordrec {

// Recipe for a synthetic rating dataset: covariates and coefficients drawn
// i.i.d. standard normal, optional latent factors with a fixed fraction of
// entries forced to zero, and a fixed number of observed items per user.
struct SimConfig {
  int n = 0;  // users
  int m = 0;  // items
  int p = 0;  // user covariates
  int q = 0;  // item covariates
  int k = 5;  // rating categories, support {1..k}
  PredictorForm form = PredictorForm::linear;
  int rated_per_user = 1;         // |M_i|: items observed per user
  int latent_rank = 0;            // 0 disables the latent term
  double latent_sparsity = 0.75;  // fraction of U and V entries zeroed
  int replicates = 20;            // replicate datasets per study
  std::uint64_t seed = 0;
};

// One synthetic dataset together with its generating truth. Every cell of
// the n x m grid receives a rating; cells outside the per-user observed sets
// are returned in held_out so prediction error against the truth can be
// computed without re-deriving anything.
struct SimulatedData {
  CovariateSet covariates;
  Coefficients coefficients;  // generating truth
  LatentFactors latent;       // generating truth; rank 0 when disabled
  RatingData observed;
  std::vector<Rating> held_out;
};

// Seed for replicate `index` of a study, derived from the config seed so each
// replicate is reproducible in isolation. Requires 0 <= index < replicates.
std::uint64_t replicate_seed(const SimConfig& config, int index);

// Draws one rating for every cell of the grid, row-major, under the given
// truth. Used by simulate_dataset; exposed so the generative law can be
// tested directly (e.g. zero coefficients give Binomial(k-1, 1/2) + 1).
std::vector<Rating> sample_rating_grid(const CovariateSet& cov,
                                       const Coefficients& coef,
                                       const LatentFactors& latent, int k,
                                       RandomSource& rng);

SimulatedData simulate_dataset(const SimConfig& config);

}  // namespace ordrec
