#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ordrec/model.hpp"
#include "ordrec/rng.hpp"

namespace ordrec {

// Horseshoe shrinkage block: per-entry local scales lambda^2 with auxiliaries
// nu, one global scale tau^2 with auxiliary zeta, all updated through chained
// inverse-gamma conditionals (Makalic & Schmidt 2016 parameterization). The
// induced prior covariance diagonal is tau^2 * lambda^2; its inverse is the
// precision entering the Gaussian updates.
struct HorseshoeBlock {
  Eigen::VectorXd lambda2;
  Eigen::VectorXd nu;
  double tau2 = 1.0;
  double zeta = 1.0;

  HorseshoeBlock() = default;
  explicit HorseshoeBlock(int dim)
      : lambda2(Eigen::VectorXd::Ones(dim)), nu(Eigen::VectorXd::Ones(dim)) {}

  int dim() const { return static_cast<int>(lambda2.size()); }
  Eigen::VectorXd prior_variance() const { return tau2 * lambda2; }
};

// One sweep of the inverse-gamma chain given the current block values.
void step_horseshoe(const Eigen::VectorXd& values, HorseshoeBlock& block,
                    RandomSource& rng);

struct ChainConfig {
  int iterations = 2000;
  int burn_in = 1000;
  int thin = 1;
  std::uint64_t seed = 0;
  int latent_rank = 0;  // l; 0 disables latent factors
  bool sparse_coefficients = false;
  bool sparse_latent = true;  // forced true whenever latent_rank > 0
  // Zero vector / identity matrix when absent. Supplying an informative
  // prior covariance bypasses the identifiability guard.
  std::optional<Eigen::VectorXd> prior_mean;
  std::optional<Eigen::MatrixXd> prior_covariance;
  int progress_every = 100;
};

// Precomputed per-observation quantities: design rows, centered ratings and
// PG shapes. Only observed cells appear anywhere ("trimming") — unobserved
// cells would contribute omega = 0, kappa = 0 rows, i.e. nothing.
struct SamplerWorkspace {
  int n = 0;
  int m = 0;
  int p = 0;
  int q = 0;
  int d = 0;
  PredictorForm form = PredictorForm::linear;
  std::vector<Rating> cells;  // observation order
  Eigen::MatrixXd design;     // obs x d rows z_ij
  Eigen::VectorXd kappa;      // successes - trials/2 per observation
  Eigen::VectorXi trials;     // PG shape per observation (k_ij - 1 one_based)
  std::vector<std::vector<int>> cells_by_user;  // indices into cells
  std::vector<std::vector<int>> cells_by_item;
};

SamplerWorkspace make_sampler_workspace(const RatingData& data,
                                        const CovariateSet& cov,
                                        PredictorForm form);

struct ChainState {
  Coefficients coef;
  Eigen::VectorXd omega;  // aligned with SamplerWorkspace::cells
  LatentFactors latent;
  HorseshoeBlock hs_coefficients;
  HorseshoeBlock hs_u;
  HorseshoeBlock hs_v;
};

// omega_ij ~ PG(trials_ij, eta_ij) for every observed cell, with eta the full
// predictor including the latent term when enabled.
void step_omega(const SamplerWorkspace& ws, ChainState& state,
                RandomSource& rng);

struct GaussianSystem {
  Eigen::MatrixXd precision;
  Eigen::VectorXd linear_term;
};

// Precision Sigma0^-1 + Z^T Omega Z and linear term Sigma0^-1 mu0 +
// Z^T (kappa - Omega * latent offset); the draw is N(P^-1 l, P^-1).
GaussianSystem assemble_coefficient_system(
    const SamplerWorkspace& ws, const ChainState& state,
    const Eigen::MatrixXd& prior_precision,
    const Eigen::VectorXd& prior_precision_times_mean);

// Algebraically identical route through xi = kappa/omega (the residual-target
// form of the update), with omega floored at 1e-12 before the division. Kept
// as a separately exercised path so the identity stays tested.
GaussianSystem assemble_coefficient_system_xi(
    const SamplerWorkspace& ws, const ChainState& state,
    const Eigen::MatrixXd& prior_precision,
    const Eigen::VectorXd& prior_precision_times_mean);

void step_coefficients(const SamplerWorkspace& ws, ChainState& state,
                       const Eigen::MatrixXd& prior_precision,
                       const Eigen::VectorXd& prior_precision_times_mean,
                       RandomSource& rng);

// Latent-factor updates. Under a diagonal prior the joint precision over
// vec(U) is block-diagonal per user (the Kronecker design never couples two
// users), so each user's l x l block is drawn in turn; items likewise. The
// draws are identical to a single joint draw in user-grouped ordering.
// prior_variance holds the per-entry prior variances, n*l (resp. m*l) long,
// entry i*l + l' belonging to U[i, l'].
void step_latent_u(const SamplerWorkspace& ws, ChainState& state,
                   const Eigen::VectorXd& prior_variance, RandomSource& rng);
void step_latent_v(const SamplerWorkspace& ws, ChainState& state,
                   const Eigen::VectorXd& prior_variance, RandomSource& rng);

struct PosteriorDraws {
  PredictorForm form = PredictorForm::linear;
  int p = 0;
  int q = 0;
  int n = 0;
  int m = 0;
  int latent_rank = 0;
  int k = 2;
  SupportBase support_base = SupportBase::one_based;
  std::uint64_t seed = 0;
  int iterations = 0;
  int burn_in = 0;
  int thin = 0;
  bool sparse_coefficients = false;

  Eigen::MatrixXd coefficients;  // draws x d
  Eigen::MatrixXd latent_u;      // draws x n*l, entry i*l+l' = U[i, l']
  Eigen::MatrixXd latent_v;      // draws x m*l, entry j*l+l' = V[j, l']
  std::vector<char> user_observed;  // had >= 1 training observation
  std::vector<char> item_observed;

  int draw_count() const { return static_cast<int>(coefficients.rows()); }
  std::vector<std::string> coefficient_names() const;  // b[1] / B[1,2] style
  std::vector<std::string> latent_u_names() const;     // U[3,1] style
  std::vector<std::string> latent_v_names() const;

  // Posterior mean of F = U V^T, recomputed from the draws (U and V are
  // individually unidentified; only their product is meaningful).
  Eigen::MatrixXd latent_product_mean() const;
};

using ProgressSink = std::function<void(int iteration, double log_likelihood)>;

// The Gibbs driver: iterate omega -> coefficients -> U -> V -> horseshoe
// blocks, retaining every thin-th draw after burn-in. Fully reproducible
// from the seed.
PosteriorDraws gibbs_fit(const RatingData& data, const CovariateSet& cov,
                         PredictorForm form, const ChainConfig& config,
                         const ProgressSink& progress = {});

}  // namespace ordrec
