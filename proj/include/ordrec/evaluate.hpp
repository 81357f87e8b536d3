#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ordrec/baselines.hpp"
#include "ordrec/model.hpp"
#include "ordrec/sampler.hpp"

namespace ordrec {

struct CellPrediction {
  int user = 0;
  int item = 0;
  double point = 0.0;   // posterior-predictive mean, real-valued
  double lower = 0.0;   // central credible interval, in rating units
  double upper = 0.0;
  Eigen::VectorXd pmf;  // predictive pmf over the support, averaged over draws
};

struct PredictionResult {
  int k = 2;
  SupportBase support_base = SupportBase::one_based;
  double ci_level = 0.95;
  std::vector<CellPrediction> cells;
};

struct PredictOptions {
  double ci_level = 0.95;
  // true: plug the posterior-mean parameters into a single pmf instead of
  // averaging per-draw pmfs (cheaper, but ignores parameter uncertainty).
  bool plug_in = false;
};

// Posterior-predictive distribution for each requested (user, item) cell.
// Per retained draw the predictor gives a success probability; the per-draw
// shifted-binomial pmfs are averaged, the point prediction is the mean of
// the averaged pmf, and the interval is equal-tailed on its CDF.
//
// Cold start: rows beyond the training dimensions require cold_start=true
// (otherwise the offending index is named in the error) and always use the
// covariate-only predictor. Rows inside the training dimensions that had no
// training observations also drop the latent term when cold_start is set,
// since their latent factors were never informed by data.
PredictionResult predict(const PosteriorDraws& draws, const CovariateSet& cov,
                         const std::vector<std::pair<int, int>>& cells,
                         bool cold_start, const PredictOptions& options = {});

// Point predictions only. The shifted-binomial mean is affine in the success
// probability, so averaging per-draw means equals the mean of the averaged
// pmf; this path skips the pmfs entirely and is the one to use in RMSE loops.
Eigen::VectorXd predict_points(const PosteriorDraws& draws,
                               const CovariateSet& cov,
                               const std::vector<std::pair<int, int>>& cells,
                               bool cold_start);

double rmse(const std::vector<double>& predicted,
            const std::vector<double>& actual);
double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual);

// Type-7 quantile: linear interpolation between order statistics, the
// default rule in R and NumPy. prob must lie in [0, 1].
double quantile(std::vector<double> values, double prob);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double lower = 0.0;  // equal-tailed interval bounds at the requested level
  double upper = 0.0;
};

// Per-column posterior summaries. Requires at least two retained draws.
std::vector<ParameterSummary> posterior_summary(
    const Eigen::MatrixXd& draws, const std::vector<std::string>& names,
    double ci_level = 0.95);
// All parameter blocks of a fit: coefficients, then U, then V entries.
std::vector<ParameterSummary> posterior_summary(const PosteriorDraws& draws,
                                                double ci_level = 0.95);

// --- cross-validation harness ------------------------------------------

struct GibbsModel {
  PredictorForm form = PredictorForm::linear;
  ChainConfig chain;
};
struct MeanModel {
  MeanMode mode = MeanMode::item;
};
struct FunkSvdModel {
  FunkSvdConfig config;
};

struct ModelSpec {
  std::string name;
  std::variant<GibbsModel, MeanModel, FunkSvdModel> model;
};

struct FoldOutcome {
  int fold = 0;
  bool ok = false;
  double rmse = 0.0;
  int test_count = 0;
  std::string error;  // populated when ok is false
};

struct CvReport {
  std::string model;
  int folds = 0;
  std::uint64_t seed = 0;
  std::vector<FoldOutcome> fold_outcomes;
  double mean_rmse = std::numeric_limits<double>::quiet_NaN();
  double sd_rmse = std::numeric_limits<double>::quiet_NaN();
  int failed_folds = 0;

  // Table-cell format, e.g. "0.91 (0.04)"; "failed" if no fold succeeded.
  std::string display() const;
};

// K-fold cross-validation over the observed cells (uniform random
// partition). Each model is fit on every training fold and scored by RMSE
// of point predictions on the held-out fold; test users/items absent from
// a training fold are predicted cold-start. A model failing on a fold
// (e.g. rank-deficient training covariates) records the error on that fold
// instead of aborting the sweep. Chain and Funk-SVD seeds are derived from
// `seed`, making reports reproducible. `threads` caps concurrent fits.
std::vector<CvReport> cross_validate(const RatingData& data,
                                     const CovariateSet& cov,
                                     const std::vector<ModelSpec>& models,
                                     int folds = 5, std::uint64_t seed = 0,
                                     int threads = 1);

}  // namespace ordrec
