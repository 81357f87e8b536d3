#pragma once

#include <cstdint>
#include <vector>

#include "ordrec/model.hpp"

namespace ordrec {

enum class MeanMode { global, user, item };

// Mean-rating predictor: the global mean, or per-user / per-item means with
// a global-mean fallback for rows unseen in training.
class MeanBaseline {
 public:
  double predict(int user, int item) const;
  MeanMode mode() const { return mode_; }
  double global_mean() const { return global_; }

 private:
  friend MeanBaseline fit_mean_baseline(const RatingData&, MeanMode);
  MeanMode mode_ = MeanMode::global;
  double global_ = 0.0;
  std::vector<double> row_mean_;  // by user or item, NaN when unseen
};

MeanBaseline fit_mean_baseline(const RatingData& data, MeanMode mode);

// Funk-style stochastic-gradient matrix factorization with user/item biases
// and L2 regularization (Funk 2006, the Netflix-prize recipe).
struct FunkSvdConfig {
  int factors = 10;
  double learning_rate = 0.005;
  double regularization = 0.02;
  int epochs = 50;
  std::uint64_t seed = 0;
};

class FunkSvd {
 public:
  // Predictions are clamped to the rating range; users/items unseen in
  // training fall back to the global mean plus any known bias, omitting the
  // factor term.
  double predict(int user, int item) const;
  // Training RMSE measured after each epoch.
  const std::vector<double>& epoch_rmse() const { return epoch_rmse_; }

 private:
  friend FunkSvd fit_funk_svd(const RatingData&, const FunkSvdConfig&);
  double global_ = 0.0;
  double lo_ = 1.0;
  double hi_ = 5.0;
  Eigen::VectorXd user_bias_;
  Eigen::VectorXd item_bias_;
  Eigen::MatrixXd user_factors_;  // n x factors
  Eigen::MatrixXd item_factors_;  // m x factors
  std::vector<char> user_seen_;
  std::vector<char> item_seen_;
  std::vector<double> epoch_rmse_;
};

// Throws std::runtime_error naming the epoch if training RMSE becomes
// non-finite (divergence, typically a too-large learning rate).
FunkSvd fit_funk_svd(const RatingData& data, const FunkSvdConfig& config);

}  // namespace ordrec
