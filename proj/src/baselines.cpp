#include "ordrec/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ordrec/rng.hpp"

namespace ordrec {

namespace {

double checked_global_mean(const RatingData& data) {
  const std::vector<Rating>& obs = data.observations();
  if (obs.empty()) {
    throw std::invalid_argument("baseline needs at least one observation");
  }
  double sum = 0.0;
  for (const Rating& r : obs) sum += r.value;
  return sum / static_cast<double>(obs.size());
}

}  // namespace

double MeanBaseline::predict(int user, int item) const {
  if (mode_ == MeanMode::global) return global_;
  const int row = mode_ == MeanMode::user ? user : item;
  if (row < 0 || row >= static_cast<int>(row_mean_.size()) ||
      std::isnan(row_mean_[row])) {
    return global_;  // unseen row falls back to the global mean
  }
  return row_mean_[row];
}

MeanBaseline fit_mean_baseline(const RatingData& data, MeanMode mode) {
  MeanBaseline b;
  b.mode_ = mode;
  b.global_ = checked_global_mean(data);
  if (mode != MeanMode::global) {
    const int rows = mode == MeanMode::user ? data.n() : data.m();
    std::vector<double> sum(rows, 0.0);
    std::vector<int> count(rows, 0);
    for (const Rating& r : data.observations()) {
      const int row = mode == MeanMode::user ? r.user : r.item;
      sum[row] += r.value;
      ++count[row];
    }
    b.row_mean_.assign(rows, std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < rows; ++i) {
      if (count[i] > 0) b.row_mean_[i] = sum[i] / count[i];
    }
  }
  return b;
}

double FunkSvd::predict(int user, int item) const {
  double value = global_;
  const bool knows_user =
      user >= 0 && user < static_cast<int>(user_seen_.size()) &&
      user_seen_[user];
  const bool knows_item =
      item >= 0 && item < static_cast<int>(item_seen_.size()) &&
      item_seen_[item];
  if (knows_user) value += user_bias_[user];
  if (knows_item) value += item_bias_[item];
  if (knows_user && knows_item) {
    value += user_factors_.row(user).dot(item_factors_.row(item));
  }
  return std::clamp(value, lo_, hi_);
}

FunkSvd fit_funk_svd(const RatingData& data, const FunkSvdConfig& config) {
  if (config.factors < 1) {
    throw std::invalid_argument("Funk SVD needs factors >= 1");
  }
  if (!(config.learning_rate > 0.0)) {
    throw std::invalid_argument("Funk SVD needs a positive learning rate");
  }
  if (config.regularization < 0.0) {
    throw std::invalid_argument("Funk SVD regularization must be >= 0");
  }
  if (config.epochs < 0) {
    throw std::invalid_argument("Funk SVD epochs must be >= 0");
  }

  const std::vector<Rating>& obs = data.observations();
  FunkSvd f;
  f.global_ = checked_global_mean(data);
  f.lo_ = data.scale().min_rating();
  f.hi_ = data.scale().global_k();
  f.user_bias_ = Eigen::VectorXd::Zero(data.n());
  f.item_bias_ = Eigen::VectorXd::Zero(data.m());
  f.user_seen_.assign(data.n(), 0);
  f.item_seen_.assign(data.m(), 0);
  for (const Rating& r : obs) {
    f.user_seen_[r.user] = 1;
    f.item_seen_[r.item] = 1;
  }

  // Asymmetric start: user factors small-random, item factors zero. The
  // factor term is exactly zero before training (so epochs=0 predicts the
  // plain global mean) and the first epoch still breaks symmetry through
  // the non-zero user side.
  RandomSource rng(config.seed);
  f.user_factors_.resize(data.n(), config.factors);
  for (int i = 0; i < data.n(); ++i) {
    for (int c = 0; c < config.factors; ++c) {
      f.user_factors_(i, c) = 0.1 * rng.normal();
    }
  }
  f.item_factors_ = Eigen::MatrixXd::Zero(data.m(), config.factors);

  std::vector<int> order(obs.size());
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd uf(config.factors);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    // fresh shuffle each epoch, deterministic under the config seed
    for (std::size_t t = 0; t + 1 < order.size(); ++t) {
      std::swap(order[t],
                order[t + static_cast<std::size_t>(
                              rng.uniform_int(order.size() - t))]);
    }
    for (const int idx : order) {
      const Rating& r = obs[idx];
      const double pred = f.global_ + f.user_bias_[r.user] +
                          f.item_bias_[r.item] +
                          f.user_factors_.row(r.user)
                              .dot(f.item_factors_.row(r.item));
      const double e = r.value - pred;
      const double lr = config.learning_rate;
      const double reg = config.regularization;
      f.user_bias_[r.user] += lr * (e - reg * f.user_bias_[r.user]);
      f.item_bias_[r.item] += lr * (e - reg * f.item_bias_[r.item]);
      uf = f.user_factors_.row(r.user);
      f.user_factors_.row(r.user) +=
          lr * (e * f.item_factors_.row(r.item) -
                reg * f.user_factors_.row(r.user));
      f.item_factors_.row(r.item) +=
          lr * (e * uf.transpose() - reg * f.item_factors_.row(r.item));
    }

    double sq = 0.0;
    for (const Rating& r : obs) {
      const double e = r.value - f.predict(r.user, r.item);
      sq += e * e;
    }
    const double epoch_rmse = std::sqrt(sq / static_cast<double>(obs.size()));
    if (!std::isfinite(epoch_rmse)) {
      throw std::runtime_error(
          "Funk SVD diverged at epoch " + std::to_string(epoch) +
          ": training RMSE is not finite (try a smaller learning rate)");
    }
    f.epoch_rmse_.push_back(epoch_rmse);
  }
  return f;
}

}  // namespace ordrec
