#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ordrec/distributions.hpp"

namespace ordrec {

struct Rating {
  int user = 0;
  int item = 0;
  int value = 0;
};

// Rating scale: a global k plus an optional sparse per-cell override map for
// datasets where different cells use different maximum ratings.
class RatingScale {
 public:
  RatingScale(int k, SupportBase base = SupportBase::one_based)
      : k_(k), base_(base) {}

  void set_cell_k(int user, int item, int k);
  int k_for(int user, int item) const;
  int global_k() const { return k_; }
  SupportBase base() const { return base_; }
  int min_rating() const { return base_ == SupportBase::one_based ? 1 : 0; }
  bool has_overrides() const { return !overrides_.empty(); }
  const std::unordered_map<std::int64_t, int>& overrides() const {
    return overrides_;
  }

  static std::int64_t cell_key(int user, int item) {
    return (static_cast<std::int64_t>(user) << 32) |
           static_cast<std::uint32_t>(item);
  }

 private:
  int k_;
  SupportBase base_;
  std::unordered_map<std::int64_t, int> overrides_;
};

// Observed ratings in triplet form. Construction validates index ranges,
// duplicates and support membership, so downstream code can assume a clean
// observation list. Unobserved cells simply do not appear ("trimming").
class RatingData {
 public:
  RatingData(int n, int m, std::vector<Rating> observations, RatingScale scale);

  int n() const { return n_; }
  int m() const { return m_; }
  const std::vector<Rating>& observations() const { return observations_; }
  const RatingScale& scale() const { return scale_; }

  // M_i: items rated by each user, in observation order.
  const std::vector<std::vector<int>>& items_by_user() const {
    return items_by_user_;
  }
  bool is_observed(int user, int item) const {
    return observed_.count(RatingScale::cell_key(user, item)) > 0;
  }

 private:
  int n_;
  int m_;
  std::vector<Rating> observations_;
  RatingScale scale_;
  std::vector<std::vector<int>> items_by_user_;
  std::unordered_map<std::int64_t, int> observed_;  // cell -> observation idx
};

struct CovariateSet {
  Eigen::MatrixXd X;  // n x p user covariates
  Eigen::MatrixXd Y;  // m x q item covariates
};

// Throws if row counts disagree with the rating data or entries are not
// finite.
void validate_covariates(const CovariateSet& cov, int n, int m);

enum class PredictorForm { linear, bilinear };

int coefficient_dim(PredictorForm form, int p, int q);

// Coefficients for either predictor: b of length p+q (linear) or vec(B) of
// length p*q stacked column-major (bilinear).
struct Coefficients {
  PredictorForm form = PredictorForm::linear;
  int p = 0;
  int q = 0;
  Eigen::VectorXd values;

  static Coefficients zeros(PredictorForm form, int p, int q);
  Eigen::MatrixXd as_matrix() const;  // bilinear only: the p x q matrix B
};

struct LatentFactors {
  Eigen::MatrixXd U;  // n x l
  Eigen::MatrixXd V;  // m x l
  int rank() const { return static_cast<int>(U.cols()); }
  Eigen::MatrixXd product() const { return U * V.transpose(); }  // F = U V^T
};

// Numerically stable logistic function.
double logistic(double eta);

// z_ij such that dot(z_ij, coefficient vector) equals the predictor:
// concatenation [x, y] for linear, the Kronecker product y (x) x for
// bilinear (matching the column-major stacking of vec(B)).
Eigen::VectorXd build_design_row(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y, PredictorForm form);

double predictor(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                 const Coefficients& coef);
double predictor(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                 const Coefficients& coef, const Eigen::VectorXd& u,
                 const Eigen::VectorXd& v);

double log_likelihood(const RatingData& data, const CovariateSet& cov,
                      const Coefficients& coef,
                      const LatentFactors* latent = nullptr);

// Rank guard: the coefficients are identifiable iff X and Y have full column
// rank. Rank is the usual SVD numerical rank (threshold max_dim * eps *
// largest singular value).
struct IdentifiabilityReport {
  bool ok = true;
  int rank_x = 0;
  int rank_y = 0;
  std::string diagnostic;  // empty when ok
};

IdentifiabilityReport validate_identifiability(const CovariateSet& cov);

// Centered rating entering the Gaussian updates: r - (k+1)/2.
double kappa(int r, int k);

}  // namespace ordrec
