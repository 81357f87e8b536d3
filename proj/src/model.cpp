#include "ordrec/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ordrec {

void RatingScale::set_cell_k(int user, int item, int k) {
  if (k < 2) {
    throw std::invalid_argument("per-cell k must be >= 2, got " +
                                std::to_string(k) + " for cell (" +
                                std::to_string(user) + ", " +
                                std::to_string(item) + ")");
  }
  overrides_[cell_key(user, item)] = k;
}

int RatingScale::k_for(int user, int item) const {
  const auto it = overrides_.find(cell_key(user, item));
  return it == overrides_.end() ? k_ : it->second;
}

RatingData::RatingData(int n, int m, std::vector<Rating> observations,
                       RatingScale scale)
    : n_(n), m_(m), observations_(std::move(observations)), scale_(scale) {
  if (n_ <= 0 || m_ <= 0) {
    throw std::invalid_argument("rating matrix dimensions must be positive");
  }
  if (scale_.global_k() < 2) {
    throw std::invalid_argument("rating scale needs k >= 2, got " +
                                std::to_string(scale_.global_k()));
  }
  if (observations_.empty()) {
    throw std::invalid_argument("at least one observed rating is required");
  }
  items_by_user_.resize(n_);
  observed_.reserve(observations_.size());
  for (std::size_t idx = 0; idx < observations_.size(); ++idx) {
    const Rating& obs = observations_[idx];
    if (obs.user < 0 || obs.user >= n_) {
      throw std::invalid_argument(
          "observation " + std::to_string(idx) + ": user index " +
          std::to_string(obs.user) + " out of range [0, " +
          std::to_string(n_) + ")");
    }
    if (obs.item < 0 || obs.item >= m_) {
      throw std::invalid_argument(
          "observation " + std::to_string(idx) + ": item index " +
          std::to_string(obs.item) + " out of range [0, " +
          std::to_string(m_) + ")");
    }
    const auto [it, inserted] = observed_.emplace(
        RatingScale::cell_key(obs.user, obs.item), static_cast<int>(idx));
    if (!inserted) {
      throw std::invalid_argument("duplicate observation for cell (" +
                                  std::to_string(obs.user) + ", " +
                                  std::to_string(obs.item) + ")");
    }
    const int k = scale_.k_for(obs.user, obs.item);
    const int lo = scale_.min_rating();
    if (obs.value < lo || obs.value > k) {
      throw std::invalid_argument(
          "observation " + std::to_string(idx) + ": rating " +
          std::to_string(obs.value) + " outside declared support {" +
          std::to_string(lo) + ".." + std::to_string(k) + "} for cell (" +
          std::to_string(obs.user) + ", " + std::to_string(obs.item) + ")");
    }
    items_by_user_[obs.user].push_back(obs.item);
  }
}

void validate_covariates(const CovariateSet& cov, int n, int m) {
  if (cov.X.rows() != n) {
    throw std::invalid_argument(
        "user covariate matrix has " + std::to_string(cov.X.rows()) +
        " rows but the rating data has " + std::to_string(n) + " users");
  }
  if (cov.Y.rows() != m) {
    throw std::invalid_argument(
        "item covariate matrix has " + std::to_string(cov.Y.rows()) +
        " rows but the rating data has " + std::to_string(m) + " items");
  }
  if (!cov.X.allFinite()) {
    throw std::invalid_argument("user covariates contain non-finite entries");
  }
  if (!cov.Y.allFinite()) {
    throw std::invalid_argument("item covariates contain non-finite entries");
  }
}

int coefficient_dim(PredictorForm form, int p, int q) {
  return form == PredictorForm::linear ? p + q : p * q;
}

Coefficients Coefficients::zeros(PredictorForm form, int p, int q) {
  return {form, p, q, Eigen::VectorXd::Zero(coefficient_dim(form, p, q))};
}

Eigen::MatrixXd Coefficients::as_matrix() const {
  if (form != PredictorForm::bilinear) {
    throw std::logic_error("as_matrix() is only defined for bilinear form");
  }
  return Eigen::Map<const Eigen::MatrixXd>(values.data(), p, q);
}

double logistic(double eta) {
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

Eigen::VectorXd build_design_row(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y,
                                 PredictorForm form) {
  const Eigen::Index p = x.size();
  const Eigen::Index q = y.size();
  if (form == PredictorForm::linear) {
    Eigen::VectorXd z(p + q);
    z.head(p) = x;
    z.tail(q) = y;
    return z;
  }
  // Kronecker y (x) x: entry (c*p + r) is y[c]*x[r], matching column-major
  // vec(B) so that dot(z, vec(B)) = x^T B y.
  Eigen::VectorXd z(p * q);
  for (Eigen::Index c = 0; c < q; ++c) {
    z.segment(c * p, p) = y[c] * x;
  }
  return z;
}

namespace {

void check_predictor_dims(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const Coefficients& coef) {
  if (x.size() != coef.p || y.size() != coef.q) {
    throw std::invalid_argument(
        "covariate lengths (" + std::to_string(x.size()) + ", " +
        std::to_string(y.size()) + ") do not match coefficient dims (" +
        std::to_string(coef.p) + ", " + std::to_string(coef.q) + ")");
  }
  if (coef.values.size() != coefficient_dim(coef.form, coef.p, coef.q)) {
    throw std::invalid_argument("coefficient vector length does not match form");
  }
}

}  // namespace

double predictor(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                 const Coefficients& coef) {
  check_predictor_dims(x, y, coef);
  if (coef.form == PredictorForm::linear) {
    return x.dot(coef.values.head(coef.p)) + y.dot(coef.values.tail(coef.q));
  }
  const Eigen::Map<const Eigen::MatrixXd> b(coef.values.data(), coef.p,
                                            coef.q);
  return x.dot(b * y);
}

double predictor(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                 const Coefficients& coef, const Eigen::VectorXd& u,
                 const Eigen::VectorXd& v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("latent factor lengths disagree");
  }
  return predictor(x, y, coef) + u.dot(v);
}

double log_likelihood(const RatingData& data, const CovariateSet& cov,
                      const Coefficients& coef, const LatentFactors* latent) {
  validate_covariates(cov, data.n(), data.m());
  const bool with_latent = latent != nullptr && latent->rank() > 0;
  if (with_latent &&
      (latent->U.rows() != data.n() || latent->V.rows() != data.m())) {
    throw std::invalid_argument("latent factor dimensions disagree with data");
  }
  const SupportBase base = data.scale().base();
  double total = 0.0;
  for (const Rating& obs : data.observations()) {
    double eta = predictor(cov.X.row(obs.user), cov.Y.row(obs.item), coef);
    if (with_latent) {
      eta += latent->U.row(obs.user).dot(latent->V.row(obs.item));
    }
    const int k = data.scale().k_for(obs.user, obs.item);
    total += shifted_binomial_log_pmf(obs.value, {k, logistic(eta), base});
  }
  return total;
}

namespace {

int numerical_rank(const Eigen::MatrixXd& a) {
  if (a.cols() == 0) return 0;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return 0;
  const double tol = std::max(a.rows(), a.cols()) *
                     std::numeric_limits<double>::epsilon() * sv[0];
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    rank += sv[i] > tol;
  }
  return rank;
}

}  // namespace

IdentifiabilityReport validate_identifiability(const CovariateSet& cov) {
  IdentifiabilityReport report;
  report.rank_x = numerical_rank(cov.X);
  report.rank_y = numerical_rank(cov.Y);
  std::string diag;
  if (report.rank_x < cov.X.cols()) {
    diag += "user covariate matrix X is rank deficient: numerical rank " +
            std::to_string(report.rank_x) + " of " +
            std::to_string(cov.X.cols()) + " columns";
  }
  if (report.rank_y < cov.Y.cols()) {
    if (!diag.empty()) diag += "; ";
    diag += "item covariate matrix Y is rank deficient: numerical rank " +
            std::to_string(report.rank_y) + " of " +
            std::to_string(cov.Y.cols()) + " columns";
  }
  report.ok = diag.empty();
  report.diagnostic = diag;
  return report;
}

double kappa(int r, int k) { return r - (k + 1) / 2.0; }

}  // namespace ordrec
