#include "ordrec/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "ordrec/distributions.hpp"
#include "ordrec/rng.hpp"

namespace ordrec {

namespace {

constexpr std::uint64_t kFoldSeedTag = 0xF01D;
constexpr std::uint64_t kModelSeedTag = 1000;

struct CellPlan {
  Eigen::MatrixXd design;            // one row z_ij per requested cell
  std::vector<char> covariate_only;  // latent term omitted for these cells
};

CellPlan plan_cells(const PosteriorDraws& draws, const CovariateSet& cov,
                    const std::vector<std::pair<int, int>>& cells,
                    bool cold_start) {
  if (draws.draw_count() < 1) {
    throw std::invalid_argument(
        "prediction needs at least one retained draw");
  }
  if (cov.X.cols() != draws.p || cov.Y.cols() != draws.q) {
    throw std::invalid_argument(
        "covariate width mismatch: model was trained with p = " +
        std::to_string(draws.p) + ", q = " + std::to_string(draws.q) +
        " but X has " + std::to_string(cov.X.cols()) + " and Y has " +
        std::to_string(cov.Y.cols()) + " columns");
  }
  const int d = coefficient_dim(draws.form, draws.p, draws.q);
  CellPlan plan;
  plan.design.resize(static_cast<int>(cells.size()), d);
  plan.covariate_only.assign(cells.size(), 0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const int i = cells[c].first;
    const int j = cells[c].second;
    if (i < 0 || j < 0) {
      throw std::invalid_argument("cell indices must be non-negative; got (" +
                                  std::to_string(i) + ", " +
                                  std::to_string(j) + ")");
    }
    if (i >= cov.X.rows()) {
      throw std::invalid_argument("user index " + std::to_string(i) +
                                  " has no covariate row (X has " +
                                  std::to_string(cov.X.rows()) + " rows)");
    }
    if (j >= cov.Y.rows()) {
      throw std::invalid_argument("item index " + std::to_string(j) +
                                  " has no covariate row (Y has " +
                                  std::to_string(cov.Y.rows()) + " rows)");
    }
    const bool new_user = i >= draws.n;
    const bool new_item = j >= draws.m;
    if (new_user && !cold_start) {
      throw std::invalid_argument(
          "user index " + std::to_string(i) + " was not in training (n = " +
          std::to_string(draws.n) + "); enable cold_start to predict it from "
          "covariates alone");
    }
    if (new_item && !cold_start) {
      throw std::invalid_argument(
          "item index " + std::to_string(j) + " was not in training (m = " +
          std::to_string(draws.m) + "); enable cold_start to predict it from "
          "covariates alone");
    }
    bool covariate_only = new_user || new_item;
    if (cold_start && draws.latent_rank > 0) {
      if (!new_user && !draws.user_observed[i]) covariate_only = true;
      if (!new_item && !draws.item_observed[j]) covariate_only = true;
    }
    plan.covariate_only[c] = covariate_only ? 1 : 0;
    plan.design.row(static_cast<int>(c)) =
        build_design_row(cov.X.row(i), cov.Y.row(j), draws.form);
    if (!plan.design.row(static_cast<int>(c)).allFinite()) {
      throw std::invalid_argument("covariates for cell (" + std::to_string(i) +
                                  ", " + std::to_string(j) +
                                  ") are not finite");
    }
  }
  return plan;
}

double latent_dot(const PosteriorDraws& draws, int s, int i, int j) {
  const int l = draws.latent_rank;
  double dot = 0.0;
  for (int f = 0; f < l; ++f) {
    dot += draws.latent_u(s, i * l + f) * draws.latent_v(s, j * l + f);
  }
  return dot;
}

// pmf over the whole support via the multiplicative binomial recurrence.
// p is mirrored when above 1/2 so the starting power cannot underflow for
// any realistic trial count.
Eigen::VectorXd pmf_row(int trials, double p) {
  Eigen::VectorXd pmf = Eigen::VectorXd::Zero(trials + 1);
  if (p <= 0.0) {
    pmf[0] = 1.0;
    return pmf;
  }
  if (p >= 1.0) {
    pmf[trials] = 1.0;
    return pmf;
  }
  const bool flip = p > 0.5;
  const double pp = flip ? 1.0 - p : p;
  const double odds = pp / (1.0 - pp);
  double current = std::pow(1.0 - pp, trials);
  pmf[0] = current;
  for (int s = 0; s < trials; ++s) {
    current *= odds * (trials - s) / (s + 1.0);
    pmf[s + 1] = current;
  }
  if (flip) pmf.reverseInPlace();
  return pmf;
}

}  // namespace

PredictionResult predict(const PosteriorDraws& draws, const CovariateSet& cov,
                         const std::vector<std::pair<int, int>>& cells,
                         bool cold_start, const PredictOptions& options) {
  if (!(options.ci_level > 0.0 && options.ci_level < 1.0)) {
    throw std::invalid_argument("credible level must lie in (0, 1)");
  }
  const CellPlan plan = plan_cells(draws, cov, cells, cold_start);
  const int trials =
      draws.support_base == SupportBase::one_based ? draws.k - 1 : draws.k;
  const int lo =
      draws.support_base == SupportBase::one_based ? 1 : 0;
  const int cell_count = static_cast<int>(cells.size());
  const int draw_count = draws.draw_count();
  const bool latent = draws.latent_rank > 0;

  Eigen::MatrixXd pmf_sum = Eigen::MatrixXd::Zero(cell_count, trials + 1);
  if (options.plug_in) {
    // one pmf from the posterior-mean parameters
    const Eigen::VectorXd coef_mean = draws.coefficients.colwise().mean();
    Eigen::MatrixXd product_mean;
    if (latent) product_mean = draws.latent_product_mean();
    const Eigen::VectorXd eta = plan.design * coef_mean;
    for (int c = 0; c < cell_count; ++c) {
      double e = eta[c];
      if (latent && !plan.covariate_only[c]) {
        e += product_mean(cells[c].first, cells[c].second);
      }
      pmf_sum.row(c) = pmf_row(trials, logistic(e)).transpose();
    }
  } else {
    for (int s = 0; s < draw_count; ++s) {
      const Eigen::VectorXd eta =
          plan.design * draws.coefficients.row(s).transpose();
      for (int c = 0; c < cell_count; ++c) {
        double e = eta[c];
        if (latent && !plan.covariate_only[c]) {
          e += latent_dot(draws, s, cells[c].first, cells[c].second);
        }
        pmf_sum.row(c) += pmf_row(trials, logistic(e)).transpose();
      }
    }
    pmf_sum /= static_cast<double>(draw_count);
  }

  PredictionResult result;
  result.k = draws.k;
  result.support_base = draws.support_base;
  result.ci_level = options.ci_level;
  result.cells.resize(cells.size());
  const double alpha = 1.0 - options.ci_level;
  for (int c = 0; c < cell_count; ++c) {
    CellPrediction& out = result.cells[c];
    out.user = cells[c].first;
    out.item = cells[c].second;
    out.pmf = pmf_sum.row(c).transpose();
    double point = 0.0;
    for (int t = 0; t <= trials; ++t) point += (lo + t) * out.pmf[t];
    out.point = point;
    // equal-tailed interval on the discrete CDF: smallest support values
    // whose cumulative mass reaches alpha/2 and 1 - alpha/2
    double cdf = 0.0;
    int lower = lo + trials;
    int upper = lo + trials;
    bool lower_set = false;
    for (int t = 0; t <= trials; ++t) {
      cdf += out.pmf[t];
      if (!lower_set && cdf >= alpha / 2.0) {
        lower = lo + t;
        lower_set = true;
      }
      if (cdf >= 1.0 - alpha / 2.0) {
        upper = lo + t;
        break;
      }
    }
    out.lower = lower;
    out.upper = upper;
  }
  return result;
}

Eigen::VectorXd predict_points(const PosteriorDraws& draws,
                               const CovariateSet& cov,
                               const std::vector<std::pair<int, int>>& cells,
                               bool cold_start) {
  const CellPlan plan = plan_cells(draws, cov, cells, cold_start);
  const int trials =
      draws.support_base == SupportBase::one_based ? draws.k - 1 : draws.k;
  const double lo =
      draws.support_base == SupportBase::one_based ? 1.0 : 0.0;
  const int cell_count = static_cast<int>(cells.size());
  const int draw_count = draws.draw_count();
  const bool latent = draws.latent_rank > 0;

  Eigen::VectorXd mean_p = Eigen::VectorXd::Zero(cell_count);
  for (int s = 0; s < draw_count; ++s) {
    Eigen::VectorXd eta = plan.design * draws.coefficients.row(s).transpose();
    for (int c = 0; c < cell_count; ++c) {
      if (latent && !plan.covariate_only[c]) {
        eta[c] += latent_dot(draws, s, cells[c].first, cells[c].second);
      }
      mean_p[c] += logistic(eta[c]);
    }
  }
  mean_p /= static_cast<double>(draw_count);
  return (lo + trials * mean_p.array()).matrix();
}

double rmse(const std::vector<double>& predicted,
            const std::vector<double>& actual) {
  if (predicted.empty()) {
    throw std::invalid_argument("RMSE needs at least one prediction");
  }
  if (predicted.size() != actual.size()) {
    throw std::invalid_argument(
        "RMSE length mismatch: " + std::to_string(predicted.size()) +
        " predictions vs " + std::to_string(actual.size()) + " actuals");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double e = predicted[i] - actual[i];
    sq += e * e;
  }
  return std::sqrt(sq / static_cast<double>(predicted.size()));
}

double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
  if (predicted.size() == 0) {
    throw std::invalid_argument("RMSE needs at least one prediction");
  }
  if (predicted.size() != actual.size()) {
    throw std::invalid_argument(
        "RMSE length mismatch: " + std::to_string(predicted.size()) +
        " predictions vs " + std::to_string(actual.size()) + " actuals");
  }
  return std::sqrt((predicted - actual).squaredNorm() /
                   static_cast<double>(predicted.size()));
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) {
    throw std::invalid_argument("quantile of an empty sample");
  }
  if (!(prob >= 0.0 && prob <= 1.0)) {
    throw std::invalid_argument("quantile probability must lie in [0, 1]");
  }
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const std::size_t idx = static_cast<std::size_t>(h);
  if (idx + 1 >= values.size()) return values.back();
  return values[idx] + (h - static_cast<double>(idx)) *
                           (values[idx + 1] - values[idx]);
}

std::vector<ParameterSummary> posterior_summary(
    const Eigen::MatrixXd& draws, const std::vector<std::string>& names,
    double ci_level) {
  if (draws.rows() < 2) {
    throw std::invalid_argument(
        "posterior summary needs at least two retained draws");
  }
  if (static_cast<std::size_t>(draws.cols()) != names.size()) {
    throw std::invalid_argument(
        "posterior summary: " + std::to_string(draws.cols()) +
        " parameter columns but " + std::to_string(names.size()) + " names");
  }
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw std::invalid_argument("credible level must lie in (0, 1)");
  }
  const double alpha = 1.0 - ci_level;
  std::vector<ParameterSummary> rows(names.size());
  std::vector<double> column(draws.rows());
  for (int c = 0; c < draws.cols(); ++c) {
    ParameterSummary& row = rows[c];
    row.name = names[c];
    row.mean = draws.col(c).mean();
    row.sd = std::sqrt((draws.col(c).array() - row.mean).square().sum() /
                       (static_cast<double>(draws.rows()) - 1.0));
    for (int s = 0; s < draws.rows(); ++s) column[s] = draws(s, c);
    row.median = quantile(column, 0.5);
    row.lower = quantile(column, alpha / 2.0);
    row.upper = quantile(column, 1.0 - alpha / 2.0);
  }
  return rows;
}

std::vector<ParameterSummary> posterior_summary(const PosteriorDraws& draws,
                                                double ci_level) {
  const int s = draws.draw_count();
  Eigen::MatrixXd all(s, draws.coefficients.cols() + draws.latent_u.cols() +
                             draws.latent_v.cols());
  all << draws.coefficients, draws.latent_u, draws.latent_v;
  std::vector<std::string> names = draws.coefficient_names();
  const std::vector<std::string> u_names = draws.latent_u_names();
  const std::vector<std::string> v_names = draws.latent_v_names();
  names.insert(names.end(), u_names.begin(), u_names.end());
  names.insert(names.end(), v_names.begin(), v_names.end());
  return posterior_summary(all, names, ci_level);
}

std::string CvReport::display() const {
  if (fold_outcomes.empty() ||
      failed_folds == static_cast<int>(fold_outcomes.size())) {
    return "failed";
  }
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.2f (%.2f)", mean_rmse, sd_rmse);
  return buffer;
}

namespace {

struct FoldData {
  std::vector<Rating> train;
  std::vector<std::pair<int, int>> test_cells;
  std::vector<double> test_actual;
};

FoldOutcome run_fold(const RatingData& data, const CovariateSet& cov,
                     const ModelSpec& spec, const FoldData& fold_data,
                     int fold, std::uint64_t task_seed) {
  FoldOutcome out;
  out.fold = fold;
  out.test_count = static_cast<int>(fold_data.test_cells.size());
  try {
    const RatingData train(data.n(), data.m(), fold_data.train, data.scale());
    std::vector<double> predicted;
    predicted.reserve(fold_data.test_cells.size());
    if (const GibbsModel* gibbs = std::get_if<GibbsModel>(&spec.model)) {
      ChainConfig chain = gibbs->chain;
      chain.seed = task_seed;
      const PosteriorDraws draws = gibbs_fit(train, cov, gibbs->form, chain);
      const Eigen::VectorXd points =
          predict_points(draws, cov, fold_data.test_cells, true);
      predicted.assign(points.data(), points.data() + points.size());
    } else if (const MeanModel* mean = std::get_if<MeanModel>(&spec.model)) {
      const MeanBaseline fit = fit_mean_baseline(train, mean->mode);
      for (const auto& [i, j] : fold_data.test_cells) {
        predicted.push_back(fit.predict(i, j));
      }
    } else {
      const FunkSvdModel& funk = std::get<FunkSvdModel>(spec.model);
      FunkSvdConfig config = funk.config;
      config.seed = task_seed;
      const FunkSvd fit = fit_funk_svd(train, config);
      for (const auto& [i, j] : fold_data.test_cells) {
        predicted.push_back(fit.predict(i, j));
      }
    }
    out.rmse = rmse(predicted, fold_data.test_actual);
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

}  // namespace

std::vector<CvReport> cross_validate(const RatingData& data,
                                     const CovariateSet& cov,
                                     const std::vector<ModelSpec>& models,
                                     int folds, std::uint64_t seed,
                                     int threads) {
  const int total = static_cast<int>(data.observations().size());
  if (folds < 2) {
    throw std::invalid_argument("cross-validation needs folds >= 2");
  }
  if (folds > total) {
    throw std::invalid_argument(
        "folds = " + std::to_string(folds) + " exceeds the " +
        std::to_string(total) + " observed ratings");
  }
  if (models.empty()) {
    throw std::invalid_argument("cross-validation needs at least one model");
  }
  if (threads < 1) {
    throw std::invalid_argument("threads must be >= 1");
  }

  // uniform random partition of observed cells into folds
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  RandomSource fold_rng(derive_seed(seed, kFoldSeedTag));
  for (int t = 0; t + 1 < total; ++t) {
    std::swap(order[t],
              order[t + static_cast<int>(fold_rng.uniform_int(
                            static_cast<std::uint64_t>(total - t)))]);
  }
  std::vector<int> fold_of(total);
  for (int t = 0; t < total; ++t) fold_of[order[t]] = t % folds;

  std::vector<FoldData> fold_data(folds);
  const std::vector<Rating>& obs = data.observations();
  for (int idx = 0; idx < total; ++idx) {
    for (int f = 0; f < folds; ++f) {
      if (fold_of[idx] == f) {
        fold_data[f].test_cells.push_back({obs[idx].user, obs[idx].item});
        fold_data[f].test_actual.push_back(obs[idx].value);
      } else {
        fold_data[f].train.push_back(obs[idx]);
      }
    }
  }

  struct Task {
    int model = 0;
    int fold = 0;
  };
  std::vector<Task> tasks;
  for (int mi = 0; mi < static_cast<int>(models.size()); ++mi) {
    for (int f = 0; f < folds; ++f) tasks.push_back({mi, f});
  }
  std::vector<FoldOutcome> outcomes(tasks.size());
  auto run_task = [&](std::size_t t) {
    const Task& task = tasks[t];
    const std::uint64_t task_seed = derive_seed(
        derive_seed(seed, kModelSeedTag + static_cast<std::uint64_t>(
                                              task.model)),
        static_cast<std::uint64_t>(task.fold));
    outcomes[t] = run_fold(data, cov, models[task.model],
                           fold_data[task.fold], task.fold, task_seed);
  };
  if (threads == 1 || tasks.size() == 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    const std::size_t lanes =
        std::min<std::size_t>(static_cast<std::size_t>(threads),
                              tasks.size());
    std::vector<std::thread> pool;
    pool.reserve(lanes);
    for (std::size_t w = 0; w < lanes; ++w) {
      pool.emplace_back([&]() {
        for (std::size_t t = next.fetch_add(1); t < tasks.size();
             t = next.fetch_add(1)) {
          run_task(t);
        }
      });
    }
    for (std::thread& worker : pool) worker.join();
  }

  std::vector<CvReport> reports(models.size());
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    CvReport& report = reports[mi];
    report.model = models[mi].name;
    report.folds = folds;
    report.seed = seed;
    report.fold_outcomes.resize(folds);
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    reports[tasks[t].model].fold_outcomes[tasks[t].fold] = outcomes[t];
  }
  for (CvReport& report : reports) {
    std::vector<double> ok_rmse;
    for (const FoldOutcome& f : report.fold_outcomes) {
      if (f.ok) {
        ok_rmse.push_back(f.rmse);
      } else {
        ++report.failed_folds;
      }
    }
    if (!ok_rmse.empty()) {
      report.mean_rmse =
          std::accumulate(ok_rmse.begin(), ok_rmse.end(), 0.0) /
          static_cast<double>(ok_rmse.size());
      double sq = 0.0;
      for (const double r : ok_rmse) {
        sq += (r - report.mean_rmse) * (r - report.mean_rmse);
      }
      report.sd_rmse =
          ok_rmse.size() > 1
              ? std::sqrt(sq / (static_cast<double>(ok_rmse.size()) - 1.0))
              : 0.0;
    }
  }
  return reports;
}

}  // namespace ordrec
