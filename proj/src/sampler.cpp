#include "ordrec/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ordrec/distributions.hpp"

namespace ordrec {

namespace {

// Keep horseshoe auxiliaries inside the representable range; the chain can
// otherwise underflow to exactly 0 and poison the next reciprocal.
double clamp_positive(double x) {
  return std::clamp(x, 1e-300, 1e300);
}

double latent_offset(const ChainState& state, const Rating& cell) {
  return state.latent.U.row(cell.user).dot(state.latent.V.row(cell.item));
}

}  // namespace

void step_horseshoe(const Eigen::VectorXd& values, HorseshoeBlock& block,
                    RandomSource& rng) {
  const int d = block.dim();
  if (values.size() != d) {
    throw std::invalid_argument("horseshoe block dimension mismatch");
  }
  for (int i = 0; i < d; ++i) {
    block.lambda2[i] = clamp_positive(sample_inverse_gamma(
        1.0, 1.0 / block.nu[i] + values[i] * values[i] / block.tau2, rng));
  }
  double rate = 1.0 / block.zeta;
  for (int i = 0; i < d; ++i) {
    rate += 0.5 * values[i] * values[i] / block.lambda2[i];
  }
  block.tau2 = clamp_positive(
      sample_inverse_gamma((d + 1) / 2.0, clamp_positive(rate), rng));
  for (int i = 0; i < d; ++i) {
    block.nu[i] = clamp_positive(
        sample_inverse_gamma(1.0, 1.0 + 1.0 / block.lambda2[i], rng));
  }
  block.zeta = clamp_positive(
      sample_inverse_gamma(1.0, 1.0 + 1.0 / block.tau2, rng));
}

SamplerWorkspace make_sampler_workspace(const RatingData& data,
                                        const CovariateSet& cov,
                                        PredictorForm form) {
  validate_covariates(cov, data.n(), data.m());
  SamplerWorkspace ws;
  ws.n = data.n();
  ws.m = data.m();
  ws.p = static_cast<int>(cov.X.cols());
  ws.q = static_cast<int>(cov.Y.cols());
  ws.d = coefficient_dim(form, ws.p, ws.q);
  ws.form = form;
  ws.cells = data.observations();
  const int obs = static_cast<int>(ws.cells.size());
  ws.design.resize(obs, ws.d);
  ws.kappa.resize(obs);
  ws.trials.resize(obs);
  ws.cells_by_user.resize(ws.n);
  ws.cells_by_item.resize(ws.m);
  const int lo = data.scale().min_rating();
  for (int c = 0; c < obs; ++c) {
    const Rating& cell = ws.cells[c];
    ws.design.row(c) =
        build_design_row(cov.X.row(cell.user), cov.Y.row(cell.item), form);
    const int k = data.scale().k_for(cell.user, cell.item);
    const int trials =
        data.scale().base() == SupportBase::one_based ? k - 1 : k;
    const int successes = cell.value - lo;
    ws.trials[c] = trials;
    ws.kappa[c] = successes - trials / 2.0;
    ws.cells_by_user[cell.user].push_back(c);
    ws.cells_by_item[cell.item].push_back(c);
  }
  return ws;
}

void step_omega(const SamplerWorkspace& ws, ChainState& state,
                RandomSource& rng) {
  const bool with_latent = state.latent.rank() > 0;
  for (std::size_t c = 0; c < ws.cells.size(); ++c) {
    double eta = ws.design.row(c).dot(state.coef.values);
    if (with_latent) {
      eta += latent_offset(state, ws.cells[c]);
    }
    state.omega[c] = sample_pg({ws.trials[c], eta}, rng);
  }
}

GaussianSystem assemble_coefficient_system(
    const SamplerWorkspace& ws, const ChainState& state,
    const Eigen::MatrixXd& prior_precision,
    const Eigen::VectorXd& prior_precision_times_mean) {
  GaussianSystem sys;
  sys.precision = prior_precision +
                  ws.design.transpose() * state.omega.asDiagonal() * ws.design;
  Eigen::VectorXd resid = ws.kappa;
  if (state.latent.rank() > 0) {
    for (std::size_t c = 0; c < ws.cells.size(); ++c) {
      resid[c] -= state.omega[c] * latent_offset(state, ws.cells[c]);
    }
  }
  sys.linear_term = prior_precision_times_mean + ws.design.transpose() * resid;
  return sys;
}

GaussianSystem assemble_coefficient_system_xi(
    const SamplerWorkspace& ws, const ChainState& state,
    const Eigen::MatrixXd& prior_precision,
    const Eigen::VectorXd& prior_precision_times_mean) {
  GaussianSystem sys;
  sys.precision = prior_precision +
                  ws.design.transpose() * state.omega.asDiagonal() * ws.design;
  const bool with_latent = state.latent.rank() > 0;
  Eigen::VectorXd resid(ws.kappa.size());
  for (std::size_t c = 0; c < ws.cells.size(); ++c) {
    const double w = std::max(state.omega[c], 1e-12);
    const double xi = ws.kappa[c] / w;
    const double offset = with_latent ? latent_offset(state, ws.cells[c]) : 0.0;
    resid[c] = w * (xi - offset);
  }
  sys.linear_term = prior_precision_times_mean + ws.design.transpose() * resid;
  return sys;
}

void step_coefficients(const SamplerWorkspace& ws, ChainState& state,
                       const Eigen::MatrixXd& prior_precision,
                       const Eigen::VectorXd& prior_precision_times_mean,
                       RandomSource& rng) {
  const GaussianSystem sys = assemble_coefficient_system(
      ws, state, prior_precision, prior_precision_times_mean);
  state.coef.values =
      sample_mvn_from_precision(sys.precision, sys.linear_term, rng);
}

namespace {

// Shared body for the U and V updates; `by_row` maps each of the rows being
// updated (users for U, items for V) to its observed cells, `other` is the
// opposing factor matrix and `pick_other` selects the opposing index.
void step_latent_block(const SamplerWorkspace& ws, ChainState& state,
                       const Eigen::VectorXd& prior_variance,
                       const std::vector<std::vector<int>>& by_row,
                       Eigen::MatrixXd& rows, const Eigen::MatrixXd& other,
                       const std::vector<int>& other_index,
                       RandomSource& rng) {
  const int l = static_cast<int>(rows.cols());
  if (prior_variance.size() != rows.size()) {
    throw std::invalid_argument("latent prior variance length mismatch");
  }
  const Eigen::VectorXd cov_eta = ws.design * state.coef.values;
  Eigen::MatrixXd prec(l, l);
  Eigen::VectorXd lt(l);
  for (int r = 0; r < rows.rows(); ++r) {
    prec = Eigen::MatrixXd::Zero(l, l);
    prec.diagonal() =
        prior_variance.segment(r * l, l).cwiseMax(1e-100).cwiseInverse();
    lt.setZero();
    for (const int c : by_row[r]) {
      const Eigen::VectorXd o = other.row(other_index[c]).transpose();
      prec.noalias() += state.omega[c] * o * o.transpose();
      lt.noalias() += (ws.kappa[c] - state.omega[c] * cov_eta[c]) * o;
    }
    rows.row(r) = sample_mvn_from_precision(prec, lt, rng).transpose();
  }
}

}  // namespace

void step_latent_u(const SamplerWorkspace& ws, ChainState& state,
                   const Eigen::VectorXd& prior_variance, RandomSource& rng) {
  if (state.latent.rank() == 0) return;
  std::vector<int> item_of(ws.cells.size());
  for (std::size_t c = 0; c < ws.cells.size(); ++c) {
    item_of[c] = ws.cells[c].item;
  }
  step_latent_block(ws, state, prior_variance, ws.cells_by_user,
                    state.latent.U, state.latent.V, item_of, rng);
}

void step_latent_v(const SamplerWorkspace& ws, ChainState& state,
                   const Eigen::VectorXd& prior_variance, RandomSource& rng) {
  if (state.latent.rank() == 0) return;
  std::vector<int> user_of(ws.cells.size());
  for (std::size_t c = 0; c < ws.cells.size(); ++c) {
    user_of[c] = ws.cells[c].user;
  }
  step_latent_block(ws, state, prior_variance, ws.cells_by_item,
                    state.latent.V, state.latent.U, user_of, rng);
}

std::vector<std::string> PosteriorDraws::coefficient_names() const {
  std::vector<std::string> names;
  const int d = coefficient_dim(form, p, q);
  names.reserve(d);
  if (form == PredictorForm::linear) {
    for (int i = 0; i < d; ++i) {
      names.push_back("b[" + std::to_string(i + 1) + "]");
    }
  } else {
    for (int idx = 0; idx < d; ++idx) {
      names.push_back("B[" + std::to_string(idx % p + 1) + "," +
                      std::to_string(idx / p + 1) + "]");
    }
  }
  return names;
}

namespace {

std::vector<std::string> factor_names(const char* prefix, int rows, int l) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(rows) * l);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < l; ++c) {
      names.push_back(std::string(prefix) + "[" + std::to_string(r + 1) + "," +
                      std::to_string(c + 1) + "]");
    }
  }
  return names;
}

}  // namespace

std::vector<std::string> PosteriorDraws::latent_u_names() const {
  return factor_names("U", n, latent_rank);
}

std::vector<std::string> PosteriorDraws::latent_v_names() const {
  return factor_names("V", m, latent_rank);
}

Eigen::MatrixXd PosteriorDraws::latent_product_mean() const {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, m);
  const int s = draw_count();
  if (latent_rank == 0 || s == 0) return f;
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (int i = 0; i < s; ++i) {
    const Eigen::VectorXd urow = latent_u.row(i);
    const Eigen::VectorXd vrow = latent_v.row(i);
    const Eigen::Map<const RowMajor> u(urow.data(), n, latent_rank);
    const Eigen::Map<const RowMajor> v(vrow.data(), m, latent_rank);
    f.noalias() += u * v.transpose();
  }
  return f / s;
}

namespace {

void validate_chain_config(const ChainConfig& config, int d) {
  if (config.iterations < 1) {
    throw std::invalid_argument("iterations must be positive");
  }
  if (config.burn_in < 0 || config.burn_in >= config.iterations) {
    throw std::invalid_argument("burn-in must lie in [0, iterations)");
  }
  if (config.thin < 1) {
    throw std::invalid_argument("thin must be positive");
  }
  if (config.iterations - config.burn_in < config.thin) {
    throw std::invalid_argument(
        "thinning leaves no retained draws: iterations - burn_in < thin");
  }
  if (config.latent_rank < 0) {
    throw std::invalid_argument("latent rank must be >= 0");
  }
  if (config.prior_mean && config.prior_mean->size() != d) {
    throw std::invalid_argument("prior mean length does not match the " +
                                std::to_string(d) + " coefficients");
  }
  if (config.prior_covariance &&
      (config.prior_covariance->rows() != d ||
       config.prior_covariance->cols() != d)) {
    throw std::invalid_argument(
        "prior covariance shape does not match the coefficient count");
  }
  if (config.sparse_coefficients &&
      (config.prior_mean || config.prior_covariance)) {
    throw std::invalid_argument(
        "sparse_coefficients uses a zero-centered horseshoe prior; it cannot "
        "be combined with prior_mean/prior_covariance");
  }
}

}  // namespace

PosteriorDraws gibbs_fit(const RatingData& data, const CovariateSet& cov,
                         PredictorForm form, const ChainConfig& config,
                         const ProgressSink& progress) {
  validate_covariates(cov, data.n(), data.m());
  const int p = static_cast<int>(cov.X.cols());
  const int q = static_cast<int>(cov.Y.cols());
  const int d = coefficient_dim(form, p, q);
  validate_chain_config(config, d);

  // An informative prior (explicit covariance, or the horseshoe) is the only
  // way past rank-deficient covariates.
  if (!config.prior_covariance && !config.sparse_coefficients) {
    const IdentifiabilityReport report = validate_identifiability(cov);
    if (!report.ok) {
      throw std::runtime_error(report.diagnostic);
    }
  }

  const SamplerWorkspace ws = make_sampler_workspace(data, cov, form);
  const int l = config.latent_rank;

  // Fixed prior pieces (replaced per-iteration under the horseshoe).
  Eigen::MatrixXd prior_precision = Eigen::MatrixXd::Identity(d, d);
  if (config.prior_covariance) {
    const Eigen::LLT<Eigen::MatrixXd> llt(*config.prior_covariance);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument(
          "prior covariance is not symmetric positive definite");
    }
    prior_precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
  }
  const Eigen::VectorXd mu0 =
      config.prior_mean ? *config.prior_mean : Eigen::VectorXd::Zero(d);
  const Eigen::VectorXd fixed_ppm = prior_precision * mu0;

  RandomSource rng(config.seed);

  ChainState state;
  state.coef = Coefficients::zeros(form, p, q);
  state.omega = Eigen::VectorXd::Zero(static_cast<int>(ws.cells.size()));
  if (l > 0) {
    // Small-noise init breaks the U = 0 absorbing symmetry of the bilinear
    // latent term; draws are N(0, 0.01) entries, users first then items.
    state.latent.U.resize(ws.n, l);
    state.latent.V.resize(ws.m, l);
    for (int i = 0; i < ws.n; ++i)
      for (int c = 0; c < l; ++c) state.latent.U(i, c) = 0.1 * rng.normal();
    for (int j = 0; j < ws.m; ++j)
      for (int c = 0; c < l; ++c) state.latent.V(j, c) = 0.1 * rng.normal();
    state.hs_u = HorseshoeBlock(ws.n * l);
    state.hs_v = HorseshoeBlock(ws.m * l);
  } else {
    state.latent.U.resize(ws.n, 0);
    state.latent.V.resize(ws.m, 0);
  }
  if (config.sparse_coefficients) {
    state.hs_coefficients = HorseshoeBlock(d);
  }

  const int retained = (config.iterations - config.burn_in) / config.thin;
  PosteriorDraws draws;
  draws.form = form;
  draws.p = p;
  draws.q = q;
  draws.n = ws.n;
  draws.m = ws.m;
  draws.latent_rank = l;
  draws.k = data.scale().global_k();
  draws.support_base = data.scale().base();
  draws.seed = config.seed;
  draws.iterations = config.iterations;
  draws.burn_in = config.burn_in;
  draws.thin = config.thin;
  draws.sparse_coefficients = config.sparse_coefficients;
  draws.coefficients.resize(retained, d);
  draws.latent_u.resize(retained, ws.n * l);
  draws.latent_v.resize(retained, ws.m * l);
  draws.user_observed.assign(ws.n, 0);
  draws.item_observed.assign(ws.m, 0);
  for (const Rating& cell : ws.cells) {
    draws.user_observed[cell.user] = 1;
    draws.item_observed[cell.item] = 1;
  }

  // Scratch for the row-major flattening of U and V draws.
  auto flatten = [](const Eigen::MatrixXd& mat) {
    Eigen::VectorXd out(mat.size());
    int idx = 0;
    for (int r = 0; r < mat.rows(); ++r)
      for (int c = 0; c < mat.cols(); ++c) out[idx++] = mat(r, c);
    return out;
  };

  int stored = 0;
  for (int t = 1; t <= config.iterations; ++t) {
    try {
      step_omega(ws, state, rng);
      if (config.sparse_coefficients) {
        const Eigen::VectorXd var = state.hs_coefficients.prior_variance();
        Eigen::MatrixXd hs_precision = Eigen::MatrixXd::Zero(d, d);
        hs_precision.diagonal() = var.cwiseMax(1e-100).cwiseInverse();
        step_coefficients(ws, state, hs_precision, Eigen::VectorXd::Zero(d),
                          rng);
      } else {
        step_coefficients(ws, state, prior_precision, fixed_ppm, rng);
      }
      if (l > 0) {
        step_latent_u(ws, state, state.hs_u.prior_variance(), rng);
        step_latent_v(ws, state, state.hs_v.prior_variance(), rng);
      }
      if (config.sparse_coefficients) {
        step_horseshoe(state.coef.values, state.hs_coefficients, rng);
      }
      if (l > 0) {
        step_horseshoe(flatten(state.latent.U), state.hs_u, rng);
        step_horseshoe(flatten(state.latent.V), state.hs_v, rng);
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("iteration " + std::to_string(t) + ": " +
                               e.what());
    }

    if (progress && (t % config.progress_every == 0 || t == config.iterations)) {
      const LatentFactors* latent = l > 0 ? &state.latent : nullptr;
      progress(t, log_likelihood(data, cov, state.coef, latent));
    }

    if (t > config.burn_in && (t - config.burn_in) % config.thin == 0 &&
        stored < retained) {
      draws.coefficients.row(stored) = state.coef.values;
      if (l > 0) {
        draws.latent_u.row(stored) = flatten(state.latent.U);
        draws.latent_v.row(stored) = flatten(state.latent.V);
      }
      ++stored;
    }
  }
  return draws;
}

}  // namespace ordrec
