// Command-line front end: simulate synthetic rating grids, fit the Gibbs
// sampler, predict unobserved cells, and cross-validate against baselines.
//
// Exit codes: 0 success, 1 runtime failure (bad data, divergence, rank
// deficiency), 2 usage or configuration error.
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "ordrec/baselines.hpp"
#include "ordrec/evaluate.hpp"
#include "ordrec/io.hpp"
#include "ordrec/model.hpp"
#include "ordrec/sampler.hpp"
#include "ordrec/simulate.hpp"

namespace fs = std::filesystem;
using namespace ordrec;

namespace {

std::string dstr(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

std::vector<std::string> column_names(const char* prefix, int count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (int c = 0; c < count; ++c) {
    names.push_back(prefix + std::to_string(c + 1));
  }
  return names;
}

// `user,item` CSV listing the cells to predict (0-based indices).
std::vector<std::pair<int, int>> read_cells_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  const std::string name = path.filename().string();
  std::string line;
  if (!std::getline(in, line) ||
      line.find("user") == std::string::npos ||
      line.find("item") == std::string::npos) {
    throw std::runtime_error(name + ": expected a `user,item` header row");
  }
  std::vector<std::pair<int, int>> cells;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const std::string context = name + " line " + std::to_string(line_number);
    int user = 0;
    int item = 0;
    if (std::sscanf(line.c_str(), "%d,%d", &user, &item) != 2) {
      throw std::runtime_error(context + ": expected `user,item` integers");
    }
    if (user < 0 || item < 0) {
      throw std::runtime_error(context + ": indices must be non-negative");
    }
    cells.emplace_back(user, item);
  }
  if (cells.empty()) {
    throw std::runtime_error(name + ": no cells listed");
  }
  return cells;
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_simulate(const SimulateArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path config_path(args.config);
  ConfigReader reader(parse_config_file(config_path),
                      config_path.filename().string());
  SimConfig cfg;
  cfg.n = reader.require_int("n");
  cfg.m = reader.require_int("m");
  cfg.p = reader.require_int("p");
  cfg.q = reader.require_int("q");
  cfg.k = reader.get_int("k", cfg.k);
  cfg.form = predictor_form_from_string(reader.get_string("form", "linear"));
  cfg.rated_per_user = reader.get_int("rated_per_user", cfg.rated_per_user);
  cfg.latent_rank = reader.get_int("latent_rank", cfg.latent_rank);
  cfg.latent_sparsity =
      reader.get_double("latent_sparsity", cfg.latent_sparsity);
  cfg.replicates = reader.get_int("replicates", cfg.replicates);
  cfg.seed = reader.get_uint64("seed", cfg.seed);
  const int replicate = reader.get_int("replicate", -1);
  reader.reject_unknown();
  if (args.seed_given) cfg.seed = args.seed;
  if (replicate >= 0) cfg.seed = replicate_seed(cfg, replicate);

  const SimulatedData sim = simulate_dataset(cfg);

  const fs::path out(args.out);
  fs::create_directories(out);
  write_ratings_csv(out / "ratings.csv", sim.observed);
  write_matrix_csv(out / "X.csv", sim.covariates.X, column_names("x", cfg.p));
  write_matrix_csv(out / "Y.csv", sim.covariates.Y, column_names("y", cfg.q));
  write_truth_json(out / "truth.json", cfg, sim);
  write_manifest(out / "manifest.json", "simulate", cfg.seed,
                 {{"n", std::to_string(cfg.n)},
                  {"m", std::to_string(cfg.m)},
                  {"p", std::to_string(cfg.p)},
                  {"q", std::to_string(cfg.q)},
                  {"k", std::to_string(cfg.k)},
                  {"form", to_string(cfg.form)},
                  {"rated_per_user", std::to_string(cfg.rated_per_user)},
                  {"latent_rank", std::to_string(cfg.latent_rank)},
                  {"latent_sparsity", dstr(cfg.latent_sparsity)},
                  {"replicates", std::to_string(cfg.replicates)},
                  {"seed", std::to_string(cfg.seed)}},
                 {{"config", args.config}},
                 {"ratings.csv", "X.csv", "Y.csv", "truth.json"},
                 seconds_since(start));
  std::printf("simulated %dx%d grid: %zu observed, %zu held-out -> %s\n",
              cfg.n, cfg.m, sim.observed.observations().size(),
              sim.held_out.size(), out.string().c_str());
  return 0;
}

// --- fit --------------------------------------------------------------------

struct FitArgs {
  std::string ratings;
  std::string x;
  std::string y;
  std::string out;
  std::string form = "linear";
  std::string support = "one_based";
  std::uint64_t seed = 0;
  int iterations = 2000;
  int burn_in = 1000;
  int thin = 1;
  int latent = 0;
  int k = 0;
  bool k_given = false;
  bool sparse_coefficients = false;
  double ci = 0.95;
  int threads = 1;
};

int run_fit(const FitArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  const NamedMatrix X = read_matrix_csv(args.x);
  const NamedMatrix Y = read_matrix_csv(args.y);
  const RatingsFile ratings = read_ratings_csv(args.ratings);
  const SupportBase base = support_base_from_string(args.support);
  std::optional<int> k;
  if (args.k_given) k = args.k;
  const RatingData data = build_rating_data(
      ratings, fs::path(args.ratings).filename().string(),
      static_cast<int>(X.values.rows()), static_cast<int>(Y.values.rows()), k,
      base);
  const CovariateSet cov{X.values, Y.values};

  ChainConfig chain;
  chain.iterations = args.iterations;
  chain.burn_in = args.burn_in;
  chain.thin = args.thin;
  chain.seed = args.seed;
  chain.latent_rank = args.latent;
  chain.sparse_coefficients = args.sparse_coefficients;
  const PredictorForm form = predictor_form_from_string(args.form);
  const ProgressSink progress = [&](int iteration, double log_likelihood) {
    std::fprintf(stderr, "iteration %d/%d log-likelihood %.3f\n", iteration,
                 chain.iterations, log_likelihood);
  };

  const PosteriorDraws draws = gibbs_fit(data, cov, form, chain, progress);
  const std::vector<ParameterSummary> summary =
      posterior_summary(draws, args.ci);

  const fs::path out(args.out);
  fs::create_directories(out);
  write_draws_csv(out / "draws.csv", draws);
  write_summary_json(out / "summary.json", summary, args.ci,
                     draws.draw_count());
  write_manifest(out / "manifest.json", "fit", chain.seed,
                 {{"iterations", std::to_string(chain.iterations)},
                  {"burn_in", std::to_string(chain.burn_in)},
                  {"thin", std::to_string(chain.thin)},
                  {"seed", std::to_string(chain.seed)},
                  {"form", to_string(form)},
                  {"latent", std::to_string(chain.latent_rank)},
                  {"sparse_coefficients",
                   chain.sparse_coefficients ? "true" : "false"},
                  {"ci", dstr(args.ci)},
                  {"k", std::to_string(data.scale().global_k())},
                  {"support", to_string(base)},
                  {"threads", std::to_string(args.threads)}},
                 {{"ratings", args.ratings}, {"x", args.x}, {"y", args.y}},
                 {"draws.csv", "summary.json"}, seconds_since(start), &draws);
  std::printf(
      "fit complete: %d retained draws over %zu parameters -> %s\n",
      draws.draw_count(),
      summary.size(), out.string().c_str());
  return 0;
}

// --- predict ----------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string x;
  std::string y;
  std::string out;
  std::string cells;
  std::string ratings;
  bool all_missing = false;
  bool cold_start = false;
  bool pmf = false;
  double ci = 0.95;
};

int run_predict(const PredictArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  if (!args.cells.empty() && args.all_missing) {
    throw std::invalid_argument(
        "--cells and --all-missing are mutually exclusive");
  }
  if (args.cells.empty() && !args.all_missing) {
    throw std::invalid_argument(
        "one of --cells or --all-missing is required");
  }
  if (args.all_missing && args.ratings.empty()) {
    throw std::invalid_argument(
        "--all-missing needs --ratings to know which cells are observed");
  }

  const PosteriorDraws model = load_model(args.model);
  const NamedMatrix X = read_matrix_csv(args.x);
  const NamedMatrix Y = read_matrix_csv(args.y);
  const CovariateSet cov{X.values, Y.values};

  std::vector<std::pair<int, int>> cells;
  if (args.all_missing) {
    const RatingsFile ratings = read_ratings_csv(args.ratings);
    std::set<std::pair<int, int>> observed;
    for (const Rating& r : ratings.rows) observed.insert({r.user, r.item});
    for (int i = 0; i < X.values.rows(); ++i) {
      for (int j = 0; j < Y.values.rows(); ++j) {
        if (observed.count({i, j}) == 0) cells.emplace_back(i, j);
      }
    }
    if (cells.empty()) {
      throw std::runtime_error(
          "every cell of the grid is observed; nothing to predict");
    }
  } else {
    cells = read_cells_csv(args.cells);
  }

  PredictOptions options;
  options.ci_level = args.ci;
  const PredictionResult result =
      predict(model, cov, cells, args.cold_start, options);

  const fs::path out(args.out);
  fs::create_directories(out);
  write_predictions_csv(out / "predictions.csv", result, args.pmf);
  std::map<std::string, std::string> inputs = {
      {"model", args.model}, {"x", args.x}, {"y", args.y}};
  if (!args.cells.empty()) inputs["cells"] = args.cells;
  if (!args.ratings.empty()) inputs["ratings"] = args.ratings;
  write_manifest(out / "manifest.json", "predict", model.seed,
                 {{"cold_start", args.cold_start ? "true" : "false"},
                  {"all_missing", args.all_missing ? "true" : "false"},
                  {"ci", dstr(args.ci)},
                  {"pmf", args.pmf ? "true" : "false"}},
                 inputs, {"predictions.csv"}, seconds_since(start));
  std::printf("predicted %zu cells -> %s\n", result.cells.size(),
              out.string().c_str());
  return 0;
}

// --- cross-validation ---------------------------------------------------

MeanMode mean_mode_from_string(const std::string& text,
                               const std::string& source) {
  if (text == "global") return MeanMode::global;
  if (text == "user") return MeanMode::user;
  if (text == "item") return MeanMode::item;
  throw std::invalid_argument(source +
                              ": field `mode` must be global, user, or item; "
                              "got '" + text + "'");
}

std::vector<ModelSpec> parse_model_specs(const fs::path& path) {
  const std::string file_name = path.filename().string();
  const std::map<std::string, std::string> values = parse_config_file(path);
  const auto models_it = values.find("models");
  if (models_it == values.end()) {
    throw std::invalid_argument(file_name +
                                ": missing required field `models` (a "
                                "comma-separated list of model names)");
  }

  std::vector<std::string> names;
  {
    std::string token;
    std::istringstream stream(models_it->second);
    while (std::getline(stream, token, ',')) {
      const auto first = token.find_first_not_of(" \t");
      const auto last = token.find_last_not_of(" \t");
      if (first == std::string::npos) {
        throw std::invalid_argument(file_name +
                                    ": `models` has an empty entry");
      }
      names.push_back(token.substr(first, last - first + 1));
    }
  }
  if (names.empty()) {
    throw std::invalid_argument(file_name + ": `models` is empty");
  }

  std::set<std::string> claimed = {"models"};
  std::set<std::string> seen_names;
  std::vector<ModelSpec> specs;
  for (const std::string& name : names) {
    if (!seen_names.insert(name).second) {
      throw std::invalid_argument(file_name + ": model `" + name +
                                  "` is declared twice");
    }
    const std::string prefix = name + ".";
    std::map<std::string, std::string> sub;
    for (const auto& [key, value] : values) {
      if (key.rfind(prefix, 0) == 0) {
        sub[key.substr(prefix.size())] = value;
        claimed.insert(key);
      }
    }
    const std::string source = file_name + " [" + name + "]";
    ConfigReader reader(sub, source);
    const std::string type = reader.require_string("type");
    ModelSpec spec;
    spec.name = name;
    if (type == "gibbs") {
      GibbsModel model;
      model.form =
          predictor_form_from_string(reader.get_string("form", "linear"));
      model.chain.iterations =
          reader.get_int("iterations", model.chain.iterations);
      model.chain.burn_in = reader.get_int("burn_in", model.chain.burn_in);
      model.chain.thin = reader.get_int("thin", model.chain.thin);
      model.chain.latent_rank =
          reader.get_int("latent", model.chain.latent_rank);
      model.chain.sparse_coefficients =
          reader.get_bool("sparse_coefficients", false);
      spec.model = model;
    } else if (type == "mean") {
      MeanModel model;
      model.mode = mean_mode_from_string(reader.get_string("mode", "item"),
                                         source);
      spec.model = model;
    } else if (type == "funk_svd") {
      FunkSvdModel model;
      model.config.factors = reader.get_int("factors", model.config.factors);
      model.config.learning_rate =
          reader.get_double("learning_rate", model.config.learning_rate);
      model.config.regularization =
          reader.get_double("regularization", model.config.regularization);
      model.config.epochs = reader.get_int("epochs", model.config.epochs);
      spec.model = model;
    } else {
      throw std::invalid_argument(source +
                                  ": `type` must be gibbs, mean, or "
                                  "funk_svd; got '" + type + "'");
    }
    reader.reject_unknown();
    specs.push_back(std::move(spec));
  }

  for (const auto& [key, value] : values) {
    if (claimed.count(key) == 0) {
      throw std::invalid_argument(file_name + ": unknown field `" + key +
                                  "` (its prefix is not declared in "
                                  "`models`)");
    }
  }
  return specs;
}

struct CvArgs {
  std::string ratings;
  std::string x;
  std::string y;
  std::string models;
  std::string out;
  std::string support = "one_based";
  int folds = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  int k = 0;
  bool k_given = false;
};

int run_cv(const CvArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  const NamedMatrix X = read_matrix_csv(args.x);
  const NamedMatrix Y = read_matrix_csv(args.y);
  const RatingsFile ratings = read_ratings_csv(args.ratings);
  const SupportBase base = support_base_from_string(args.support);
  std::optional<int> k;
  if (args.k_given) k = args.k;
  const RatingData data = build_rating_data(
      ratings, fs::path(args.ratings).filename().string(),
      static_cast<int>(X.values.rows()), static_cast<int>(Y.values.rows()), k,
      base);
  const CovariateSet cov{X.values, Y.values};
  const std::vector<ModelSpec> specs = parse_model_specs(args.models);

  const std::vector<CvReport> reports =
      cross_validate(data, cov, specs, args.folds, args.seed, args.threads);

  const fs::path out(args.out);
  fs::create_directories(out);
  write_cv_report_json(out / "cv_report.json", reports);
  write_manifest(out / "manifest.json", "cv", args.seed,
                 {{"folds", std::to_string(args.folds)},
                  {"seed", std::to_string(args.seed)},
                  {"threads", std::to_string(args.threads)},
                  {"k", std::to_string(data.scale().global_k())},
                  {"support", to_string(base)}},
                 {{"ratings", args.ratings},
                  {"x", args.x},
                  {"y", args.y},
                  {"models", args.models}},
                 {"cv_report.json"}, seconds_since(start));

  std::size_t width = 5;
  for (const CvReport& report : reports) {
    width = std::max(width, report.model.size());
  }
  std::printf("%-*s  rmse (sd)\n", static_cast<int>(width), "model");
  for (const CvReport& report : reports) {
    std::string row = report.display();
    if (report.failed_folds > 0 && report.failed_folds < report.folds) {
      row += "  [" + std::to_string(report.failed_folds) + " fold(s) failed]";
    }
    std::printf("%-*s  %s\n", static_cast<int>(width), report.model.c_str(),
                row.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "ordrec: Bayesian ordinal rating model on a shifted-binomial scale, "
      "fit by exact Gibbs sampling with Polya-Gamma augmentation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kLibraryVersion));

  SimulateArgs sim_args;
  CLI::App* sim = app.add_subcommand(
      "simulate", "draw a synthetic rating grid from the generative model");
  sim->add_option("--config", sim_args.config,
                  "key = value file; requires n, m, p, q")
      ->required();
  sim->add_option("--out", sim_args.out, "output directory")->required();
  CLI::Option* sim_seed =
      sim->add_option("--seed", sim_args.seed, "overrides `seed` from the config");

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand(
      "fit", "run the Gibbs sampler on observed ratings with covariates");
  fit->add_option("--ratings", fit_args.ratings,
                  "user,item,rating[,k] CSV (0-based indices)")
      ->required();
  fit->add_option("--x", fit_args.x, "user covariate CSV, one row per user")
      ->required();
  fit->add_option("--y", fit_args.y, "item covariate CSV, one row per item")
      ->required();
  fit->add_option("--out", fit_args.out, "output directory")->required();
  fit->add_option("--iterations", fit_args.iterations, "total Gibbs sweeps")
      ->capture_default_str();
  fit->add_option("--burn-in", fit_args.burn_in, "sweeps discarded up front")
      ->capture_default_str();
  fit->add_option("--thin", fit_args.thin, "keep every thin-th sweep")
      ->capture_default_str();
  fit->add_option("--seed", fit_args.seed, "chain seed")
      ->capture_default_str();
  fit->add_option("--form", fit_args.form, "predictor form")
      ->check(CLI::IsMember({"linear", "bilinear"}))
      ->capture_default_str();
  fit->add_option("--latent", fit_args.latent,
                  "rank of the sparse latent factor term (0 disables)")
      ->check(CLI::Range(0, 1000000))
      ->capture_default_str();
  fit->add_flag("--sparse-coefficients", fit_args.sparse_coefficients,
                "horseshoe shrinkage on the regression coefficients");
  fit->add_option("--ci", fit_args.ci, "credible interval level for summary")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  CLI::Option* fit_k = fit->add_option(
      "--k", fit_args.k,
      "rating categories; default: largest rating in the data")
      ->check(CLI::Range(2, 1000000));
  fit->add_option("--support", fit_args.support,
                  "one_based ratings live on {1..k}, zero_based on {0..k}")
      ->check(CLI::IsMember({"one_based", "zero_based"}))
      ->capture_default_str();
  fit->add_option("--threads", fit_args.threads,
                  "accepted for interface uniformity; fitting runs one chain")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();

  PredictArgs pred_args;
  CLI::App* pred = app.add_subcommand(
      "predict", "posterior-predictive summaries for unobserved cells");
  pred->add_option("--model", pred_args.model,
                   "output directory of a previous fit")
      ->required();
  pred->add_option("--x", pred_args.x, "user covariate CSV")->required();
  pred->add_option("--y", pred_args.y, "item covariate CSV")->required();
  pred->add_option("--out", pred_args.out, "output directory")->required();
  pred->add_option("--cells", pred_args.cells,
                   "user,item CSV of cells to predict");
  pred->add_flag("--all-missing", pred_args.all_missing,
                 "predict every cell not present in --ratings");
  pred->add_option("--ratings", pred_args.ratings,
                   "observed ratings (required with --all-missing)");
  pred->add_flag("--cold-start", pred_args.cold_start,
                 "allow unseen users/items; their predictions use "
                 "covariates only");
  pred->add_option("--ci", pred_args.ci, "credible interval level")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  pred->add_flag("--pmf", pred_args.pmf,
                 "append the full predictive pmf per cell");

  CvArgs cv_args;
  CLI::App* cv = app.add_subcommand(
      "cv", "k-fold cross-validation of the model against baselines");
  cv->add_option("--ratings", cv_args.ratings, "user,item,rating[,k] CSV")
      ->required();
  cv->add_option("--x", cv_args.x, "user covariate CSV")->required();
  cv->add_option("--y", cv_args.y, "item covariate CSV")->required();
  cv->add_option("--models", cv_args.models,
                 "model roster config (see README)")
      ->required();
  cv->add_option("--out", cv_args.out, "output directory")->required();
  cv->add_option("--folds", cv_args.folds, "number of folds")
      ->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  cv->add_option("--seed", cv_args.seed,
                 "seed for the fold split and per-fold fits")
      ->capture_default_str();
  cv->add_option("--threads", cv_args.threads, "folds evaluated in parallel")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  CLI::Option* cv_k = cv->add_option(
      "--k", cv_args.k,
      "rating categories; default: largest rating in the data")
      ->check(CLI::Range(2, 1000000));
  cv->add_option("--support", cv_args.support, "rating support convention")
      ->check(CLI::IsMember({"one_based", "zero_based"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  sim_args.seed_given = sim_seed->count() > 0;
  fit_args.k_given = fit_k->count() > 0;
  cv_args.k_given = cv_k->count() > 0;

  try {
    if (*sim) return run_simulate(sim_args);
    if (*fit) return run_fit(fit_args);
    if (*pred) return run_predict(pred_args);
    if (*cv) return run_cv(cv_args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    const std::string message = e.what();
    std::cerr << "error: " << message << '\n';
    if (message.find("rank deficient") != std::string::npos) {
      std::cerr << "hint: remove or merge collinear covariate columns, or "
                   "rerun with --sparse-coefficients so shrinkage can handle "
                   "the redundancy\n";
    }
    return 1;
  }
  return 0;
}
