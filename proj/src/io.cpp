#include "ordrec/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ordrec {

namespace {

using nlohmann::json;

std::string fmt(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string trim(const std::string& text) {
  std::size_t first = 0;
  std::size_t last = text.size();
  while (first < last && std::isspace(static_cast<unsigned char>(text[first])))
    ++first;
  while (last > first &&
         std::isspace(static_cast<unsigned char>(text[last - 1])))
    --last;
  return text.substr(first, last - first);
}

// Splits one CSV line. Fields may be double-quoted (required when they
// contain the separator, e.g. parameter names like "U[1,1]"); inside quotes
// "" is a literal quote. Unquoted fields are trimmed.
std::vector<std::string> split(const std::string& line, char sep,
                               const std::string& context) {
  std::vector<std::string> fields;
  const std::size_t size = line.size();
  std::size_t i = 0;
  while (true) {
    std::size_t start = i;
    while (start < size &&
           std::isspace(static_cast<unsigned char>(line[start]))) {
      ++start;
    }
    if (start < size && line[start] == '"') {
      std::string field;
      std::size_t pos = start + 1;
      while (true) {
        if (pos >= size) {
          throw std::runtime_error(context + ": unterminated quoted field");
        }
        if (line[pos] == '"') {
          if (pos + 1 < size && line[pos + 1] == '"') {
            field += '"';
            pos += 2;
          } else {
            ++pos;
            break;
          }
        } else {
          field += line[pos++];
        }
      }
      while (pos < size && line[pos] != sep) {
        if (!std::isspace(static_cast<unsigned char>(line[pos]))) {
          throw std::runtime_error(context +
                                   ": unexpected text after closing quote");
        }
        ++pos;
      }
      fields.push_back(std::move(field));
      if (pos >= size) break;
      i = pos + 1;
    } else {
      const std::size_t pos = line.find(sep, i);
      if (pos == std::string::npos) {
        fields.push_back(trim(line.substr(i)));
        break;
      }
      fields.push_back(trim(line.substr(i, pos - i)));
      i = pos + 1;
    }
  }
  return fields;
}

// Quotes a field iff it needs it (contains the separator or a quote).
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"") == std::string::npos) return text;
  std::string quoted = "\"";
  for (const char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

long parse_long(const std::string& token, const std::string& context) {
  std::size_t consumed = 0;
  long value = 0;
  try {
    value = std::stol(token, &consumed);
  } catch (const std::exception&) {
    throw std::runtime_error(context + ": '" + token +
                             "' is not an integer");
  }
  if (consumed != token.size()) {
    throw std::runtime_error(context + ": '" + token +
                             "' is not an integer");
  }
  return value;
}

double parse_double(const std::string& token, const std::string& context) {
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &consumed);
  } catch (const std::exception&) {
    throw std::runtime_error(context + ": '" + token + "' is not numeric");
  }
  if (consumed != token.size()) {
    throw std::runtime_error(context + ": '" + token + "' is not numeric");
  }
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return in;
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  try {
    json value;
    in >> value;
    return value;
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() +
                             " is not valid JSON: " + e.what());
  }
}

}  // namespace

std::string to_string(PredictorForm form) {
  return form == PredictorForm::linear ? "linear" : "bilinear";
}

PredictorForm predictor_form_from_string(const std::string& text) {
  if (text == "linear") return PredictorForm::linear;
  if (text == "bilinear") return PredictorForm::bilinear;
  throw std::invalid_argument("predictor form must be 'linear' or "
                              "'bilinear', got '" + text + "'");
}

std::string to_string(SupportBase base) {
  return base == SupportBase::one_based ? "one_based" : "zero_based";
}

SupportBase support_base_from_string(const std::string& text) {
  if (text == "one_based") return SupportBase::one_based;
  if (text == "zero_based") return SupportBase::zero_based;
  throw std::invalid_argument("support must be 'one_based' or 'zero_based', "
                              "got '" + text + "'");
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write " + tmp.string());
    }
    out << content;
    out.flush();
    if (!out) {
      throw std::runtime_error("write to " + tmp.string() + " failed");
    }
  }
  std::filesystem::rename(tmp, path);
}

NamedMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const std::string name = path.filename().string();
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(name + ": empty file, expected a header row");
  }
  NamedMatrix matrix;
  matrix.names = split(line, ',', name + " line 1");
  const std::size_t cols = matrix.names.size();
  std::vector<std::vector<double>> rows;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const std::string context = name + " line " + std::to_string(line_number);
    const std::vector<std::string> fields = split(line, ',', context);
    if (fields.size() != cols) {
      throw std::runtime_error(context + ": expected " +
                               std::to_string(cols) + " fields, got " +
                               std::to_string(fields.size()));
    }
    std::vector<double> row(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = parse_double(fields[c], context);
      if (!std::isfinite(row[c])) {
        throw std::runtime_error(context + ": value '" + fields[c] +
                                 "' is not finite");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw std::runtime_error(name + ": no data rows");
  }
  matrix.values.resize(static_cast<int>(rows.size()),
                       static_cast<int>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      matrix.values(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
    }
  }
  return matrix;
}

void write_matrix_csv(const std::filesystem::path& path,
                      const Eigen::MatrixXd& values,
                      const std::vector<std::string>& names) {
  if (static_cast<int>(names.size()) != values.cols()) {
    throw std::invalid_argument("matrix has " + std::to_string(values.cols()) +
                                " columns but " + std::to_string(names.size()) +
                                " names");
  }
  std::string out;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c > 0) out += ',';
    out += csv_field(names[c]);
  }
  out += '\n';
  for (int r = 0; r < values.rows(); ++r) {
    for (int c = 0; c < values.cols(); ++c) {
      if (c > 0) out += ',';
      out += fmt(values(r, c));
    }
    out += '\n';
  }
  write_text_atomic(path, out);
}

RatingsFile read_ratings_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  const std::string name = path.filename().string();
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(name + ": empty file, expected a header row");
  }
  const std::vector<std::string> header = split(line, ',', name + " line 1");
  const bool has_k = header.size() == 4;
  if (!(header.size() == 3 || has_k) || header[0] != "user" ||
      header[1] != "item" || header[2] != "rating" ||
      (has_k && header[3] != "k")) {
    throw std::runtime_error(
        name + ": header must be 'user,item,rating' or 'user,item,rating,k'");
  }
  RatingsFile file;
  file.has_k_column = has_k;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const std::string context = name + " line " + std::to_string(line_number);
    const std::vector<std::string> fields = split(line, ',', context);
    if (fields.size() != header.size()) {
      throw std::runtime_error(context + ": expected " +
                               std::to_string(header.size()) +
                               " fields, got " +
                               std::to_string(fields.size()));
    }
    Rating rating;
    rating.user = static_cast<int>(parse_long(fields[0], context));
    rating.item = static_cast<int>(parse_long(fields[1], context));
    rating.value = static_cast<int>(parse_long(fields[2], context));
    if (rating.user < 0 || rating.item < 0) {
      throw std::runtime_error(context + ": user and item indices must be "
                               "non-negative (0-based)");
    }
    file.rows.push_back(rating);
    file.lines.push_back(line_number);
    if (has_k) {
      file.cell_k.push_back(
          static_cast<int>(parse_long(fields[3], context)));
    } else {
      file.cell_k.push_back(std::nullopt);
    }
  }
  if (file.rows.empty()) {
    throw std::runtime_error(name + ": no data rows");
  }
  return file;
}

void write_ratings_csv(const std::filesystem::path& path,
                       const RatingData& data) {
  const bool with_k = data.scale().has_overrides();
  std::string out = with_k ? "user,item,rating,k\n" : "user,item,rating\n";
  for (const Rating& r : data.observations()) {
    out += std::to_string(r.user);
    out += ',';
    out += std::to_string(r.item);
    out += ',';
    out += std::to_string(r.value);
    if (with_k) {
      out += ',';
      out += std::to_string(data.scale().k_for(r.user, r.item));
    }
    out += '\n';
  }
  write_text_atomic(path, out);
}

RatingData build_rating_data(const RatingsFile& file,
                             const std::string& file_name, int n, int m,
                             std::optional<int> k, SupportBase base) {
  int global_k;
  if (k.has_value()) {
    global_k = *k;
  } else {
    int max_rating = 0;
    for (const Rating& r : file.rows) max_rating = std::max(max_rating, r.value);
    global_k = std::max(max_rating, 2);
  }
  RatingScale scale(global_k, base);
  for (std::size_t i = 0; i < file.rows.size(); ++i) {
    if (file.cell_k[i].has_value()) {
      try {
        scale.set_cell_k(file.rows[i].user, file.rows[i].item,
                         *file.cell_k[i]);
      } catch (const std::exception& e) {
        throw std::runtime_error(file_name + " line " +
                                 std::to_string(file.lines[i]) + ": " +
                                 e.what());
      }
    }
  }
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < file.rows.size(); ++i) {
    const Rating& r = file.rows[i];
    const std::string context =
        file_name + " line " + std::to_string(file.lines[i]);
    if (r.user >= n) {
      throw std::runtime_error(
          context + ": user index " + std::to_string(r.user) +
          " out of range [0, " + std::to_string(n) +
          ") (the user covariate matrix has " + std::to_string(n) + " rows)");
    }
    if (r.item >= m) {
      throw std::runtime_error(
          context + ": item index " + std::to_string(r.item) +
          " out of range [0, " + std::to_string(m) +
          ") (the item covariate matrix has " + std::to_string(m) + " rows)");
    }
    if (!seen.insert({r.user, r.item}).second) {
      throw std::runtime_error(context + ": duplicate observation for cell (" +
                               std::to_string(r.user) + ", " +
                               std::to_string(r.item) + ")");
    }
    const int cell_k = scale.k_for(r.user, r.item);
    const int lo = scale.min_rating();
    if (r.value < lo || r.value > cell_k) {
      throw std::runtime_error(context + ": rating " +
                               std::to_string(r.value) +
                               " outside declared support {" +
                               std::to_string(lo) + ".." +
                               std::to_string(cell_k) + "}");
    }
  }
  return RatingData(n, m, file.rows, scale);
}

void write_draws_csv(const std::filesystem::path& path,
                     const PosteriorDraws& draws) {
  std::vector<std::string> names = draws.coefficient_names();
  const std::vector<std::string> u_names = draws.latent_u_names();
  const std::vector<std::string> v_names = draws.latent_v_names();
  names.insert(names.end(), u_names.begin(), u_names.end());
  names.insert(names.end(), v_names.begin(), v_names.end());

  std::string out;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c > 0) out += ',';
    out += csv_field(names[c]);
  }
  out += '\n';
  const int s = draws.draw_count();
  for (int row = 0; row < s; ++row) {
    bool first = true;
    const auto append = [&](double value) {
      if (!first) out += ',';
      first = false;
      out += fmt(value);
    };
    for (int c = 0; c < draws.coefficients.cols(); ++c) {
      append(draws.coefficients(row, c));
    }
    for (int c = 0; c < draws.latent_u.cols(); ++c) {
      append(draws.latent_u(row, c));
    }
    for (int c = 0; c < draws.latent_v.cols(); ++c) {
      append(draws.latent_v(row, c));
    }
    out += '\n';
  }
  write_text_atomic(path, out);
}

DrawsFile read_draws_csv(const std::filesystem::path& path) {
  const NamedMatrix matrix = read_matrix_csv(path);
  return DrawsFile{matrix.names, matrix.values};
}

PosteriorDraws load_model(const std::filesystem::path& fit_dir) {
  const json manifest = load_json(fit_dir / "manifest.json");
  if (!manifest.contains("model")) {
    throw std::runtime_error(
        (fit_dir / "manifest.json").string() +
        " has no model block; prediction needs a `fit` output directory");
  }
  PosteriorDraws draws;
  try {
    const json& model = manifest.at("model");
    draws.form = predictor_form_from_string(model.at("form"));
    draws.p = model.at("p");
    draws.q = model.at("q");
    draws.n = model.at("n");
    draws.m = model.at("m");
    draws.latent_rank = model.at("latent_rank");
    draws.k = model.at("k");
    draws.support_base = support_base_from_string(model.at("support"));
    draws.seed = model.at("seed");
    draws.iterations = model.at("iterations");
    draws.burn_in = model.at("burn_in");
    draws.thin = model.at("thin");
    draws.sparse_coefficients = model.at("sparse_coefficients");
    const std::vector<int> users = model.at("user_observed");
    const std::vector<int> items = model.at("item_observed");
    draws.user_observed.assign(users.begin(), users.end());
    draws.item_observed.assign(items.begin(), items.end());
  } catch (const json::exception& e) {
    throw std::runtime_error((fit_dir / "manifest.json").string() +
                             ": model block is incomplete: " + e.what());
  }

  const DrawsFile file = read_draws_csv(fit_dir / "draws.csv");
  const int d = coefficient_dim(draws.form, draws.p, draws.q);
  const int u_cols = draws.n * draws.latent_rank;
  const int v_cols = draws.m * draws.latent_rank;
  if (file.values.cols() != d + u_cols + v_cols) {
    throw std::runtime_error(
        (fit_dir / "draws.csv").string() + " has " +
        std::to_string(file.values.cols()) +
        " parameter columns but the manifest model block implies " +
        std::to_string(d + u_cols + v_cols));
  }
  draws.coefficients = file.values.leftCols(d);
  draws.latent_u = file.values.middleCols(d, u_cols);
  draws.latent_v = file.values.rightCols(v_cols);
  return draws;
}

void write_summary_json(const std::filesystem::path& path,
                        const std::vector<ParameterSummary>& rows,
                        double ci_level, int draw_count) {
  json parameters = json::array();
  for (const ParameterSummary& row : rows) {
    parameters.push_back({{"name", row.name},
                          {"mean", row.mean},
                          {"sd", row.sd},
                          {"median", row.median},
                          {"lower", row.lower},
                          {"upper", row.upper}});
  }
  const json summary = {{"ci_level", ci_level},
                        {"draw_count", draw_count},
                        {"parameters", parameters}};
  write_text_atomic(path, summary.dump(2) + "\n");
}

void write_truth_json(const std::filesystem::path& path, const SimConfig& cfg,
                      const SimulatedData& sim) {
  json truth;
  truth["config"] = {{"n", cfg.n},
                     {"m", cfg.m},
                     {"p", cfg.p},
                     {"q", cfg.q},
                     {"k", cfg.k},
                     {"form", to_string(cfg.form)},
                     {"rated_per_user", cfg.rated_per_user},
                     {"latent_rank", cfg.latent_rank},
                     {"latent_sparsity", cfg.latent_sparsity},
                     {"replicates", cfg.replicates},
                     {"seed", cfg.seed}};
  truth["coefficients"] = {
      {"form", to_string(sim.coefficients.form)},
      {"p", sim.coefficients.p},
      {"q", sim.coefficients.q},
      {"values", std::vector<double>(
                     sim.coefficients.values.data(),
                     sim.coefficients.values.data() +
                         sim.coefficients.values.size())}};
  json u = json::array();
  json v = json::array();
  for (int i = 0; i < sim.latent.U.rows(); ++i) {
    json row = json::array();
    for (int c = 0; c < sim.latent.U.cols(); ++c) row.push_back(sim.latent.U(i, c));
    u.push_back(row);
  }
  for (int j = 0; j < sim.latent.V.rows(); ++j) {
    json row = json::array();
    for (int c = 0; c < sim.latent.V.cols(); ++c) row.push_back(sim.latent.V(j, c));
    v.push_back(row);
  }
  truth["latent"] = {{"rank", sim.latent.rank()}, {"u", u}, {"v", v}};
  json held_out = json::array();
  for (const Rating& r : sim.held_out) {
    held_out.push_back({r.user, r.item, r.value});
  }
  truth["held_out"] = held_out;
  write_text_atomic(path, truth.dump(2) + "\n");
}

void write_predictions_csv(const std::filesystem::path& path,
                           const PredictionResult& result, bool include_pmf) {
  const int lo = result.support_base == SupportBase::one_based ? 1 : 0;
  std::string out = "user,item,point,lower,upper";
  if (include_pmf) {
    const int support =
        result.cells.empty() ? 0 : static_cast<int>(result.cells[0].pmf.size());
    for (int t = 0; t < support; ++t) {
      out += ",pmf_" + std::to_string(lo + t);
    }
  }
  out += '\n';
  for (const CellPrediction& cell : result.cells) {
    out += std::to_string(cell.user);
    out += ',';
    out += std::to_string(cell.item);
    out += ',';
    out += fmt(cell.point);
    out += ',';
    out += fmt(cell.lower);
    out += ',';
    out += fmt(cell.upper);
    if (include_pmf) {
      for (int t = 0; t < cell.pmf.size(); ++t) {
        out += ',';
        out += fmt(cell.pmf[t]);
      }
    }
    out += '\n';
  }
  write_text_atomic(path, out);
}

void write_cv_report_json(const std::filesystem::path& path,
                          const std::vector<CvReport>& reports) {
  json models = json::array();
  for (const CvReport& report : reports) {
    json folds = json::array();
    for (const FoldOutcome& fold : report.fold_outcomes) {
      json entry = {{"fold", fold.fold},
                    {"ok", fold.ok},
                    {"test_count", fold.test_count}};
      if (fold.ok) {
        entry["rmse"] = fold.rmse;
      } else {
        entry["error"] = fold.error;
      }
      folds.push_back(entry);
    }
    json model = {{"name", report.model},
                  {"display", report.display()},
                  {"failed_folds", report.failed_folds},
                  {"folds", folds}};
    if (std::isfinite(report.mean_rmse)) {
      model["mean_rmse"] = report.mean_rmse;
      model["sd_rmse"] = report.sd_rmse;
    } else {
      model["mean_rmse"] = nullptr;
      model["sd_rmse"] = nullptr;
    }
    models.push_back(model);
  }
  json report = {{"folds", reports.empty() ? 0 : reports[0].folds},
                 {"seed", reports.empty() ? 0 : reports[0].seed},
                 {"models", models}};
  write_text_atomic(path, report.dump(2) + "\n");
}

void write_manifest(const std::filesystem::path& path,
                    const std::string& command, std::uint64_t seed,
                    const std::map<std::string, std::string>& config,
                    const std::map<std::string, std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    double duration_seconds, const PosteriorDraws* model) {
  json manifest;
  manifest["command"] = command;
  manifest["library_version"] = kLibraryVersion;
  manifest["seed"] = seed;
  manifest["config"] = config;
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  manifest["duration_seconds"] = duration_seconds;
  if (model != nullptr) {
    manifest["model"] = {
        {"form", to_string(model->form)},
        {"p", model->p},
        {"q", model->q},
        {"n", model->n},
        {"m", model->m},
        {"latent_rank", model->latent_rank},
        {"k", model->k},
        {"support", to_string(model->support_base)},
        {"seed", model->seed},
        {"iterations", model->iterations},
        {"burn_in", model->burn_in},
        {"thin", model->thin},
        {"sparse_coefficients", model->sparse_coefficients},
        {"user_observed",
         std::vector<int>(model->user_observed.begin(),
                          model->user_observed.end())},
        {"item_observed",
         std::vector<int>(model->item_observed.begin(),
                          model->item_observed.end())}};
  }
  write_text_atomic(path, manifest.dump(2) + "\n");
}

std::map<std::string, std::string> parse_config_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open config file " + path.string());
  }
  const std::string name = path.filename().string();
  std::map<std::string, std::string> values;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::size_t comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(name + " line " +
                                  std::to_string(line_number) +
                                  ": expected `key = value`");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument(name + " line " +
                                  std::to_string(line_number) +
                                  ": expected `key = value`");
    }
    if (!values.emplace(key, value).second) {
      throw std::invalid_argument(name + " line " +
                                  std::to_string(line_number) +
                                  ": duplicate key `" + key + "`");
    }
  }
  return values;
}

ConfigReader::ConfigReader(std::map<std::string, std::string> values,
                           std::string source)
    : values_(std::move(values)), source_(std::move(source)) {}

bool ConfigReader::has(const std::string& key) const {
  return values_.count(key) > 0;
}

std::string ConfigReader::raw(const std::string& key) {
  consumed_.insert(key);
  return values_.at(key);
}

std::string ConfigReader::require_string(const std::string& key) {
  if (!has(key)) {
    throw std::invalid_argument(source_ + ": missing required field `" + key +
                                "`");
  }
  return raw(key);
}

std::string ConfigReader::get_string(const std::string& key,
                                     const std::string& fallback) {
  return has(key) ? raw(key) : fallback;
}

int ConfigReader::require_int(const std::string& key) {
  const std::string text = require_string(key);
  try {
    std::size_t consumed = 0;
    const long value = std::stol(text, &consumed);
    if (consumed != text.size()) throw std::invalid_argument(text);
    return static_cast<int>(value);
  } catch (const std::exception&) {
    throw std::invalid_argument(source_ + ": field `" + key +
                                "` must be an integer, got '" + text + "'");
  }
}

int ConfigReader::get_int(const std::string& key, int fallback) {
  return has(key) ? require_int(key) : fallback;
}

double ConfigReader::get_double(const std::string& key, double fallback) {
  if (!has(key)) return fallback;
  const std::string text = raw(key);
  try {
    std::size_t consumed = 0;
    const double value = std::stod(text, &consumed);
    if (consumed != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw std::invalid_argument(source_ + ": field `" + key +
                                "` must be a number, got '" + text + "'");
  }
}

std::uint64_t ConfigReader::get_uint64(const std::string& key,
                                       std::uint64_t fallback) {
  if (!has(key)) return fallback;
  const std::string text = raw(key);
  try {
    std::size_t consumed = 0;
    const std::uint64_t value = std::stoull(text, &consumed);
    if (consumed != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw std::invalid_argument(source_ + ": field `" + key +
                                "` must be a non-negative integer, got '" +
                                text + "'");
  }
}

bool ConfigReader::get_bool(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  std::string text = raw(key);
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw std::invalid_argument(source_ + ": field `" + key +
                              "` must be true or false, got '" + text + "'");
}

void ConfigReader::reject_unknown() const {
  std::vector<std::string> unknown;
  for (const auto& [key, value] : values_) {
    if (consumed_.count(key) == 0) unknown.push_back(key);
  }
  if (!unknown.empty()) {
    std::string joined;
    for (std::size_t i = 0; i < unknown.size(); ++i) {
      if (i > 0) joined += ", ";
      joined += "`" + unknown[i] + "`";
    }
    throw std::invalid_argument(source_ + ": unknown field" +
                                (unknown.size() > 1 ? "s " : " ") + joined);
  }
}

}  // namespace ordrec
