#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ordrec/evaluate.hpp"
#include "ordrec/model.hpp"
#include "ordrec/sampler.hpp"
#include "ordrec/simulate.hpp"

namespace ordrec {

inline constexpr const char* kLibraryVersion = "0.1.0";

std::string to_string(PredictorForm form);
PredictorForm predictor_form_from_string(const std::string& text);
std::string to_string(SupportBase base);
SupportBase support_base_from_string(const std::string& text);

// Writes via a temporary file in the same directory followed by a rename,
// so readers never observe a partially written file.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

// --- covariate matrices --------------------------------------------------

struct NamedMatrix {
  std::vector<std::string> names;  // header row
  Eigen::MatrixXd values;
};

// CSV with a header row; all values must parse as finite numbers. Errors
// cite the file name and line number.
NamedMatrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path,
                      const Eigen::MatrixXd& values,
                      const std::vector<std::string>& names);

// --- ratings -------------------------------------------------------------

// Raw parse of `user,item,rating[,k]` rows (0-based indices), keeping the
// source line of each row so later validation can cite it.
struct RatingsFile {
  std::vector<Rating> rows;
  std::vector<int> lines;
  std::vector<std::optional<int>> cell_k;
  bool has_k_column = false;
};

RatingsFile read_ratings_csv(const std::filesystem::path& path);
void write_ratings_csv(const std::filesystem::path& path,
                       const RatingData& data);

// Validates parsed rows against the grid and rating scale and assembles
// RatingData. When `k` is absent it is inferred as the largest rating seen
// (floored at 2, the smallest scale RatingData accepts). Errors cite the
// offending line.
RatingData build_rating_data(const RatingsFile& file,
                             const std::string& file_name, int n, int m,
                             std::optional<int> k, SupportBase base);

// --- posterior draws -------------------------------------------------------

struct DrawsFile {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // draws x parameters, column order = names
};

// Wide format: one row per retained draw, one column per parameter, named
// b[1] / B[1,2] / U[5,1] style; values printed with %.17g (round-trip exact).
void write_draws_csv(const std::filesystem::path& path,
                     const PosteriorDraws& draws);
DrawsFile read_draws_csv(const std::filesystem::path& path);

// Rebuilds a PosteriorDraws from a fit output directory (manifest.json for
// the model block, draws.csv for the numbers).
PosteriorDraws load_model(const std::filesystem::path& fit_dir);

// --- reports ---------------------------------------------------------------

void write_summary_json(const std::filesystem::path& path,
                        const std::vector<ParameterSummary>& rows,
                        double ci_level, int draw_count);
void write_truth_json(const std::filesystem::path& path, const SimConfig& cfg,
                      const SimulatedData& sim);
void write_predictions_csv(const std::filesystem::path& path,
                           const PredictionResult& result, bool include_pmf);
void write_cv_report_json(const std::filesystem::path& path,
                          const std::vector<CvReport>& reports);

// Run manifest: command, resolved configuration, inputs/outputs, library
// version, wall-clock duration, and for fits the model block needed to
// reload the draws. Written atomically.
void write_manifest(const std::filesystem::path& path,
                    const std::string& command, std::uint64_t seed,
                    const std::map<std::string, std::string>& config,
                    const std::map<std::string, std::string>& inputs,
                    const std::vector<std::string>& outputs,
                    double duration_seconds,
                    const PosteriorDraws* model = nullptr);

// --- flat key-value config files --------------------------------------------

// One `key = value` per line; '#' starts a comment; keys must be unique.
std::map<std::string, std::string> parse_config_file(
    const std::filesystem::path& path);

// Schema-validating accessor over a parsed config. All lookups record the
// key as consumed; reject_unknown() then flags typos. Every failure names
// the field and the source file.
class ConfigReader {
 public:
  ConfigReader(std::map<std::string, std::string> values, std::string source);

  bool has(const std::string& key) const;
  std::string require_string(const std::string& key);
  std::string get_string(const std::string& key, const std::string& fallback);
  int require_int(const std::string& key);
  int get_int(const std::string& key, int fallback);
  double get_double(const std::string& key, double fallback);
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  void reject_unknown() const;

 private:
  std::string raw(const std::string& key);
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
  std::string source_;
};

}  // namespace ordrec
