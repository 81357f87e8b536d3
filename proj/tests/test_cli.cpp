// End-to-end checks of the command-line interface: full workflows, output
// files, exit codes (0 ok / 1 runtime failure / 2 usage error), and
// byte-level reproducibility of reruns.
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  if (const char* env = std::getenv("ORDREC_CLI")) return env;
  return (fs::read_symlink("/proc/self/exe").parent_path() / "ordrec")
      .string();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("ordrec_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int line_count(const fs::path& path) {
  const std::string content = read_file(path);
  int lines = 0;
  for (const char c : content) {
    if (c == '\n') ++lines;
  }
  return lines;
}

struct CommandResult {
  int status = -1;
  std::string out;
  std::string err;
};

CommandResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out_file = dir / "_stdout.txt";
  const fs::path err_file = dir / "_stderr.txt";
  const std::string command = cli_path() + " " + args + " >" +
                              out_file.string() + " 2>" + err_file.string();
  const int raw = std::system(command.c_str());
  CommandResult result;
  result.status = WEXITSTATUS(raw);
  result.out = read_file(out_file);
  result.err = read_file(err_file);
  return result;
}

// 6x5 grid, 3 ratings per user: 18 observed cells, 12 held out.
void write_sim_config(const fs::path& path) {
  write_file(path,
             "n = 6\n"
             "m = 5\n"
             "p = 2\n"
             "q = 2\n"
             "k = 5\n"
             "rated_per_user = 3\n"
             "seed = 11\n");
}

}  // namespace

TEST_CASE("simulate, fit, and predict round trip through files") {
  const fs::path dir = fresh_dir("roundtrip");
  write_sim_config(dir / "sim.cfg");

  const CommandResult sim = run_cli(
      "simulate --config " + (dir / "sim.cfg").string() + " --out " +
          (dir / "sim").string(),
      dir);
  REQUIRE(sim.status == 0);
  CHECK(sim.out.find("simulated 6x5 grid") != std::string::npos);
  for (const char* file :
       {"ratings.csv", "X.csv", "Y.csv", "truth.json", "manifest.json"}) {
    CHECK(fs::exists(dir / "sim" / file));
  }
  const auto truth = nlohmann::json::parse(read_file(dir / "sim/truth.json"));
  CHECK(truth.at("held_out").size() == 6 * 5 - 6 * 3);
  CHECK(line_count(dir / "sim/ratings.csv") == 1 + 6 * 3);

  const CommandResult fit = run_cli(
      "fit --ratings " + (dir / "sim/ratings.csv").string() + " --x " +
          (dir / "sim/X.csv").string() + " --y " +
          (dir / "sim/Y.csv").string() + " --iterations 150 --burn-in 50 " +
          "--seed 5 --out " + (dir / "fit").string(),
      dir);
  REQUIRE(fit.status == 0);
  CHECK(fit.err.find("iteration 150/150 log-likelihood") != std::string::npos);
  const auto summary =
      nlohmann::json::parse(read_file(dir / "fit/summary.json"));
  CHECK(summary.at("draw_count") == 100);
  CHECK(summary.at("parameters").size() == 4);  // p + q linear coefficients
  const auto manifest =
      nlohmann::json::parse(read_file(dir / "fit/manifest.json"));
  CHECK(manifest.at("model").at("n") == 6);
  CHECK(manifest.at("model").at("k") == 5);
  CHECK(line_count(dir / "fit/draws.csv") == 1 + 100);

  const CommandResult predict = run_cli(
      "predict --model " + (dir / "fit").string() + " --x " +
          (dir / "sim/X.csv").string() + " --y " +
          (dir / "sim/Y.csv").string() + " --all-missing --ratings " +
          (dir / "sim/ratings.csv").string() + " --pmf --out " +
          (dir / "pred").string(),
      dir);
  REQUIRE(predict.status == 0);
  const std::string predictions = read_file(dir / "pred/predictions.csv");
  CHECK(predictions.substr(0, predictions.find('\n')) ==
        "user,item,point,lower,upper,pmf_1,pmf_2,pmf_3,pmf_4,pmf_5");
  CHECK(line_count(dir / "pred/predictions.csv") == 1 + 12);

  write_file(dir / "cells.csv", "user,item\n0,1\n3,4\n");
  const CommandResult two = run_cli(
      "predict --model " + (dir / "fit").string() + " --x " +
          (dir / "sim/X.csv").string() + " --y " +
          (dir / "sim/Y.csv").string() + " --cells " +
          (dir / "cells.csv").string() + " --out " + (dir / "pred2").string(),
      dir);
  REQUIRE(two.status == 0);
  const std::string plain = read_file(dir / "pred2/predictions.csv");
  CHECK(plain.substr(0, plain.find('\n')) == "user,item,point,lower,upper");
  CHECK(line_count(dir / "pred2/predictions.csv") == 1 + 2);
  fs::remove_all(dir);
}

TEST_CASE("reruns with the same seed are byte-identical") {
  const fs::path dir = fresh_dir("repro");
  write_sim_config(dir / "sim.cfg");
  REQUIRE(run_cli("simulate --config " + (dir / "sim.cfg").string() +
                      " --out " + (dir / "a").string(),
                  dir)
              .status == 0);
  REQUIRE(run_cli("simulate --config " + (dir / "sim.cfg").string() +
                      " --out " + (dir / "b").string(),
                  dir)
              .status == 0);
  CHECK(read_file(dir / "a/ratings.csv") == read_file(dir / "b/ratings.csv"));
  CHECK(read_file(dir / "a/X.csv") == read_file(dir / "b/X.csv"));

  const std::string fit_tail = " --ratings " + (dir / "a/ratings.csv").string() +
                               " --x " + (dir / "a/X.csv").string() + " --y " +
                               (dir / "a/Y.csv").string() +
                               " --iterations 120 --burn-in 40 --seed 9";
  REQUIRE(run_cli("fit" + fit_tail + " --out " + (dir / "f1").string(), dir)
              .status == 0);
  REQUIRE(run_cli("fit" + fit_tail + " --out " + (dir / "f2").string(), dir)
              .status == 0);
  CHECK(read_file(dir / "f1/draws.csv") == read_file(dir / "f2/draws.csv"));

  // A fit reconstructed from its own manifest reproduces the draws exactly.
  const auto manifest =
      nlohmann::json::parse(read_file(dir / "f1/manifest.json"));
  const auto& config = manifest.at("config");
  const auto& inputs = manifest.at("inputs");
  std::string rebuilt = "fit --ratings " +
                        inputs.at("ratings").get<std::string>() + " --x " +
                        inputs.at("x").get<std::string>() + " --y " +
                        inputs.at("y").get<std::string>();
  rebuilt += " --iterations " + config.at("iterations").get<std::string>();
  rebuilt += " --burn-in " + config.at("burn_in").get<std::string>();
  rebuilt += " --thin " + config.at("thin").get<std::string>();
  rebuilt += " --seed " + config.at("seed").get<std::string>();
  rebuilt += " --form " + config.at("form").get<std::string>();
  rebuilt += " --latent " + config.at("latent").get<std::string>();
  rebuilt += " --ci " + config.at("ci").get<std::string>();
  rebuilt += " --k " + config.at("k").get<std::string>();
  rebuilt += " --support " + config.at("support").get<std::string>();
  if (config.at("sparse_coefficients").get<std::string>() == "true") {
    rebuilt += " --sparse-coefficients";
  }
  REQUIRE(run_cli(rebuilt + " --out " + (dir / "f3").string(), dir).status ==
          0);
  CHECK(read_file(dir / "f1/draws.csv") == read_file(dir / "f3/draws.csv"));
  fs::remove_all(dir);
}

TEST_CASE("usage and configuration errors exit with code 2") {
  const fs::path dir = fresh_dir("usage");
  write_sim_config(dir / "sim.cfg");
  REQUIRE(run_cli("simulate --config " + (dir / "sim.cfg").string() +
                      " --out " + (dir / "sim").string(),
                  dir)
              .status == 0);
  const std::string data_args =
      " --ratings " + (dir / "sim/ratings.csv").string() + " --x " +
      (dir / "sim/X.csv").string() + " --y " + (dir / "sim/Y.csv").string();

  SUBCASE("missing required flag") {
    const CommandResult r = run_cli("fit --out " + (dir / "z").string(), dir);
    CHECK(r.status == 2);
    CHECK(r.err.find("--ratings") != std::string::npos);
  }
  SUBCASE("unknown flag") {
    CHECK(run_cli("fit" + data_args + " --out z --bogus", dir).status == 2);
  }
  SUBCASE("no subcommand") {
    CHECK(run_cli("", dir).status == 2);
  }
  SUBCASE("config missing a required field names it") {
    write_file(dir / "bad.cfg", "n = 4\nm = 4\np = 1\n");
    const CommandResult r = run_cli(
        "simulate --config " + (dir / "bad.cfg").string() + " --out " +
            (dir / "z").string(),
        dir);
    CHECK(r.status == 2);
    CHECK(r.err.find("missing required field `q`") != std::string::npos);
  }
  SUBCASE("config with an unknown key names it") {
    write_file(dir / "typo.cfg", "n = 4\nm = 4\np = 1\nq = 1\nbogus = 1\n");
    const CommandResult r = run_cli(
        "simulate --config " + (dir / "typo.cfg").string() + " --out " +
            (dir / "z").string(),
        dir);
    CHECK(r.status == 2);
    CHECK(r.err.find("`bogus`") != std::string::npos);
  }
  SUBCASE("cv rejects --folds 1 before touching data") {
    write_file(dir / "models.cfg", "models = im\nim.type = mean\n");
    const CommandResult r = run_cli(
        "cv" + data_args + " --models " + (dir / "models.cfg").string() +
            " --folds 1 --out " + (dir / "z").string(),
        dir);
    CHECK(r.status == 2);
  }
  SUBCASE("unknown model type in the roster") {
    write_file(dir / "models.cfg", "models = wat\nwat.type = magic\n");
    const CommandResult r = run_cli(
        "cv" + data_args + " --models " + (dir / "models.cfg").string() +
            " --out " + (dir / "z").string(),
        dir);
    CHECK(r.status == 2);
    CHECK(r.err.find("gibbs, mean, or funk_svd") != std::string::npos);
  }
  SUBCASE("predict needs exactly one cell source") {
    const std::string head = "predict --model " + (dir / "sim").string() +
                             " --x " + (dir / "sim/X.csv").string() +
                             " --y " + (dir / "sim/Y.csv").string() +
                             " --out " + (dir / "z").string();
    CHECK(run_cli(head, dir).status == 2);
    write_file(dir / "cells.csv", "user,item\n0,0\n");
    CHECK(run_cli(head + " --cells " + (dir / "cells.csv").string() +
                      " --all-missing",
                  dir)
              .status == 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("data and runtime failures exit with code 1 and cite the cause") {
  const fs::path dir = fresh_dir("runtime");
  write_sim_config(dir / "sim.cfg");
  REQUIRE(run_cli("simulate --config " + (dir / "sim.cfg").string() +
                      " --out " + (dir / "sim").string(),
                  dir)
              .status == 0);

  SUBCASE("duplicated covariate column is diagnosed with a hint") {
    // copy X but duplicate the first column so the design is rank deficient
    std::istringstream in(read_file(dir / "sim/X.csv"));
    std::string line;
    std::string doubled;
    bool header = true;
    while (std::getline(in, line)) {
      const std::string first = line.substr(0, line.find(','));
      doubled += line + "," + (header ? "x1_copy" : first) + "\n";
      header = false;
    }
    write_file(dir / "Xdup.csv", doubled);
    const CommandResult r = run_cli(
        "fit --ratings " + (dir / "sim/ratings.csv").string() + " --x " +
            (dir / "Xdup.csv").string() + " --y " +
            (dir / "sim/Y.csv").string() + " --iterations 50 --burn-in 10 " +
            "--out " + (dir / "z").string(),
        dir);
    CHECK(r.status == 1);
    CHECK(r.err.find("rank deficient") != std::string::npos);
    CHECK(r.err.find("hint:") != std::string::npos);
  }
  SUBCASE("rating outside the support cites file and line") {
    write_file(dir / "bad_ratings.csv", "user,item,rating\n0,0,3\n1,1,99\n");
    const CommandResult r = run_cli(
        "fit --ratings " + (dir / "bad_ratings.csv").string() + " --x " +
            (dir / "sim/X.csv").string() + " --y " +
            (dir / "sim/Y.csv").string() + " --k 5 --iterations 50 " +
            "--burn-in 10 --out " + (dir / "z").string(),
        dir);
    CHECK(r.status == 1);
    CHECK(r.err.find("bad_ratings.csv line 3") != std::string::npos);
    CHECK(r.err.find("outside declared support") != std::string::npos);
  }
  SUBCASE("ratings referencing users without covariate rows") {
    write_file(dir / "oob.csv", "user,item,rating\n100,0,3\n");
    const CommandResult r = run_cli(
        "fit --ratings " + (dir / "oob.csv").string() + " --x " +
            (dir / "sim/X.csv").string() + " --y " +
            (dir / "sim/Y.csv").string() + " --out " + (dir / "z").string(),
        dir);
    CHECK(r.status == 1);
    CHECK(r.err.find("user index 100") != std::string::npos);
  }
  SUBCASE("predicting from a non-fit directory") {
    write_file(dir / "cells.csv", "user,item\n0,0\n");
    const CommandResult r = run_cli(
        "predict --model " + (dir / "sim").string() + " --x " +
            (dir / "sim/X.csv").string() + " --y " +
            (dir / "sim/Y.csv").string() + " --cells " +
            (dir / "cells.csv").string() + " --out " + (dir / "z").string(),
        dir);
    CHECK(r.status == 1);
    CHECK(r.err.find("no model block") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("cross-validation reports all roster models") {
  const fs::path dir = fresh_dir("cv");
  write_sim_config(dir / "sim.cfg");
  REQUIRE(run_cli("simulate --config " + (dir / "sim.cfg").string() +
                      " --out " + (dir / "sim").string(),
                  dir)
              .status == 0);
  write_file(dir / "models.cfg",
             "models = mod, item_mean, funk\n"
             "mod.type = gibbs\n"
             "mod.iterations = 80\n"
             "mod.burn_in = 40\n"
             "item_mean.type = mean\n"
             "item_mean.mode = item\n"
             "funk.type = funk_svd\n"
             "funk.factors = 3\n"
             "funk.epochs = 15\n");
  const CommandResult r = run_cli(
      "cv --ratings " + (dir / "sim/ratings.csv").string() + " --x " +
          (dir / "sim/X.csv").string() + " --y " +
          (dir / "sim/Y.csv").string() + " --models " +
          (dir / "models.cfg").string() + " --folds 3 --seed 4 --out " +
          (dir / "cv").string(),
      dir);
  REQUIRE(r.status == 0);
  for (const char* name : {"mod", "item_mean", "funk"}) {
    CHECK(r.out.find(name) != std::string::npos);
  }
  const auto report = nlohmann::json::parse(read_file(dir / "cv/cv_report.json"));
  CHECK(report.at("folds") == 3);
  REQUIRE(report.at("models").size() == 3);
  for (const auto& model : report.at("models")) {
    CHECK(model.at("failed_folds") == 0);
    CHECK(model.at("folds").size() == 3);
    CHECK(model.at("mean_rmse").is_number());
  }
  fs::remove_all(dir);
}
