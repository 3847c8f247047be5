#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lab/report.hpp"
#include "lab/serialization.hpp"

namespace lab {

struct Fit {
  double C = 0, p = 0;
  double rms = 0;  // of the log residuals, roughly a relative error
  int points = 0;
};

// y = C (log x)^p by least squares of log y on log log x. Needs >= 4 points
// with x >= e and y > 0.
Fit fit_log_exponent(const std::vector<std::pair<double, double>>& points);
// y = C x^p by least squares of log y on log x.
Fit fit_power(const std::vector<std::pair<double, double>>& points);

// Bad config: unknown key, wrong type, value out of range. Maps to exit 2.
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path(path) {}
  std::string path;
};

const json& config_schema();
// Throws ConfigError naming the first offending JSON path.
void validate_config(const json& config);
// Schema defaults filled in, kind and seed applied. Validates first.
json resolve_config(const std::string& kind, const json& config, std::optional<std::uint64_t> seed = {});

struct RunOptions {
  std::string out;  // empty: the config's output_dir, else lab_out
  std::optional<std::uint64_t> seed;
  int threads = 0;  // 0 leaves OpenMP alone
  bool plots = true;
};

struct ExperimentResult {
  std::string id;  // kind + config hash prefix
  std::string hash;
  std::string dir;  // out/id
  json config;      // resolved
  json summary;
  std::vector<RatioReport> rows;
};

// Runs a sweep and writes <out>/<id>/{results.csv, config.json, summary.json}
// plus plot.svg and per-kind artifacts. Rows finished before an exception are
// flushed. Throws ConfigError, CertificationError, BudgetError.
ExperimentResult run_experiment(const std::string& kind, const json& config, const RunOptions& opts = {});

// Exit status: 0 ok, 2 config or certification failure, 3 budget abort.
// Messages go to stderr.
int run_experiment_status(const std::string& kind, const json& config, const RunOptions& opts,
                          ExperimentResult* result = nullptr);

// Rows of a comma-separated file as strings; the first line goes to `header`.
std::vector<std::vector<std::string>> read_csv(const std::string& path, std::vector<std::string>* header = nullptr);

// ratio against a log-scaled parameter with the fitted curve.
std::string svg_plot(const std::vector<std::pair<double, double>>& points, const Fit* fit, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel, bool log_model);

}  // namespace lab
