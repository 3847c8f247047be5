#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "lab/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"lab: numerical experiments on sphere extension, shell multipliers and tube families"};
  std::string kind, config_path, out;
  std::uint64_t seed = 0;
  int threads = 0;
  bool no_plots = false;
  app.add_option("kind", kind, "caps | rlp | decouple | extension | kakeya | bush | twoscale | restrict | remark | fit")
      ->required();
  app.add_option("--config", config_path, "JSON config file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--out", out, "output directory (default: config output_dir, else lab_out)");
  app.add_option("--threads", threads, "OpenMP threads; > 1 also runs sweep points concurrently");
  app.add_flag("--no-plots", no_plots, "skip plot.svg");
  CLI11_PARSE(app, argc, argv);

  lab::json config;
  {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "lab: cannot read " << config_path << "\n";
      return 2;
    }
    try {
      config = lab::json::parse(in);
    } catch (const lab::json::parse_error& e) {
      std::cerr << "lab: " << config_path << " is not valid JSON: " << e.what() << "\n";
      return 2;
    }
  }
  lab::RunOptions opts;
  opts.out = out;
  if (*seed_opt) opts.seed = seed;
  opts.threads = threads;
  opts.plots = !no_plots;

  lab::ExperimentResult res;
  int status = lab::run_experiment_status(kind, config, opts, &res);
  if (status == 0) {
    std::cout << res.dir << "\n";
    if (!res.summary["fits"].empty()) std::cout << res.summary["fits"].dump(2) << "\n";
  }
  return status;
}
