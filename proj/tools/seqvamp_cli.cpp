#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "seqvamp/config.hpp"
#include "seqvamp/experiment.hpp"
#include "seqvamp/numeric.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Random sequential VAMP: simulation, dynamical theory and stationary analysis"};
  std::string config_path, mode, out, seeds;
  bool quiet = false;
  app.add_option("--config", config_path, "key = value configuration file")->required();
  app.add_option("--mode", mode, "simulate | theory | compare | fixed-point | phase-scan (overrides the file)");
  app.add_option("--out", out, "output directory (overrides the file)");
  app.add_option("--seeds", seeds, "comma-separated seed list (overrides the file)");
  app.add_flag("--quiet", quiet, "suppress progress output");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : seqvamp::kExitValidation;
  }

  seqvamp::ExperimentConfig cfg;
  try {
    cfg = seqvamp::load_config(config_path);
    if (!mode.empty()) cfg.mode = seqvamp::parse_mode(mode);
    if (!out.empty()) cfg.out_dir = out;
    if (!seeds.empty()) {
      try {
        cfg.seeds = seqvamp::parse_seed_list(seeds);
      } catch (const std::invalid_argument& e) {
        throw seqvamp::Error(seqvamp::ErrorKind::Validation, std::string("--seeds: ") + e.what());
      }
    }
  } catch (const seqvamp::Error& e) {
    std::cerr << seqvamp::error_record("error", seqvamp::to_string(e.kind()), seqvamp::kExitValidation, e.what())
              << "\n";
    return seqvamp::kExitValidation;
  }

  std::ofstream null_stream;
  std::ostream& log = quiet ? static_cast<std::ostream&>(null_stream) : std::cout;
  return seqvamp::run_experiment(cfg, log, std::cerr);
}
