#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "seqvamp/likelihoods.hpp"
#include "seqvamp/spectra.hpp"
#include "seqvamp/stationary.hpp"

namespace seqvamp {

enum class Mode { Simulate, Theory, Compare, FixedPoint, PhaseScan };

const char* to_string(Mode m);
Mode parse_mode(const std::string& s);

struct ExperimentConfig {
  Mode mode = Mode::Simulate;
  EnsembleSpec ensemble;
  LikelihoodParams teacher;
  LikelihoodParams student = LikelihoodParams::make_noise_free();
  double eta = 1.0;
  int T = 5;
  std::vector<std::uint64_t> seeds = {0};
  double nu0 = 1.0;
  int quad_order = 60;
  int panel_order = 24;
  bool two_time = true;
  SolverOptions solver;
  double converge_tol = 1e-10;
  double overflow_guard = 1e150;
  double growth_guard = 256.0;
  int growth_window = 8;
  bool force_all_ones_mask = false;
  bool dump_vectors = false;
  std::vector<double> scan_beta0, scan_sigma0, scan_q, scan_eta;
  std::string out_dir = "out";

  // Line on which each "section.key" was set; used for diagnostics.
  std::map<std::string, int> lines;
  std::string source = "<config>";

  double q() const;
  void validate() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

std::vector<double> parse_double_list(const std::string& s);
std::vector<std::uint64_t> parse_seed_list(const std::string& s);

}  // namespace seqvamp
