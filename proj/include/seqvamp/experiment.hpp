#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "seqvamp/config.hpp"
#include "seqvamp/dmft.hpp"
#include "seqvamp/engine.hpp"

namespace seqvamp {

enum ExitCode { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3, kExitDivergence = 4 };

// Fan-out width: SEQMP_THREADS if set, otherwise the hardware concurrency.
int thread_cap();

RunConfig make_run_config(const ExperimentConfig& cfg, std::uint64_t seed);
QuadratureRule make_quadrature(const ExperimentConfig& cfg);

std::vector<Trajectory> simulate_seeds(const ExperimentConfig& cfg);
OrderParameterTable theory_table(const ExperimentConfig& cfg);

// Per-seed observables of a trajectory.
struct SeedObservables {
  int T = 0;
  Eigen::VectorXd chi, tau, error;
  Eigen::MatrixXd c_phi, c_gamma;
};
SeedObservables observe(const Trajectory& tr);

struct CompareEntry {
  std::string quantity;
  int i = 0;
  int j = 0;
  double theory = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double z = 0.0;
};

struct CompareReport {
  int T = 0;
  int seeds = 0;
  std::vector<CompareEntry> entries;

  double max_abs_z(const std::string& quantity = "") const;
};

CompareReport compare_report(const OrderParameterTable& theory, const std::vector<SeedObservables>& sims);

void write_vectors(const std::string& path, const std::vector<Eigen::VectorXd>& vs);
std::vector<Eigen::VectorXd> read_vectors(const std::string& path);

// Single-line JSON record for errors and declared divergence.
std::string error_record(const std::string& status, const std::string& kind, int exit_code,
                         const std::string& message, int step = -1);

int run_experiment(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err);

}  // namespace seqvamp
