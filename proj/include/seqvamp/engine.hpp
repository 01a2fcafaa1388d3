#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seqvamp/likelihoods.hpp"
#include "seqvamp/spectra.hpp"

namespace seqvamp {

struct RecordFlags {
  bool gamma = true;
  bool phi = true;
  bool gamma_tilde = true;
  bool mask = true;
};

struct RunConfig {
  EnsembleSpec ensemble;
  LikelihoodParams teacher;
  LikelihoodParams student = LikelihoodParams::make_noise_free();
  double eta = 1.0;
  int T = 1;
  std::uint64_t seed = 0;
  double nu0 = 1.0;
  RecordFlags record;
  double converge_tol = 1e-10;
  double overflow_guard = 1e150;
  // Divergence is also declared once N^-1 |phi|^2 has grown at each of the
  // last growth_window steps and exceeds growth_guard times its value at t=1.
  // growth_guard <= 0 disables the check.
  double growth_guard = 256.0;
  int growth_window = 8;
  bool stop_on_divergence = true;
  bool force_all_ones_mask = false;

  void validate() const;
};

struct StepRecord {
  double chi = 0.0;
  double lambda = 0.0;
  double tau = 0.0;
  double nu = 0.0;
  double update_fraction = 0.0;
  double error = 0.0;
  double phi_sq = 0.0;
};

struct Trajectory {
  int N = 0;
  double nu0 = 1.0;
  Eigen::VectorXd theta, y, gamma0;
  std::vector<StepRecord> steps;
  std::vector<Eigen::VectorXd> gamma, phi, gamma_tilde;
  std::vector<std::vector<std::uint8_t>> masks;
  Eigen::VectorXd last_gamma;
  bool diverged = false;
  int diverged_at = -1;
  std::string divergence_reason;
  int converged_at = -1;

  int T() const { return static_cast<int>(steps.size()); }
};

struct Instance {
  SampledCovariance cov;
  Eigen::VectorXd theta, y, gamma0;
};

Instance make_instance(const RunConfig& config);

using MaskSource = std::function<void(int t, std::vector<std::uint8_t>& mask)>;
MaskSource bernoulli_masks(double eta, std::uint64_t seed);
MaskSource all_ones_masks();

Trajectory run_rsvamp(const RunConfig& config);
Trajectory run_rsvamp(const RunConfig& config, const Instance& inst, const MaskSource& masks);

std::optional<double> estimation_error(const Trajectory& traj, int t, const LikelihoodParams& student);

}  // namespace seqvamp
