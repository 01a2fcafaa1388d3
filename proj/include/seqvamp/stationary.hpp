#pragma once

#include <string>
#include <vector>

#include "seqvamp/dmft.hpp"
#include "seqvamp/likelihoods.hpp"
#include "seqvamp/quadrature.hpp"
#include "seqvamp/spectra.hpp"

namespace seqvamp {

enum class SolverStatus { Converged, MaxIter, ScaleDivergent };
const char* to_string(SolverStatus s);

struct FixedPoint {
  double q = 0.0;
  double chi_star = 0.0;
  double nu_star = 0.0;
  double lambda_star = 0.0;
  double zeta_star = 0.0;
  double b_hat_star = 0.0;
  double c_star = 0.0;
  double c_phi_star = 0.0;
  double mu_gamma = 0.0;
  double at_margin = 0.0;
  bool converged = false;
  int iterations = 0;
  SolverStatus status = SolverStatus::MaxIter;
  double residual = 0.0;
  // Expectations at the solution.
  double e_mp = 0.0, e_mp2 = 0.0, e_tm = 0.0, e_mm = 0.0, e_um = 0.0;
  bool multistart_disagree = false;
};

struct SolverOptions {
  double damping = 0.5;
  double tol = 1e-10;
  int max_iter = 10000;
  double eta = 1.0;
  bool multistart = true;
  double chi_floor = 1e-14;
  double scale_ceiling = 1e250;
};

struct FixedPointStart {
  double chi;
  double b_hat;
  double c;
};

FixedPoint solve_fixed_point(const SpectralModel& model, const LikelihoodParams& teacher,
                             const LikelihoodParams& student, const QuadratureRule& quad,
                             const SolverOptions& opt = {});

FixedPoint iterate_fixed_point(const SpectralModel& model, const LikelihoodParams& teacher,
                               const LikelihoodParams& student, const QuadratureRule& quad, const SolverOptions& opt,
                               const FixedPointStart& start);

// Fills the derived fields (nu, lambda, zeta, moments, margin, rate) at a given state.
void evaluate_state(FixedPoint& fp, const SpectralModel& model, const LikelihoodParams& teacher,
                    const LikelihoodParams& student, const QuadratureRule& quad, double eta);

double convergence_rate(const FixedPoint& fp, const SpectralModel& model, double eta);
double at_margin(const FixedPoint& fp, const SpectralModel& model, const LikelihoodParams& teacher,
                 const LikelihoodParams& student, const QuadratureRule& quad);

struct TransientResult {
  bool convergent = true;
  std::vector<double> c_gamma, c_phi, c, theta_gamma_tilde, gt_gt_star;
  std::vector<double> delta_gamma, delta_phi, tail_ratio;
};

TransientResult transient_recursion(const FixedPoint& fp, const SpectralModel& model, const LikelihoodParams& teacher,
                                    const LikelihoodParams& student, double eta, int T, const QuadratureRule& quad,
                                    double rho0 = 0.0);

struct PhaseNode {
  double beta0 = 0.0;
  double sigma0 = 0.0;
  double q = 0.0;
  FixedPoint fp;
  double margin = 0.0;
  std::vector<double> mu;
};

struct PhaseCrossing {
  std::string axis;
  double beta0 = 0.0;
  double sigma0 = 0.0;
  double q = 0.0;
};

struct PhaseScan {
  std::vector<double> beta0s, sigma0s, qs, etas;
  std::vector<PhaseNode> nodes;
  std::vector<PhaseCrossing> crossings;

  const PhaseNode& at(std::size_t ib, std::size_t is, std::size_t iq) const {
    return nodes[(ib * sigma0s.size() + is) * qs.size() + iq];
  }
};

PhaseScan phase_scan(const std::vector<double>& beta0s, const std::vector<double>& sigma0s,
                     const std::vector<double>& qs, EnsembleKind kind, const LikelihoodParams& student,
                     const std::vector<double>& etas, const QuadratureRule& quad, const SolverOptions& opt,
                     int threads = 1);

}  // namespace seqvamp
