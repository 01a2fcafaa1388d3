#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "seqvamp/likelihoods.hpp"
#include "seqvamp/quadrature.hpp"
#include "seqvamp/spectra.hpp"

namespace seqvamp {

struct OrderParameterTable {
  int T = 0;
  double q = 0.0;
  double eta = 1.0;
  double nu0 = 1.0;
  bool two_time = true;
  // Per-time vectors, entry t-1 holds time t.
  Eigen::VectorXd tau, lambda, nu, chi, zeta, b_hat, theta_gamma_tilde, error, div_free;
  // T x T; off-diagonal entries are NaN when two_time is false.
  Eigen::MatrixXd big_q, big_d, c, c_phi, c_gamma, gt_gt;

  double nu_before(int t) const { return t == 1 ? nu0 : nu(t - 2); }
};

struct TheoryOptions {
  int T = 5;
  double eta = 1.0;
  double nu0 = 1.0;
  bool two_time = true;
  bool check_div_free = false;
};

OrderParameterTable run_theory(const TheoryOptions& opt, const SpectralModel& model, const LikelihoodParams& teacher,
                               const LikelihoodParams& student, const QuadratureRule& quad);

// Weights over l = 0..h of the last update at or before step h.
Eigen::VectorXd last_update_law(int h, double eta);

// Joint law of the last updates (l, l') of gamma^(t-1) and gamma^(t'-1),
// t' < t; entry (l, l') for l in 0..t-1, l' in 0..t'-1.
Eigen::MatrixXd pairwise_update_law(int t, int t_prime, double eta);

double response_q(const SpectralModel& model, double tau1, double tau2);
double response_d(const SpectralModel& model, double tau1, double tau2, double b1, double b2, double zeta1,
                  double zeta2);
double zeta_of_tau(const SpectralModel& model, double tau);
bool coincident(double tau1, double tau2);

// Single-branch expectations under theta ~ N(0,q), y ~ p0, u | theta ~ N(theta b, c)
// with u the argument of the student moments at nu.
struct BranchMoments {
  double mp = 0.0;
  double tm = 0.0;
  double mm = 0.0;
  double um = 0.0;
  double mp2 = 0.0;
};
BranchMoments branch_moments(double q, double b, double cphi_diag, double nu, const LikelihoodParams& teacher,
                             const LikelihoodParams& student, const QuadratureRule& quad);

// E[m1(u1) m2(u2)], E[m1(u1) u2], E[u1 m2(u2)] for a joint (theta, u1, u2) covariance.
struct PairMoments {
  double mm = 0.0;
  double mu = 0.0;
  double um = 0.0;
};
PairMoments pair_moments(const Eigen::Matrix3d& cov, double nu1, double nu2, const LikelihoodParams& teacher,
                         const LikelihoodParams& student, const QuadratureRule& quad);

Eigen::VectorXd theory_error_curve(const OrderParameterTable& table, const LikelihoodParams& teacher,
                                   const LikelihoodParams& student, const QuadratureRule& quad);

struct McMoments {
  long n = 0;
  Eigen::VectorXd chi, chi_se, theta_gamma_tilde, theta_gamma_tilde_se, error, error_se;
  Eigen::MatrixXd c_phi, c_phi_se, c_gamma, c_gamma_se, gt_gt, gt_gt_se;
};

McMoments effective_process_mc(const OrderParameterTable& table, const LikelihoodParams& teacher,
                               const LikelihoodParams& student, long n_samples, std::uint64_t seed);

}  // namespace seqvamp
