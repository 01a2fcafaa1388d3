#include "seqvamp/engine.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "seqvamp/numeric.hpp"

namespace seqvamp {

void RunConfig::validate() const {
  ensemble.validate();
  teacher.validate();
  student.validate();
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorKind::Validation, "eta must lie in (0, 1]");
  if (T < 1) throw Error(ErrorKind::Validation, "T must be >= 1");
  if (!(nu0 > 0.0) || !std::isfinite(nu0)) throw Error(ErrorKind::Validation, "nu0 must be positive");
  if (!(converge_tol > 0.0)) throw Error(ErrorKind::Validation, "converge_tol must be positive");
  if (!(overflow_guard > 0.0)) throw Error(ErrorKind::Validation, "overflow_guard must be positive");
  if (growth_window < 1) throw Error(ErrorKind::Validation, "growth_window must be >= 1");
}

Instance make_instance(const RunConfig& config) {
  Instance inst;
  inst.cov = sample_covariance(config.ensemble);
  const int n = inst.cov.N();
  auto theta_rng = make_stream(config.seed, 21);
  auto init_rng = make_stream(config.seed, 22);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = nd(theta_rng);
  inst.theta = inst.cov.O * (inst.cov.D.array().sqrt().matrix().asDiagonal() * z);
  inst.y = sample_teacher(inst.theta, config.teacher, config.seed);
  inst.gamma0.resize(n);
  for (int i = 0; i < n; ++i) inst.gamma0(i) = nd(init_rng);
  return inst;
}

MaskSource bernoulli_masks(double eta, std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(make_stream(seed, 23));
  return [rng, eta](int, std::vector<std::uint8_t>& mask) {
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (auto& m : mask) m = ud(*rng) < eta ? 1 : 0;
  };
}

MaskSource all_ones_masks() {
  return [](int, std::vector<std::uint8_t>& mask) { std::fill(mask.begin(), mask.end(), 1); };
}

Trajectory run_rsvamp(const RunConfig& config) {
  config.validate();
  Instance inst = make_instance(config);
  return run_rsvamp(config, inst,
                    config.force_all_ones_mask ? all_ones_masks() : bernoulli_masks(config.eta, config.seed));
}

Trajectory run_rsvamp(const RunConfig& config, const Instance& inst, const MaskSource& masks) {
  const int n = inst.cov.N();
  const Eigen::VectorXd& d = inst.cov.D;
  const Eigen::MatrixXd& o = inst.cov.O;
  Trajectory tr;
  tr.N = n;
  tr.nu0 = config.nu0;
  tr.theta = inst.theta;
  tr.y = inst.y;
  tr.gamma0 = inst.gamma0;
  const double theta_sq = inst.theta.squaredNorm();

  Eigen::VectorXd gamma = inst.gamma0, m(n), gt(n), phi(n), work(n);
  std::vector<std::uint8_t> mask(n);
  double nu = config.nu0;
  int growth_run = 0;
  for (int t = 1; t <= config.T; ++t) {
    double chi = 0.0;
    for (int i = 0; i < n; ++i) {
      Moments mm = moments(nu, gamma(i), inst.y(i) > 0 ? 1 : -1, config.student);
      m(i) = mm.m;
      chi += mm.m_prime;
    }
    chi /= n;
    if (!(chi > 0.0) || !std::isfinite(chi)) {
      std::ostringstream os;
      os << "chi=" << chi << " at step " << t;
      throw Error(ErrorKind::Degenerate, os.str(), t);
    }
    StepRecord rec;
    rec.chi = chi;
    rec.error = theta_sq > 0.0 ? (m - inst.theta).squaredNorm() / theta_sq : std::nan("");
    gt = m / chi - gamma;
    const double lambda = 1.0 / chi - nu;
    const double tau = empirical_tau(d, lambda);
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      std::ostringstream os;
      os << "tau=" << tau << " at step " << t;
      throw Error(ErrorKind::Degenerate, os.str(), t);
    }
    work.noalias() = o.transpose() * gt;
    for (int i = 0; i < n; ++i) work(i) *= d(i) / (lambda * d(i) + 1.0);
    phi.noalias() = o * work;
    phi = phi / tau - gt;
    nu = 1.0 / tau - lambda;
    masks(t, mask);
    Eigen::VectorXd prev = gamma;
    int updated = 0;
    for (int i = 0; i < n; ++i) {
      if (mask[i]) {
        gamma(i) = phi(i);
        ++updated;
      }
    }
    rec.lambda = lambda;
    rec.tau = tau;
    rec.nu = nu;
    rec.update_fraction = static_cast<double>(updated) / n;
    rec.phi_sq = phi.squaredNorm() / n;
    tr.steps.push_back(rec);
    if (config.record.gamma) tr.gamma.push_back(gamma);
    if (config.record.phi) tr.phi.push_back(phi);
    if (config.record.gamma_tilde) tr.gamma_tilde.push_back(gt);
    if (config.record.mask) tr.masks.push_back(mask);

    const double gnorm = gamma.norm();
    if (tr.converged_at < 0 && gnorm > 0.0 && (gamma - prev).norm() / gnorm < config.converge_tol) tr.converged_at = t;
    if (!std::isfinite(gnorm) || gnorm > config.overflow_guard) {
      tr.diverged = true;
      tr.diverged_at = t;
      tr.divergence_reason = "overflow";
    } else if (config.growth_guard > 0.0 && t > 1) {
      growth_run = rec.phi_sq > tr.steps[t - 2].phi_sq ? growth_run + 1 : 0;
      if (growth_run >= config.growth_window && rec.phi_sq > config.growth_guard * tr.steps[0].phi_sq) {
        tr.diverged = true;
        tr.diverged_at = t;
        tr.divergence_reason = "growth";
      }
    }
    if (tr.diverged && config.stop_on_divergence) break;
  }
  tr.last_gamma = gamma;
  return tr;
}

std::optional<double> estimation_error(const Trajectory& traj, int t, const LikelihoodParams& student) {
  if (t < 1 || t > traj.T()) throw Error(ErrorKind::Validation, "step not recorded");
  const double theta_sq = traj.theta.squaredNorm();
  if (!(theta_sq > 0.0)) return std::nullopt;
  const Eigen::VectorXd* g = nullptr;
  if (t == 1) g = &traj.gamma0;
  else if (static_cast<int>(traj.gamma.size()) >= t - 1) g = &traj.gamma[t - 2];
  if (g == nullptr) return traj.steps[t - 1].error;
  const double nu = t == 1 ? traj.nu0 : traj.steps[t - 2].nu;
  double s = 0.0;
  for (int i = 0; i < traj.N; ++i) {
    double m = moments(nu, (*g)(i), traj.y(i) > 0 ? 1 : -1, student).m;
    s += (m - traj.theta(i)) * (m - traj.theta(i));
  }
  return s / theta_sq;
}

}  // namespace seqvamp
