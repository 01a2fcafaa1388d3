#include "seqvamp/stationary.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>

#include "seqvamp/numeric.hpp"

namespace seqvamp {

const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Converged: return "converged";
    case SolverStatus::MaxIter: return "max-iter";
    case SolverStatus::ScaleDivergent: return "scale-divergent";
  }
  return "unknown";
}

namespace {

double stationary_zeta(const SpectralModel& model, double chi) {
  const double q = model.q();
  if (std::abs(q - chi) < 1e-8 * q) return model.R_prime(-chi);
  return zeta_of_tau(model, chi);
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void evaluate_state(FixedPoint& fp, const SpectralModel& model, const LikelihoodParams& teacher,
                    const LikelihoodParams& student, const QuadratureRule& quad, double eta) {
  const double q = model.q();
  fp.q = q;
  fp.nu_star = model.R(-fp.chi_star);
  fp.lambda_star = 1.0 / fp.chi_star - fp.nu_star;
  fp.zeta_star = stationary_zeta(model, fp.chi_star);
  fp.c_phi_star = fp.c_star + q * fp.b_hat_star * fp.b_hat_star;
  BranchMoments bm = branch_moments(q, fp.b_hat_star, fp.c_phi_star, fp.nu_star, teacher, student, quad);
  fp.e_mp = bm.mp;
  fp.e_mp2 = bm.mp2;
  fp.e_tm = bm.tm;
  fp.e_mm = bm.mm;
  fp.e_um = bm.um;
  const double rp = model.R_prime(-fp.chi_star);
  fp.at_margin = bm.mp2 * rp - 1.0;
  const double den = 1.0 - fp.chi_star * fp.chi_star * rp;
  fp.mu_gamma = den > 0.0 ? 1.0 - eta * (1.0 - bm.mp2 * rp) / den : std::numeric_limits<double>::quiet_NaN();
}

FixedPoint iterate_fixed_point(const SpectralModel& model, const LikelihoodParams& teacher,
                               const LikelihoodParams& student, const QuadratureRule& quad, const SolverOptions& opt,
                               const FixedPointStart& start) {
  const double q = model.q();
  const bool flat = teacher.pure_noise();
  double lchi = std::log(start.chi);
  double b = flat ? 0.0 : start.b_hat;
  double lc = std::log(start.c);
  double damping = opt.damping;
  FixedPoint fp;
  fp.status = SolverStatus::MaxIter;
  std::vector<std::array<double, 3>> hist;
  int it = 0;
  double res = std::numeric_limits<double>::infinity();
  for (it = 1; it <= opt.max_iter; ++it) {
    const double chi = std::exp(lchi);
    const double c = std::exp(lc);
    if (!(chi > 0.0) || chi > q * (1.0 + 1e-9)) {
      std::ostringstream os;
      os << "chi*=" << chi << " left (0, q=" << q << ")";
      throw Error(ErrorKind::Domain, os.str(), it);
    }
    if (chi < opt.chi_floor * q || c > opt.scale_ceiling || std::abs(b) > std::sqrt(opt.scale_ceiling)) {
      fp.status = SolverStatus::ScaleDivergent;
      break;
    }
    const double nu = model.R(-chi);
    const double rp = model.R_prime(-chi);
    const double cphi = c + q * b * b;
    BranchMoments bm = branch_moments(q, b, cphi, nu, teacher, student, quad);
    const double zeta = stationary_zeta(model, chi);
    const double chi_new = bm.mp;
    if (!(chi_new > 0.0) || chi_new > q * (1.0 + 1e-9)) {
      std::ostringstream os;
      os << "chi* update " << chi_new << " left (0, q=" << q << ")";
      throw Error(ErrorKind::Domain, os.str(), it);
    }
    const double b_new = flat ? 0.0 : zeta * bm.tm;
    double c_new;
    if (std::abs(q - chi) < 1e-8 * q) {
      c_new = bm.mm * rp;
    } else {
      const double k = b_new * b_new / (zeta * (q - chi));
      c_new = k + (bm.mm - k / zeta) * rp;
    }
    c_new = std::max(c_new, 1e-300);
    std::array<double, 3> r = {std::log(chi_new) - lchi,
                               (b_new - b) / std::max({std::abs(b), std::abs(b_new), 1e-300}),
                               std::log(c_new) - lc};
    if (b == 0.0 && b_new == 0.0) r[1] = 0.0;
    res = std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
    const bool c_vanishing = c < 1e-200 && std::max(std::abs(r[0]), std::abs(r[1])) < opt.tol;
    if (res < opt.tol || c_vanishing) {
      lchi = std::log(chi_new);
      b = b_new;
      lc = std::log(c_new);
      fp.status = SolverStatus::Converged;
      break;
    }
    hist.push_back(r);
    if (hist.size() >= 4) {
      std::size_t k = hist.size();
      for (int comp = 0; comp < 3; ++comp) {
        bool alt = true;
        for (std::size_t j = k - 3; j < k; ++j)
          if (sgn(hist[j][comp]) * sgn(hist[j - 1][comp]) >= 0.0) alt = false;
        if (alt) {
          damping = std::max(damping * 0.5, 1.0 / 1024.0);
          hist.clear();
          break;
        }
      }
    }
    lchi += damping * r[0];
    if (b > 0.0 && b_new > 0.0) b = std::exp(std::log(b) + damping * (std::log(b_new) - std::log(b)));
    else b += damping * (b_new - b);
    lc += damping * r[2];
  }
  fp.iterations = std::min(it, opt.max_iter);
  fp.converged = fp.status == SolverStatus::Converged;
  fp.residual = res;
  fp.chi_star = std::exp(lchi);
  fp.b_hat_star = b;
  fp.c_star = std::exp(lc);
  if (fp.c_star < 1e-200) fp.c_star = 0.0;
  evaluate_state(fp, model, teacher, student, quad, opt.eta);
  if (fp.converged && !(1.0 - fp.chi_star * fp.chi_star * model.R_prime(-fp.chi_star) > 0.0))
    throw Error(ErrorKind::Consistency, "1 - chi*^2 R'(-chi*) <= 0 at a converged fixed point");
  return fp;
}

FixedPoint solve_fixed_point(const SpectralModel& model, const LikelihoodParams& teacher,
                             const LikelihoodParams& student, const QuadratureRule& quad, const SolverOptions& opt) {
  teacher.validate();
  student.validate();
  if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw Error(ErrorKind::Validation, "damping must lie in (0, 1]");
  const double q = model.q();
  const double chi0 = 0.5 * q;
  double bc0 = model.R(-chi0) - 1.0 / q;
  if (!(bc0 > 0.0)) bc0 = 1.0;
  std::vector<FixedPointStart> starts = {{chi0, bc0, bc0}};
  if (opt.multistart) {
    starts.push_back({0.1 * q, 10.0 * bc0, 10.0 * bc0});
    starts.push_back({0.9 * q, 0.1 * bc0, 0.1 * bc0});
  }
  std::vector<FixedPoint> sols;
  for (const auto& s : starts) sols.push_back(iterate_fixed_point(model, teacher, student, quad, opt, s));
  int pick = -1;
  for (std::size_t i = 0; i < sols.size(); ++i)
    if (sols[i].converged) {
      pick = static_cast<int>(i);
      break;
    }
  FixedPoint out = pick >= 0 ? sols[pick] : sols[0];
  for (std::size_t i = 0; i < sols.size(); ++i) {
    for (std::size_t j = i + 1; j < sols.size(); ++j) {
      if (!sols[i].converged || !sols[j].converged) continue;
      const double a = sols[i].chi_star, bb = sols[j].chi_star;
      if (std::abs(a - bb) > 1e-6 * std::max(a, bb)) out.multistart_disagree = true;
    }
  }
  return out;
}

double convergence_rate(const FixedPoint& fp, const SpectralModel& model, double eta) {
  const double rp = model.R_prime(-fp.chi_star);
  const double den = 1.0 - fp.chi_star * fp.chi_star * rp;
  if (!(den > 0.0)) throw Error(ErrorKind::Consistency, "rate denominator 1 - chi^2 R' is not positive");
  return 1.0 - eta * (1.0 - fp.e_mp2 * rp) / den;
}

double at_margin(const FixedPoint& fp, const SpectralModel& model, const LikelihoodParams& teacher,
                 const LikelihoodParams& student, const QuadratureRule& quad) {
  const double q = model.q();
  const double nu = model.R(-fp.chi_star);
  const double cphi = fp.c_star + q * fp.b_hat_star * fp.b_hat_star;
  BranchMoments bm = branch_moments(q, fp.b_hat_star, cphi, nu, teacher, student, quad);
  return bm.mp2 * model.R_prime(-fp.chi_star) - 1.0;
}

namespace {

// Half the mean squared difference f(a) - f(b) for two copies of the
// stationary field whose noises have covariance C - delta.
double half_sq_difference(const FixedPoint& fp, const LikelihoodParams& teacher, const LikelihoodParams& student,
                          const QuadratureRule& quad, double delta) {
  if (delta <= 0.0) return 0.0;
  const double q = fp.q, b = fp.b_hat_star, chi = fp.chi_star, nu = fp.nu_star;
  Eigen::MatrixXd cov(2, 2);
  cov << q, q * b, q * b, q * b * b + fp.c_star - 0.5 * delta;
  const double sr = std::sqrt(2.0 * delta);
  const double sw = student_width(nu, student);
  const bool direct = 2.0 * delta > 1e-4 * std::max(fp.c_star, 1e-300);
  auto f = [&](double x, int y) { return moments(nu, x, y, student).m / chi - x; };
  auto fp_ = [&](double x, int y) { return moments(nu, x, y, student).m_prime / chi - 1.0; };
  KinkWidths kw;
  kw.u1 = sw;
  Rule1D rr;
  double total = 0.0;
  integrate_channel(cov, teacher, quad, kw, [&](const ChannelPoint& pt, double w) {
    const double s = pt.u1;
    double acc = 0.0;
    if (direct) {
      Kink ks[2];
      int nk = 0;
      if (sw >= 0.0) {
        ks[nk++] = {-2.0 * s / sr, 2.0 * sw / sr};
        ks[nk++] = {2.0 * s / sr, 2.0 * sw / sr};
      }
      normal_rule(quad, ks, nk, rr);
      for (std::size_t i = 0; i < rr.x.size(); ++i) {
        const double r = sr * rr.x[i];
        const double d = f(s + 0.5 * r, pt.y) - f(s - 0.5 * r, pt.y);
        acc += rr.w[i] * d * d;
      }
    } else {
      for (Eigen::Index i = 0; i < quad.gh_nodes.size(); ++i) {
        const double r = sr * quad.gh_nodes(i);
        double avg = 0.0;
        for (Eigen::Index j = 0; j < quad.gl_nodes.size(); ++j)
          avg += 0.5 * quad.gl_weights(j) * fp_(s + 0.5 * quad.gl_nodes(j) * r, pt.y);
        acc += quad.gh_weights(i) * r * r * avg * avg;
      }
    }
    total += w * pt.theta.p0 * acc;
  });
  return 0.5 * total;
}

}  // namespace

TransientResult transient_recursion(const FixedPoint& fp, const SpectralModel& model, const LikelihoodParams& teacher,
                                    const LikelihoodParams& student, double eta, int T, const QuadratureRule& quad,
                                    double rho0) {
  TransientResult out;
  if (!fp.converged) {
    out.convergent = false;
    return out;
  }
  const double mu = convergence_rate(fp, model, eta);
  if (!(mu < 1.0)) {
    out.convergent = false;
    return out;
  }
  const double q = fp.q, chi = fp.chi_star, b = fp.b_hat_star;
  const double qs = chi * chi * model.R_prime(-chi);
  const double kappa = qs / (1.0 - qs);
  const double cphi = fp.c_phi_star;
  const double etg = fp.e_tm / chi - q * b;
  const double g_star = fp.e_mm / (chi * chi) - 2.0 * fp.e_um / chi + cphi;
  double dphi = (1.0 - rho0) * fp.c_star;
  double dgam = dphi;
  double dg = half_sq_difference(fp, teacher, student, quad, dphi);
  for (int t = 1; t <= T; ++t) {
    const double dh = half_sq_difference(fp, teacher, student, quad, dphi);
    dg = (1.0 - eta) * dg + eta * dh;
    dphi = kappa * dg;
    const double prev = dgam;
    dgam = (1.0 - eta) * dgam + eta * dphi;
    out.delta_phi.push_back(dphi);
    out.delta_gamma.push_back(dgam);
    out.tail_ratio.push_back(prev > 0.0 ? dgam / prev : std::numeric_limits<double>::quiet_NaN());
    out.c_phi.push_back(cphi - dphi);
    out.c.push_back(fp.c_star - dphi);
    out.c_gamma.push_back(cphi - dgam);
    out.theta_gamma_tilde.push_back(etg);
    out.gt_gt_star.push_back(g_star - dg);
  }
  return out;
}

PhaseScan phase_scan(const std::vector<double>& beta0s, const std::vector<double>& sigma0s,
                     const std::vector<double>& qs, EnsembleKind kind, const LikelihoodParams& student,
                     const std::vector<double>& etas, const QuadratureRule& quad, const SolverOptions& opt,
                     int threads) {
  if (beta0s.empty() || sigma0s.empty() || qs.empty()) throw Error(ErrorKind::Validation, "empty phase-scan grid");
  PhaseScan scan;
  scan.beta0s = beta0s;
  scan.sigma0s = sigma0s;
  scan.qs = qs;
  scan.etas = etas;
  scan.nodes.resize(beta0s.size() * sigma0s.size() * qs.size());
  auto solve_node = [&](std::size_t idx) {
    const std::size_t iq = idx % qs.size();
    const std::size_t is = (idx / qs.size()) % sigma0s.size();
    const std::size_t ib = idx / (qs.size() * sigma0s.size());
    PhaseNode& node = scan.nodes[idx];
    node.beta0 = beta0s[ib];
    node.sigma0 = sigma0s[is];
    node.q = qs[iq];
    SpectralModel model = kind == EnsembleKind::HaarProjection ? SpectralModel::projection(node.q)
                                                               : SpectralModel::marchenko_pastur(node.q);
    LikelihoodParams teacher{node.beta0, node.sigma0, false};
    node.fp = solve_fixed_point(model, teacher, student, quad, opt);
    node.margin = node.fp.at_margin;
    for (double eta : etas) {
      const double den = 1.0 - node.fp.chi_star * node.fp.chi_star * model.R_prime(-node.fp.chi_star);
      node.mu.push_back(den > 0.0 ? 1.0 - eta * (1.0 - node.fp.e_mp2 * model.R_prime(-node.fp.chi_star)) / den
                                  : std::numeric_limits<double>::quiet_NaN());
    }
  };
  const std::size_t n = scan.nodes.size();
  const std::size_t width = static_cast<std::size_t>(std::max(1, threads));
  for (std::size_t base = 0; base < n; base += width) {
    std::vector<std::future<void>> jobs;
    for (std::size_t k = base; k < std::min(n, base + width); ++k)
      jobs.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred, solve_node, k));
    for (auto& j : jobs) j.get();
  }
  auto add_crossing = [&](const PhaseNode& a, const PhaseNode& b, const char* axis) {
    if (!a.fp.converged || !b.fp.converged) return;
    if (!(a.margin * b.margin < 0.0) && !(a.margin == 0.0 && b.margin != 0.0)) return;
    const double s = a.margin / (a.margin - b.margin);
    PhaseCrossing c;
    c.axis = axis;
    c.beta0 = a.beta0 + s * (b.beta0 - a.beta0);
    c.sigma0 = a.sigma0 + s * (b.sigma0 - a.sigma0);
    c.q = a.q + s * (b.q - a.q);
    scan.crossings.push_back(c);
  };
  for (std::size_t ib = 0; ib < beta0s.size(); ++ib)
    for (std::size_t is = 0; is < sigma0s.size(); ++is)
      for (std::size_t iq = 0; iq < qs.size(); ++iq) {
        if (ib + 1 < beta0s.size()) add_crossing(scan.at(ib, is, iq), scan.at(ib + 1, is, iq), "beta0");
        if (is + 1 < sigma0s.size()) add_crossing(scan.at(ib, is, iq), scan.at(ib, is + 1, iq), "sigma0");
        if (iq + 1 < qs.size()) add_crossing(scan.at(ib, is, iq), scan.at(ib, is, iq + 1), "q");
      }
  return scan;
}

}  // namespace seqvamp
