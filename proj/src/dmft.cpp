#include "seqvamp/dmft.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "seqvamp/numeric.hpp"

namespace seqvamp {

Eigen::VectorXd last_update_law(int h, double eta) {
  Eigen::VectorXd w(h + 1);
  w(0) = std::pow(1.0 - eta, h);
  for (int l = 1; l <= h; ++l) w(l) = eta * std::pow(1.0 - eta, h - l);
  return w;
}

Eigen::MatrixXd pairwise_update_law(int t, int t_prime, double eta) {
  if (!(t_prime >= 1 && t_prime < t)) throw Error(ErrorKind::Validation, "pairwise_update_law needs 1 <= t' < t");
  Eigen::VectorXd wt = last_update_law(t - 1, eta);
  Eigen::VectorXd wp = last_update_law(t_prime - 1, eta);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(t, t_prime);
  for (int l = 0; l < t; ++l) {
    if (l >= t_prime) {
      for (int lp = 0; lp < t_prime; ++lp) p(l, lp) += wt(l) * wp(lp);
    } else {
      p(l, l) += wt(l);
    }
  }
  return p;
}

bool coincident(double tau1, double tau2) {
  return std::abs(tau1 - tau2) < 1e-9 * std::max(std::abs(tau1), std::abs(tau2));
}

double zeta_of_tau(const SpectralModel& model, double tau) {
  const double q = model.q();
  return (model.R(-tau) - 1.0 / q) / (q - tau);
}

double response_q(const SpectralModel& model, double tau1, double tau2) {
  if (coincident(tau1, tau2)) {
    const double t = 0.5 * (tau1 + tau2);
    return t * t * model.R_prime(-t);
  }
  return tau1 * tau2 * (model.R(-tau2) - model.R(-tau1)) / (tau1 - tau2);
}

double response_d(const SpectralModel& model, double tau1, double tau2, double b1, double b2, double zeta1,
                  double zeta2) {
  if (b1 == 0.0 || b2 == 0.0) return 0.0;
  const double pre = b1 * b2 / (zeta1 * zeta2);
  if (coincident(tau1, tau2)) {
    const double t = 0.5 * (tau1 + tau2);
    const double z = zeta_of_tau(model, t);
    return pre * (z - model.R_prime(-t)) / (model.q() - t);
  }
  return pre * (zeta1 - zeta2) / (tau1 - tau2);
}

BranchMoments branch_moments(double q, double b, double cphi_diag, double nu, const LikelihoodParams& teacher,
                             const LikelihoodParams& student, const QuadratureRule& quad) {
  Eigen::MatrixXd cov(2, 2);
  cov << q, q * b, q * b, cphi_diag;
  BranchMoments r;
  KinkWidths kw;
  kw.u1 = student_width(nu, student);
  integrate_channel(cov, teacher, quad, kw, [&](const ChannelPoint& pt, double w) {
    Moments mm = moments(nu, pt.u1, pt.y, student);
    const double wp = w * pt.theta.p0;
    r.mp += wp * mm.m_prime;
    r.tm += w * pt.theta.p1 * mm.m;
    r.mm += wp * mm.m * mm.m;
    r.um += wp * pt.u1 * mm.m;
    r.mp2 += wp * mm.m_prime * mm.m_prime;
  });
  return r;
}

PairMoments pair_moments(const Eigen::Matrix3d& cov, double nu1, double nu2, const LikelihoodParams& teacher,
                         const LikelihoodParams& student, const QuadratureRule& quad) {
  PairMoments r;
  KinkWidths kw;
  kw.u1 = student_width(nu1, student);
  kw.u2 = student_width(nu2, student);
  Eigen::MatrixXd c = cov;
  integrate_channel(c, teacher, quad, kw, [&](const ChannelPoint& pt, double w) {
    const double m1 = moments(nu1, pt.u1, pt.y, student).m;
    const double m2 = moments(nu2, pt.u2, pt.y, student).m;
    const double wp = w * pt.theta.p0;
    r.mm += wp * m1 * m2;
    r.mu += wp * m1 * pt.u2;
    r.um += wp * pt.u1 * m2;
  });
  return r;
}

namespace {

struct Extended {
  Eigen::VectorXd b;
  Eigen::MatrixXd c;
};

Extended extend(const OrderParameterTable& tab) {
  Extended e;
  e.b = Eigen::VectorXd::Zero(tab.T + 1);
  e.c = Eigen::MatrixXd::Zero(tab.T + 1, tab.T + 1);
  e.c(0, 0) = 1.0;
  e.b.tail(tab.T) = tab.b_hat;
  e.c.bottomRightCorner(tab.T, tab.T) = tab.c_phi;
  return e;
}

}  // namespace

OrderParameterTable run_theory(const TheoryOptions& opt, const SpectralModel& model, const LikelihoodParams& teacher,
                               const LikelihoodParams& student, const QuadratureRule& quad) {
  if (opt.T < 1) throw Error(ErrorKind::Validation, "T must be >= 1");
  if (!(opt.eta > 0.0 && opt.eta <= 1.0)) throw Error(ErrorKind::Validation, "eta must lie in (0, 1]");
  if (!(opt.nu0 > 0.0)) throw Error(ErrorKind::Validation, "nu0 must be positive");
  teacher.validate();
  student.validate();
  const int T = opt.T;
  const double q = model.q();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  OrderParameterTable tab;
  tab.T = T;
  tab.q = q;
  tab.eta = opt.eta;
  tab.nu0 = opt.nu0;
  tab.two_time = opt.two_time;
  for (auto* v : {&tab.tau, &tab.lambda, &tab.nu, &tab.chi, &tab.zeta, &tab.b_hat, &tab.theta_gamma_tilde,
                  &tab.error, &tab.div_free})
    v->setConstant(T, nan);
  for (auto* m : {&tab.big_q, &tab.big_d, &tab.c, &tab.c_phi, &tab.c_gamma, &tab.gt_gt}) m->setConstant(T, T, nan);

  Eigen::VectorXd bx = Eigen::VectorXd::Zero(T + 1);
  Eigen::MatrixXd cx = Eigen::MatrixXd::Zero(T + 1, T + 1);
  cx(0, 0) = 1.0;

  for (int t = 1; t <= T; ++t) {
    const double nu_prev = tab.nu_before(t);
    const Eigen::VectorXd w = last_update_law(t - 1, opt.eta);
    std::vector<BranchMoments> bm(t);
    double chi = 0.0;
    for (int l = 0; l < t; ++l) {
      if (w(l) == 0.0) continue;
      bm[l] = branch_moments(q, bx(l), cx(l, l), nu_prev, teacher, student, quad);
      chi += w(l) * bm[l].mp;
    }
    if (!(chi > 0.0) || !std::isfinite(chi)) {
      std::ostringstream os;
      os << "theory chi=" << chi << " at step " << t;
      throw Error(ErrorKind::Degenerate, os.str(), t);
    }
    const double lambda = 1.0 / chi - nu_prev;
    const double tau = model.tau(lambda);
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      std::ostringstream os;
      os << "theory tau=" << tau << " at step " << t;
      throw Error(ErrorKind::Degenerate, os.str(), t);
    }
    const double nu = 1.0 / tau - lambda;
    const double zeta = zeta_of_tau(model, tau);
    double etg = 0.0, egg = 0.0, err = 0.0;
    for (int l = 0; l < t; ++l) {
      if (w(l) == 0.0) continue;
      etg += w(l) * (bm[l].tm / chi - q * bx(l));
      egg += w(l) * (bm[l].mm / (chi * chi) - 2.0 * bm[l].um / chi + cx(l, l));
      err += w(l) * (bm[l].mm - 2.0 * bm[l].tm + q) / q;
    }
    const double b = tau * zeta * etg / (1.0 - q * tau * zeta);
    const int i = t - 1;
    tab.chi(i) = chi;
    tab.lambda(i) = lambda;
    tab.tau(i) = tau;
    tab.nu(i) = nu;
    tab.zeta(i) = zeta;
    tab.theta_gamma_tilde(i) = etg;
    tab.b_hat(i) = b;
    tab.error(i) = err;
    tab.gt_gt(i, i) = egg;
    bx(t) = b;

    const double qq = response_q(model, tau, tau);
    const double dd = response_d(model, tau, tau, b, b, zeta, zeta);
    const double c = (dd + qq * (q * b * b + 2.0 * b * etg + egg)) / (1.0 - qq);
    if (c < -1e-8 * std::max(1.0, std::abs(dd) + std::abs(qq * egg))) {
      std::ostringstream os;
      os << "negative equal-time covariance C(" << t << "," << t << ")=" << c;
      throw Error(ErrorKind::Consistency, os.str(), t);
    }
    tab.big_q(i, i) = qq;
    tab.big_d(i, i) = dd;
    tab.c(i, i) = c;
    tab.c_phi(i, i) = c + q * b * b;
    cx(t, t) = tab.c_phi(i, i);

    if (opt.check_div_free) {
      double s = 0.0;
      for (int l = 0; l < t; ++l) {
        if (w(l) == 0.0) continue;
        Eigen::MatrixXd cov(2, 2);
        cov << q, q * bx(l), q * bx(l), cx(l, l);
        GaussianHints h;
        h.u1_width = student_width(nu_prev, student);
        s += w(l) * gaussian_expectation(
                        [&](double, int y, double u, double) { return moments(nu_prev, u, y, student).m_prime; }, cov,
                        teacher, quad, h);
      }
      tab.div_free(i) = s / chi - 1.0;
    }

    if (!opt.two_time) continue;
    for (int tp = 1; tp < t; ++tp) {
      const int j = tp - 1;
      const Eigen::MatrixXd p = pairwise_update_law(t, tp, opt.eta);
      const double nu_tp = tab.nu_before(tp);
      const double chi_tp = tab.chi(j);
      double e = 0.0;
      for (int l = 0; l < t; ++l) {
        for (int lp = 0; lp < tp; ++lp) {
          if (p(l, lp) == 0.0) continue;
          Eigen::Matrix3d cov;
          cov << q, q * bx(l), q * bx(lp), q * bx(l), cx(l, l), cx(l, lp), q * bx(lp), cx(lp, l), cx(lp, lp);
          PairMoments pm = pair_moments(cov, nu_prev, nu_tp, teacher, student, quad);
          e += p(l, lp) * (pm.mm / (chi * chi_tp) - pm.mu / chi - pm.um / chi_tp + cx(l, lp));
        }
      }
      const double qt = response_q(model, tau, tab.tau(j));
      const double dt = response_d(model, tau, tab.tau(j), b, tab.b_hat(j), zeta, tab.zeta(j));
      const double ct =
          (dt + qt * (q * b * tab.b_hat(j) + b * tab.theta_gamma_tilde(j) + tab.b_hat(j) * etg + e)) / (1.0 - qt);
      tab.gt_gt(i, j) = tab.gt_gt(j, i) = e;
      tab.big_q(i, j) = tab.big_q(j, i) = qt;
      tab.big_d(i, j) = tab.big_d(j, i) = dt;
      tab.c(i, j) = tab.c(j, i) = ct;
      tab.c_phi(i, j) = tab.c_phi(j, i) = ct + q * b * tab.b_hat(j);
      cx(t, tp) = cx(tp, t) = tab.c_phi(i, j);
    }
  }

  for (int t = 1; t <= T; ++t) {
    const Eigen::VectorXd w = last_update_law(t, opt.eta);
    double s = 0.0;
    for (int l = 0; l <= t; ++l) s += w(l) * cx(l, l);
    tab.c_gamma(t - 1, t - 1) = s;
    if (!opt.two_time) continue;
    for (int tp = 1; tp < t; ++tp) {
      const Eigen::MatrixXd p = pairwise_update_law(t + 1, tp + 1, opt.eta);
      double v = 0.0;
      for (int l = 0; l <= t; ++l)
        for (int lp = 0; lp <= tp; ++lp) v += p(l, lp) * cx(l, lp);
      tab.c_gamma(t - 1, tp - 1) = tab.c_gamma(tp - 1, t - 1) = v;
    }
  }
  return tab;
}

Eigen::VectorXd theory_error_curve(const OrderParameterTable& table, const LikelihoodParams& teacher,
                                   const LikelihoodParams& student, const QuadratureRule& quad) {
  const Extended ex = extend(table);
  const double q = table.q;
  Eigen::VectorXd out(table.T);
  for (int t = 1; t <= table.T; ++t) {
    const Eigen::VectorXd w = last_update_law(t - 1, table.eta);
    const double nu = table.nu_before(t);
    double err = 0.0;
    for (int l = 0; l < t; ++l) {
      if (w(l) == 0.0) continue;
      BranchMoments bm = branch_moments(q, ex.b(l), ex.c(l, l), nu, teacher, student, quad);
      err += w(l) * (bm.mm - 2.0 * bm.tm + q) / q;
    }
    out(t - 1) = err;
  }
  return out;
}

McMoments effective_process_mc(const OrderParameterTable& table, const LikelihoodParams& teacher,
                               const LikelihoodParams& student, long n_samples, std::uint64_t seed) {
  if (!table.two_time) throw Error(ErrorKind::Validation, "Monte-Carlo oracle needs the two-time table");
  if (n_samples < 2) throw Error(ErrorKind::Validation, "need at least two samples");
  const int T = table.T;
  const double q = table.q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(table.c);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::Factorization, "eigendecomposition of C failed");
  if (es.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, es.eigenvalues().maxCoeff()))
    throw Error(ErrorKind::Factorization, "C is not positive semidefinite");
  const Eigen::MatrixXd a = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  auto rng = make_stream(seed, 31);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);

  Eigen::VectorXd s_chi = Eigen::VectorXd::Zero(T), s2_chi = s_chi, s_tg = s_chi, s2_tg = s_chi, s_err = s_chi,
                  s2_err = s_chi;
  Eigen::MatrixXd s_phi = Eigen::MatrixXd::Zero(T, T), s2_phi = s_phi, s_gam = s_phi, s2_gam = s_phi, s_gg = s_phi,
                  s2_gg = s_phi;
  Eigen::VectorXd z(T), phi(T), gam(T), gt(T);
  for (long k = 0; k < n_samples; ++k) {
    const double theta = std::sqrt(q) * nd(rng);
    const int y = ud(rng) < channel_prob(1, theta, teacher) ? 1 : -1;
    for (int t = 0; t < T; ++t) z(t) = nd(rng);
    phi = theta * table.b_hat + a * z;
    double g = nd(rng);
    for (int t = 1; t <= T; ++t) {
      Moments mm = moments(table.nu_before(t), g, y, student);
      const int i = t - 1;
      gt(i) = mm.m / table.chi(i) - g;
      const double e = (mm.m - theta) * (mm.m - theta) / q;
      s_chi(i) += mm.m_prime;
      s2_chi(i) += mm.m_prime * mm.m_prime;
      s_tg(i) += theta * gt(i);
      s2_tg(i) += theta * gt(i) * theta * gt(i);
      s_err(i) += e;
      s2_err(i) += e * e;
      if (ud(rng) < table.eta) g = phi(i);
      gam(i) = g;
    }
    for (int i = 0; i < T; ++i) {
      for (int j = 0; j <= i; ++j) {
        const double pp = phi(i) * phi(j), gg = gam(i) * gam(j), tt = gt(i) * gt(j);
        s_phi(i, j) += pp;
        s2_phi(i, j) += pp * pp;
        s_gam(i, j) += gg;
        s2_gam(i, j) += gg * gg;
        s_gg(i, j) += tt;
        s2_gg(i, j) += tt * tt;
      }
    }
  }
  const double n = static_cast<double>(n_samples);
  auto mean_se = [n](double s, double s2, double& mean, double& se) {
    mean = s / n;
    se = std::sqrt(std::max(s2 / n - mean * mean, 0.0) / (n - 1.0));
  };
  McMoments r;
  r.n = n_samples;
  for (auto* v : {&r.chi, &r.chi_se, &r.theta_gamma_tilde, &r.theta_gamma_tilde_se, &r.error, &r.error_se})
    v->resize(T);
  for (auto* m : {&r.c_phi, &r.c_phi_se, &r.c_gamma, &r.c_gamma_se, &r.gt_gt, &r.gt_gt_se}) m->resize(T, T);
  for (int i = 0; i < T; ++i) {
    mean_se(s_chi(i), s2_chi(i), r.chi(i), r.chi_se(i));
    mean_se(s_tg(i), s2_tg(i), r.theta_gamma_tilde(i), r.theta_gamma_tilde_se(i));
    mean_se(s_err(i), s2_err(i), r.error(i), r.error_se(i));
    for (int j = 0; j <= i; ++j) {
      mean_se(s_phi(i, j), s2_phi(i, j), r.c_phi(i, j), r.c_phi_se(i, j));
      mean_se(s_gam(i, j), s2_gam(i, j), r.c_gamma(i, j), r.c_gamma_se(i, j));
      mean_se(s_gg(i, j), s2_gg(i, j), r.gt_gt(i, j), r.gt_gt_se(i, j));
      for (auto* m : {&r.c_phi, &r.c_phi_se, &r.c_gamma, &r.c_gamma_se, &r.gt_gt, &r.gt_gt_se})
        (*m)(j, i) = (*m)(i, j);
    }
  }
  return r;
}

}  // namespace seqvamp
