#include "seqvamp/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace seqvamp {

namespace {

void golub_welsch(const Eigen::VectorXd& off, double mu0, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  const Eigen::Index n = off.size() + 1;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k + 1 < n; ++k) j(k, k + 1) = j(k + 1, k) = off(k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  nodes = es.eigenvalues();
  weights = mu0 * es.eigenvectors().row(0).transpose().array().square();
  // Symmetrize: the rules are symmetric about zero.
  for (Eigen::Index k = 0; k < n / 2; ++k) {
    double x = 0.5 * (nodes(n - 1 - k) - nodes(k));
    double w = 0.5 * (weights(k) + weights(n - 1 - k));
    nodes(k) = -x;
    nodes(n - 1 - k) = x;
    weights(k) = weights(n - 1 - k) = w;
  }
  if (n % 2 == 1) nodes(n / 2) = 0.0;
}

}  // namespace

void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  golub_welsch(off, 1.0, nodes, weights);
  weights /= weights.sum();
}

void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  golub_welsch(off, 2.0, nodes, weights);
}

QuadratureRule QuadratureRule::make(int order, int panel_order) {
  if (order < 2 || panel_order < 2) throw Error(ErrorKind::Validation, "quadrature order must be >= 2");
  QuadratureRule r;
  r.order = order;
  r.panel_order = panel_order;
  gauss_hermite(order, r.gh_nodes, r.gh_weights);
  gauss_legendre(panel_order, r.gl_nodes, r.gl_weights);
  return r;
}

void normal_rule(const QuadratureRule& q, const Kink* kinks, int n_kinks, Rule1D& out) {
  out.x.clear();
  out.w.clear();
  const double L = q.half_width;
  bool refined = false;
  for (int k = 0; k < n_kinks; ++k)
    if (kinks[k].width < q.smooth_width && std::abs(kinks[k].center) < L) refined = true;
  if (!refined) {
    out.x.assign(q.gh_nodes.data(), q.gh_nodes.data() + q.gh_nodes.size());
    out.w.assign(q.gh_weights.data(), q.gh_weights.data() + q.gh_weights.size());
    return;
  }
  std::vector<double> pts = {-L, -8.0, -5.0, -3.0, -1.5, 0.0, 1.5, 3.0, 5.0, 8.0, L};
  for (int k = 0; k < n_kinks; ++k) {
    const Kink& kk = kinks[k];
    if (!(kk.width < q.smooth_width) || !(std::abs(kk.center) < L)) continue;
    pts.push_back(kk.center);
    for (double h = std::max(kk.width, 1e-12); h < 2.0 * L; h *= 4.0) {
      pts.push_back(kk.center - h);
      pts.push_back(kk.center + h);
    }
  }
  for (double& p : pts) p = std::clamp(p, -L, L);
  std::sort(pts.begin(), pts.end());
  std::vector<double> uniq;
  for (double p : pts)
    if (uniq.empty() || p - uniq.back() > 1e-14 * (1.0 + std::abs(p))) uniq.push_back(p);
  const Eigen::Index m = q.gl_nodes.size();
  out.x.reserve((uniq.size() - 1) * m);
  out.w.reserve((uniq.size() - 1) * m);
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
    const double a = uniq[i], b = uniq[i + 1];
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double x = c + h * q.gl_nodes(j);
      out.x.push_back(x);
      out.w.push_back(h * q.gl_weights(j) * normal_pdf(x));
    }
  }
}

double student_width(double nu, const LikelihoodParams& student) {
  if (student.pure_noise()) return -1.0;
  const double s = student.eff_sigma();
  return std::sqrt(nu * (s * s * nu + 1.0));
}

namespace detail {

void check_psd(const Eigen::MatrixXd& cov) {
  const double scale = cov.diagonal().cwiseAbs().maxCoeff();
  if (!cov.allFinite()) throw Error(ErrorKind::Consistency, "covariance has non-finite entries");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300))
    throw Error(ErrorKind::Consistency, "covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(scale, 1e-300)) {
    std::ostringstream os;
    os << "covariance not positive semidefinite (min eigenvalue " << es.eigenvalues().minCoeff() << ")";
    throw Error(ErrorKind::Consistency, os.str());
  }
}

namespace {

// Regression of the last coordinate on the preceding ones, tolerant of
// singular covariances.
Eigen::VectorXd pinv_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const double cut = 1e-13 * std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd proj = es.eigenvectors().transpose() * b;
  for (Eigen::Index i = 0; i < proj.size(); ++i)
    proj(i) = es.eigenvalues()(i) > cut ? proj(i) / es.eigenvalues()(i) : 0.0;
  return es.eigenvectors() * proj;
}

}  // namespace

ThetaGivenU condition_theta(const Eigen::MatrixXd& cov) {
  ThetaGivenU r;
  const int d = static_cast<int>(cov.rows()) - 1;
  Eigen::VectorXd c = cov.block(1, 0, d, 1);
  Eigen::VectorXd a = pinv_solve(cov.block(1, 1, d, d), c);
  r.a1 = a(0);
  if (d > 1) r.a2 = a(1);
  r.v = std::max(cov(0, 0) - c.dot(a), 0.0);
  return r;
}

double teacher_width(const LikelihoodParams& teacher, double v) {
  const double s = teacher.eff_sigma();
  return std::sqrt(s * s + v);
}

}  // namespace detail

double gaussian_expectation(const std::function<double(double, int, double, double)>& f, const Eigen::MatrixXd& cov,
                            const LikelihoodParams& teacher, const QuadratureRule& rule, const GaussianHints& hints) {
  detail::check_psd(cov);
  const int dim = static_cast<int>(cov.rows());
  if (dim < 1 || dim > 3) throw Error(ErrorKind::Validation, "gaussian_expectation supports dimension 1 to 3");
  // Sequential conditioning: x_k = m_k(x_<k) + s_k z_k.
  std::vector<Eigen::VectorXd> coef(dim);
  std::vector<double> sd(dim);
  for (int k = 0; k < dim; ++k) {
    if (k == 0) {
      coef[k] = Eigen::VectorXd();
      sd[k] = std::sqrt(std::max(cov(0, 0), 0.0));
      continue;
    }
    Eigen::VectorXd c = cov.block(0, k, k, 1);
    coef[k] = detail::pinv_solve(cov.topLeftCorner(k, k), c);
    sd[k] = std::sqrt(std::max(cov(k, k) - c.dot(coef[k]), 0.0));
  }
  const double tw = teacher.pure_noise() ? -1.0 : teacher.eff_sigma();
  const double widths[3] = {tw, hints.u1_width, hints.u2_width};
  double x[3] = {0.0, 0.0, 0.0};
  std::vector<Rule1D> rules(dim);
  double total = 0.0;
  std::function<void(int, double)> rec = [&](int k, double w) {
    if (k == dim) {
      for (int y = -1; y <= 1; y += 2) {
        double p = channel_prob(y, x[0], teacher);
        if (p == 0.0) continue;
        total += w * p * f(x[0], y, x[1], x[2]);
      }
      return;
    }
    double mean = 0.0;
    for (int j = 0; j < k; ++j) mean += coef[k](j) * x[j];
    if (sd[k] == 0.0) {
      x[k] = mean;
      rec(k + 1, w);
      return;
    }
    Kink kink{-mean / sd[k], widths[k] / sd[k]};
    normal_rule(rule, &kink, widths[k] >= 0.0 ? 1 : 0, rules[k]);
    const Rule1D r = rules[k];
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      x[k] = mean + sd[k] * r.x[i];
      rec(k + 1, w * r.w[i]);
    }
  };
  rec(0, 1.0);
  return total;
}

}  // namespace seqvamp
