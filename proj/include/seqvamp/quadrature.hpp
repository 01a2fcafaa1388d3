#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "seqvamp/likelihoods.hpp"
#include "seqvamp/numeric.hpp"

namespace seqvamp {

struct QuadratureRule {
  int order = 60;
  int panel_order = 24;
  // Transitions narrower than this many standard deviations get graded panels.
  double smooth_width = 1.0;
  double half_width = 12.0;
  Eigen::VectorXd gh_nodes, gh_weights;
  Eigen::VectorXd gl_nodes, gl_weights;

  static QuadratureRule make(int order = 60, int panel_order = 24);
};

// Probabilists' Gauss-Hermite rule; weights sum to one.
void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);
void gauss_legendre(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

struct Kink {
  double center;
  double width;
};

struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
};

// Nodes and weights for E[g(Z)], Z ~ Normal(0, 1), refined around the kinks.
void normal_rule(const QuadratureRule& q, const Kink* kinks, int n_kinks, Rule1D& out);

// Widths (in raw u units) of the student's transition at u = 0 for each coordinate.
// A negative width means the coordinate has no transition.
struct KinkWidths {
  double u1 = -1.0;
  double u2 = -1.0;
};

struct ChannelPoint {
  double u1;
  double u2;
  int y;
  ChannelMoments theta;
};

// E over (theta, y, u) ~ Normal(0, cov) p0(y|theta) with theta integrated in
// closed form. cov is (d+1)x(d+1), theta first, d in {1, 2}. The callback is
// called with each node and its weight; the theta moments already include p0.
template <class F>
void integrate_channel(const Eigen::MatrixXd& cov, const LikelihoodParams& teacher, const QuadratureRule& rule,
                       const KinkWidths& widths, F&& f);

double student_width(double nu, const LikelihoodParams& student);

struct GaussianHints {
  double u1_width = -1.0;
  double u2_width = -1.0;
};

// Brute-force expectation with theta on its own quadrature axis. cov is the
// joint covariance of (theta, u1[, u2]); f receives (theta, y, u1, u2).
double gaussian_expectation(const std::function<double(double, int, double, double)>& f, const Eigen::MatrixXd& cov,
                            const LikelihoodParams& teacher, const QuadratureRule& rule,
                            const GaussianHints& hints = {});

namespace detail {

struct ThetaGivenU {
  double a1 = 0.0;
  double a2 = 0.0;
  double v = 0.0;
};

ThetaGivenU condition_theta(const Eigen::MatrixXd& cov);
void check_psd(const Eigen::MatrixXd& cov);
double teacher_width(const LikelihoodParams& teacher, double v);

}  // namespace detail

template <class F>
void integrate_channel(const Eigen::MatrixXd& cov, const LikelihoodParams& teacher, const QuadratureRule& rule,
                       const KinkWidths& widths, F&& f) {
  detail::check_psd(cov);
  const int d = static_cast<int>(cov.rows()) - 1;
  const detail::ThetaGivenU tg = detail::condition_theta(cov);
  const bool flat = teacher.pure_noise();
  const double s11 = std::sqrt(std::max(cov(1, 1), 0.0));
  Rule1D outer, inner;
  Kink kinks[2];
  auto emit = [&](double u1, double u2, double w) {
    const double mu = tg.a1 * u1 + tg.a2 * u2;
    for (int y = -1; y <= 1; y += 2) {
      ChannelPoint pt{u1, u2, y, channel_gaussian_moments(y, mu, tg.v, teacher)};
      f(pt, w);
    }
  };
  if (d == 1) {
    int nk = 0;
    if (s11 > 0.0) {
      if (widths.u1 >= 0.0) kinks[nk++] = {0.0, widths.u1 / s11};
      if (!flat && tg.a1 != 0.0) kinks[nk++] = {0.0, detail::teacher_width(teacher, tg.v) / std::abs(tg.a1) / s11};
    }
    if (s11 == 0.0) {
      emit(0.0, 0.0, 1.0);
      return;
    }
    normal_rule(rule, kinks, nk, outer);
    for (std::size_t i = 0; i < outer.x.size(); ++i) emit(s11 * outer.x[i], 0.0, outer.w[i]);
    return;
  }
  const double b = cov(1, 1) > 0.0 ? cov(1, 2) / cov(1, 1) : 0.0;
  const double w2 = std::max(cov(2, 2) - b * cov(1, 2), 0.0);
  const double sw = std::sqrt(w2);
  {
    int nk = 0;
    if (s11 > 0.0) {
      if (widths.u1 >= 0.0) kinks[nk++] = {0.0, widths.u1 / s11};
      const double a_eff = tg.a1 + tg.a2 * b;
      if (!flat && a_eff != 0.0) {
        const double tw = std::sqrt(std::pow(detail::teacher_width(teacher, tg.v), 2) + tg.a2 * tg.a2 * w2);
        kinks[nk++] = {0.0, tw / std::abs(a_eff) / s11};
      }
      normal_rule(rule, kinks, nk, outer);
    } else {
      outer.x.assign(1, 0.0);
      outer.w.assign(1, 1.0);
    }
  }
  for (std::size_t i = 0; i < outer.x.size(); ++i) {
    const double u1 = s11 * outer.x[i];
    const double m2 = b * u1;
    if (sw == 0.0) {
      emit(u1, m2, outer.w[i]);
      continue;
    }
    int nk = 0;
    if (widths.u2 >= 0.0) kinks[nk++] = {-m2 / sw, widths.u2 / sw};
    if (!flat && tg.a2 != 0.0) {
      const double c = -(tg.a1 * u1 + tg.a2 * m2) / (tg.a2 * sw);
      kinks[nk++] = {c, detail::teacher_width(teacher, tg.v) / std::abs(tg.a2) / sw};
    }
    normal_rule(rule, kinks, nk, inner);
    for (std::size_t j = 0; j < inner.x.size(); ++j) emit(u1, m2 + sw * inner.x[j], outer.w[i] * inner.w[j]);
  }
}

}  // namespace seqvamp
