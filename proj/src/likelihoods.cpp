#include "seqvamp/likelihoods.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "seqvamp/numeric.hpp"

namespace seqvamp {

void LikelihoodParams::validate() const {
  if (noise_free) return;
  if (!(beta >= 0.0 && beta <= 0.5)) throw Error(ErrorKind::Validation, "beta must lie in [0, 0.5]");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error(ErrorKind::Validation, "sigma must be >= 0");
}

namespace {

void check_nu(double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    std::ostringstream os;
    os << "nu must be positive and finite, got " << nu;
    throw Error(ErrorKind::Domain, os.str());
  }
}

double channel_scale(double nu, double sigma) { return std::sqrt(nu * (sigma * sigma * nu + 1.0)); }

}  // namespace

double log_partition(double nu, double gamma, int y, const LikelihoodParams& p) {
  check_nu(nu);
  const double beta = p.eff_beta();
  const double sigma = p.eff_sigma();
  double base = gamma * gamma / (2.0 * nu) + 0.5 * std::log(2.0 * M_PI / nu);
  if (beta == 0.5) return base + std::log(0.5);
  double x = y * gamma / channel_scale(nu, sigma);
  double logphi = log_normal_cdf(x);
  double logd = beta == 0.0 ? logphi : log_add_exp(std::log(beta), std::log1p(-2.0 * beta) + logphi);
  return base + logd;
}

Moments moments(double nu, double gamma, int y, const LikelihoodParams& p) {
  check_nu(nu);
  const double beta = p.eff_beta();
  const double sigma = p.eff_sigma();
  if (beta == 0.5) return {gamma / nu, 1.0 / nu};
  const double s = channel_scale(nu, sigma);
  const double x = y * gamma / s;
  double r, a;
  if (x >= -5.0) {
    double phi = normal_cdf(x);
    double d = beta + (1.0 - 2.0 * beta) * phi;
    r = (1.0 - 2.0 * beta) * normal_pdf(x) / d;
    a = 1.0 - r * (x + r);
  } else {
    double t = -x;
    MillsTail mt = mills_tail(t);
    double r0 = t + mt.c;
    double w = 1.0;
    if (beta > 0.0) {
      double logphi = -0.5 * t * t - kLogSqrt2Pi - std::log(r0);
      w = 1.0 / (1.0 + std::exp(std::log(beta) - std::log1p(-2.0 * beta) - logphi));
    }
    r = w * r0;
    a = mt.c * (mt.d - mt.c) + r0 * mt.c * (1.0 - w) + r0 * r0 * w * (1.0 - w);
  }
  double m = gamma / nu + y * r / s;
  double mp = sigma * sigma / (sigma * sigma * nu + 1.0) + a / (s * s);
  return {m, mp};
}

double channel_prob(int y, double theta, const LikelihoodParams& p) {
  const double beta = p.eff_beta();
  const double sigma = p.eff_sigma();
  double g;
  if (sigma > 0.0) g = normal_cdf(y * theta / sigma);
  else g = theta == 0.0 ? 0.5 : (y * theta > 0.0 ? 1.0 : 0.0);
  return beta + (1.0 - 2.0 * beta) * g;
}

ChannelMoments channel_gaussian_moments(int y, double mu, double var, const LikelihoodParams& p) {
  const double beta = p.eff_beta();
  const double sigma = p.eff_sigma();
  const double s2 = sigma * sigma + var;
  double g0, g1, g2;
  if (s2 <= 0.0) {
    g0 = mu == 0.0 ? 0.5 : (y * mu > 0.0 ? 1.0 : 0.0);
    g1 = mu * g0;
    g2 = mu * mu * g0;
  } else {
    const double s = std::sqrt(s2);
    const double z = mu / s;
    g0 = normal_cdf(y * z);
    const double k = normal_pdf(z) / s;
    g1 = mu * g0 + var * y * k;
    g2 = mu * g1 + var * (g0 + y * k * mu * sigma * sigma / s2);
  }
  return {beta + (1.0 - 2.0 * beta) * g0, beta * mu + (1.0 - 2.0 * beta) * g1,
          beta * (mu * mu + var) + (1.0 - 2.0 * beta) * g2};
}

Eigen::VectorXd sample_teacher(const Eigen::VectorXd& theta, const LikelihoodParams& p, std::uint64_t seed) {
  auto noise_rng = make_stream(seed, 11);
  auto flip_rng = make_stream(seed, 12);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const double beta = p.eff_beta();
  const double sigma = p.eff_sigma();
  Eigen::VectorXd y(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    double n = sigma * nd(noise_rng);
    double eps = ud(flip_rng) < beta ? -1.0 : 1.0;
    y(i) = eps * (theta(i) + n >= 0.0 ? 1.0 : -1.0);
  }
  return y;
}

}  // namespace seqvamp
