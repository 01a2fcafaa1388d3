#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "seqvamp/likelihoods.hpp"
#include "seqvamp/numeric.hpp"

using namespace seqvamp;
using ld = long double;

namespace {

ld cdf_ld(ld x) { return 0.5L * std::erfc(-x / std::sqrt(2.0L)); }

ld prob_ld(int y, ld theta, const LikelihoodParams& p) {
  const ld b = p.eff_beta(), s = p.eff_sigma();
  ld step;
  if (s == 0.0L) step = y * theta > 0 ? 1.0L : (theta == 0 ? 0.5L : 0.0L);
  else step = cdf_ld(y * theta / s);
  return b + (1.0L - 2.0L * b) * step;
}

// Composite Simpson over panels graded geometrically around each breakpoint.
ld integrate(const std::function<ld(ld)>& f, ld lo, ld hi, std::vector<ld> breaks) {
  std::vector<ld> edges = {lo, hi};
  for (ld c : breaks) {
    if (c <= lo || c >= hi) continue;
    edges.push_back(c);
    for (ld w = 1e-13L; w < hi - lo; w *= 1.15L) {
      if (c - w > lo) edges.push_back(c - w);
      if (c + w < hi) edges.push_back(c + w);
    }
  }
  for (int k = 1; k < 4000; ++k) edges.push_back(lo + (hi - lo) * k / 4000.0L);
  std::sort(edges.begin(), edges.end());
  ld s = 0.0L;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const ld a = edges[i], b = edges[i + 1];
    if (b <= a) continue;
    const int n = 16;
    const ld h = (b - a) / n;
    ld acc = f(a) + f(b);
    for (int j = 1; j < n; ++j) acc += f(a + j * h) * (j % 2 ? 4.0L : 2.0L);
    s += acc * h / 3.0L;
  }
  return s;
}

struct Tilted {
  ld log_z, m, v;
};

// Truncated-normal moments for the noise-free channel; log Phi(x) and
// phi(x)/Phi(x) come from erfc or, far in the tail, the asymptotic series
// Phi(x) ~ phi(x)/|x| * sum_k (-1)^k (2k-1)!! / x^(2k).
Tilted truncated(double nu, double gamma, int y) {
  const ld sd = 1.0L / std::sqrt(static_cast<ld>(nu));
  const ld x = y * static_cast<ld>(gamma) * sd;
  const ld log_phi = -0.5L * x * x - 0.5L * std::log(2.0L * M_PI);
  ld log_cdf, r;
  if (x > -30.0L) {
    const ld c = 0.5L * std::erfc(-x / std::sqrt(2.0L));
    log_cdf = std::log(c);
    r = std::exp(log_phi) / c;
  } else {
    ld term = 1.0L, sum = 1.0L;
    for (int k = 1; k < 30; ++k) {
      term *= -(2.0L * k - 1.0L) / (x * x);
      sum += term;
    }
    log_cdf = log_phi - std::log(-x) + std::log(sum);
    r = -x / sum;
  }
  Tilted t;
  t.log_z = static_cast<ld>(gamma) * gamma / (2.0L * nu) + 0.5L * std::log(2.0L * M_PI / nu) + log_cdf;
  t.m = static_cast<ld>(gamma) / nu + y * sd * r;
  t.v = sd * sd * (1.0L - x * r - r * r);
  return t;
}

Tilted tilted(double nu, double gamma, int y, const LikelihoodParams& p) {
  const ld mean = static_cast<ld>(gamma) / nu;
  const ld sd = 1.0L / std::sqrt(static_cast<ld>(nu));
  const ld reach = 60.0L / (1.0L + std::abs(static_cast<ld>(gamma)));
  const ld lo = std::min(mean - 40.0L * sd, -reach), hi = std::max(mean + 40.0L * sd, reach);
  // Exponent shifted by its value at theta = 0 when the likelihood pushes the mass there.
  const ld shift = mean * y < 0 ? 0.5L * nu * mean * mean : 0.0L;
  auto w = [&](ld t) {
    const ld pr = prob_ld(y, t, p);
    return pr == 0.0L ? 0.0L : std::exp(-0.5L * nu * (t - mean) * (t - mean) + shift) * pr;
  };
  std::vector<ld> br = {0.0L, mean};
  const ld i0 = integrate(w, lo, hi, br);
  const ld i1 = integrate([&](ld t) { return t * w(t); }, lo, hi, br);
  const ld m = i1 / i0;
  const ld i2 = integrate([&](ld t) { return (t - m) * (t - m) * w(t); }, lo, hi, br);
  return {static_cast<ld>(gamma) * gamma / (2.0L * nu) - shift + std::log(i0), m, i2 / i0};
}

}  // namespace

TEST_CASE("validation") {
  CHECK_NOTHROW((LikelihoodParams{0.2, 0.1, false}.validate()));
  CHECK_THROWS_AS((LikelihoodParams{0.6, 0.1, false}.validate()), Error);
  CHECK_THROWS_AS((LikelihoodParams{-0.1, 0.1, false}.validate()), Error);
  CHECK_THROWS_AS((LikelihoodParams{0.1, -1.0, false}.validate()), Error);
  CHECK(LikelihoodParams{0.5, 0.0, false}.pure_noise());
  CHECK_FALSE(LikelihoodParams::make_noise_free().pure_noise());
}

TEST_CASE("channel probability") {
  LikelihoodParams nf = LikelihoodParams::make_noise_free();
  CHECK(channel_prob(1, 0.0, nf) == 0.5);
  CHECK(channel_prob(1, 0.3, nf) == 1.0);
  CHECK(channel_prob(-1, 0.3, nf) == 0.0);
  LikelihoodParams p{0.2, 0.5, false};
  for (double t : {-2.0, -0.1, 0.0, 1.3}) {
    CHECK(channel_prob(1, t, p) + channel_prob(-1, t, p) == doctest::Approx(1.0));
    CHECK(channel_prob(1, t, p) == doctest::Approx(static_cast<double>(prob_ld(1, t, p))));
  }
}

TEST_CASE("log partition and moments against direct integration") {
  const std::vector<LikelihoodParams> ps = {
      LikelihoodParams::make_noise_free(), {0.2, 0.1, false}, {0.3, 0.0, false}, {0.0, 0.7, false}, {0.5, 0.0, false}};
  for (const auto& p : ps) {
    for (double nu : {0.2, 1.0, 7.5}) {
      for (double gamma : {-6.0, -1.2, 0.0, 0.4, 3.0}) {
        for (int y : {-1, 1}) {
          Tilted ref = tilted(nu, gamma, y, p);
          CHECK(log_partition(nu, gamma, y, p) ==
                doctest::Approx(static_cast<double>(ref.log_z)).epsilon(1e-9).scale(1.0));
          Moments mm = moments(nu, gamma, y, p);
          CHECK(mm.m == doctest::Approx(static_cast<double>(ref.m)).epsilon(1e-9).scale(1.0 / nu));
          CHECK(mm.m_prime == doctest::Approx(static_cast<double>(ref.v)).epsilon(1e-8));
        }
      }
    }
  }
}

TEST_CASE("deep tail of the noise-free channel") {
  LikelihoodParams nf = LikelihoodParams::make_noise_free();
  for (double nu : {0.5, 2.0}) {
    for (double gamma : {-15.0, -40.0, -120.0}) {
      Tilted ref = truncated(nu, gamma, 1);
      Moments mm = moments(nu, gamma, 1, nf);
      CHECK(std::isfinite(log_partition(nu, gamma, 1, nf)));
      CHECK(log_partition(nu, gamma, 1, nf) == doctest::Approx(static_cast<double>(ref.log_z)).epsilon(1e-9));
      CHECK(mm.m == doctest::Approx(static_cast<double>(ref.m)).epsilon(1e-7));
      CHECK(mm.m_prime == doctest::Approx(static_cast<double>(ref.v)).epsilon(1e-6));
    }
  }
  LikelihoodParams flip{0.1, 0.0, false};
  Moments mm = moments(1.0, -60.0, 1, flip);
  CHECK(mm.m == doctest::Approx(-60.0).epsilon(1e-6));
  CHECK(mm.m_prime == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("moments are derivatives of the log partition") {
  LikelihoodParams p{0.15, 0.3, false};
  for (double nu : {0.4, 3.0})
    for (double g : {-2.0, 0.1, 1.7}) {
      const double h = 1e-4;
      const double d1 = (log_partition(nu, g + h, 1, p) - log_partition(nu, g - h, 1, p)) / (2 * h);
      const double d2 =
          (log_partition(nu, g + h, 1, p) - 2 * log_partition(nu, g, 1, p) + log_partition(nu, g - h, 1, p)) / (h * h);
      CHECK(moments(nu, g, 1, p).m == doctest::Approx(d1).epsilon(1e-7));
      CHECK(moments(nu, g, 1, p).m_prime == doctest::Approx(d2).epsilon(1e-4));
    }
}

TEST_CASE("moment properties") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ug(-30.0, 30.0), un(0.05, 20.0), ub(0.0, 0.5), us(0.0, 2.0);
  for (int i = 0; i < 2000; ++i) {
    LikelihoodParams p{i % 2 ? ub(rng) : 0.0, i % 3 == 0 ? 0.0 : us(rng), false};
    const double nu = un(rng), g = ug(rng);
    const int y = i % 2 ? 1 : -1;
    Moments a = moments(nu, g, y, p), b = moments(nu, -g, -y, p);
    CHECK(a.m_prime > 0.0);
    if (p.beta == 0.0) CHECK(a.m_prime <= 1.0 / nu * (1.0 + 1e-12));
    CHECK(a.m == doctest::Approx(-b.m).epsilon(1e-12));
    CHECK(a.m_prime == doctest::Approx(b.m_prime).epsilon(1e-12));
    CHECK(moments(nu, g + 1e-3, y, p).m >= a.m);
  }
}

TEST_CASE("pure noise channel is flat") {
  LikelihoodParams p{0.5, 0.0, false};
  Moments m = moments(2.0, 1.0, 1, p);
  CHECK(m.m == doctest::Approx(0.5));
  CHECK(m.m_prime == doctest::Approx(0.5));
}

TEST_CASE("gaussian channel moments") {
  const std::vector<LikelihoodParams> ps = {LikelihoodParams::make_noise_free(), {0.2, 0.1, false}, {0.0, 1.3, false}};
  for (const auto& p : ps)
    for (double mu : {-1.5, 0.0, 0.8})
      for (double var : {1e-4, 0.3, 2.0})
        for (int y : {-1, 1}) {
          ChannelMoments c = channel_gaussian_moments(y, mu, var, p);
          const ld sd = std::sqrt(static_cast<ld>(var));
          auto dens = [&](ld t) {
            return std::exp(-0.5L * (t - mu) * (t - mu) / var) / (sd * std::sqrt(2.0L * M_PI)) * prob_ld(y, t, p);
          };
          const ld lo = std::min<ld>(mu - 40 * sd, -1e-6L), hi = std::max<ld>(mu + 40 * sd, 1e-6L);
          std::vector<ld> br = {0.0L, static_cast<ld>(mu)};
          CHECK(c.p0 == doctest::Approx(static_cast<double>(integrate(dens, lo, hi, br))).epsilon(1e-9));
          CHECK(c.p1 == doctest::Approx(static_cast<double>(integrate([&](ld t) { return t * dens(t); }, lo, hi, br)))
                            .epsilon(1e-9)
                            .scale(1e-12));
          CHECK(c.p2 ==
                doctest::Approx(static_cast<double>(integrate([&](ld t) { return t * t * dens(t); }, lo, hi, br)))
                    .epsilon(1e-9));
        }
}

TEST_CASE("teacher sampling") {
  const int n = 200000;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  theta.head(n / 2).setConstant(1e-9);
  LikelihoodParams p{0.3, 0.0, false};
  Eigen::VectorXd y = sample_teacher(theta, p, 5);
  int flips = 0;
  for (int i = 0; i < n; ++i) {
    CHECK_FALSE(std::abs(y(i)) != 1.0);
    flips += y(i) < 0;
  }
  CHECK(flips / static_cast<double>(n) == doctest::Approx(0.3).epsilon(0.02));
  CHECK(sample_teacher(theta, p, 5) == y);
  CHECK(sample_teacher(theta, p, 6) != y);

  LikelihoodParams noisy{0.0, 1.0, false};
  Eigen::VectorXd th = Eigen::VectorXd::Constant(n, 0.5);
  Eigen::VectorXd y2 = sample_teacher(th, noisy, 1);
  const double frac = (y2.array() > 0).cast<double>().mean();
  CHECK(frac == doctest::Approx(normal_cdf(0.5)).epsilon(0.01));
}
