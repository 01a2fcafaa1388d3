#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "seqvamp/numeric.hpp"
#include "seqvamp/spectra.hpp"

using namespace seqvamp;

namespace {

// E[d / (z d - 1)] under the Marchenko-Pastur law with ratio q, by a
// Chebyshev substitution of the bulk; the atom at zero contributes nothing.
double mp_g_oracle(double q, double z) {
  const double a = std::pow(1.0 - std::sqrt(q), 2.0), b = std::pow(1.0 + std::sqrt(q), 2.0);
  const int n = 20000;
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    const double th = M_PI * (k + 0.5) / n;
    const double x = 0.5 * (a + b) + 0.5 * (b - a) * std::cos(th);
    const double sn = std::sin(th);
    const double dens = 0.25 * (b - a) * (b - a) * sn * sn / (2.0 * M_PI * x);
    s += dens * x / (z * x - 1.0) * (M_PI / n);
  }
  return s;
}

double mp_mass(double q) {
  const double a = std::pow(1.0 - std::sqrt(q), 2.0), b = std::pow(1.0 + std::sqrt(q), 2.0);
  const int n = 20000;
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    const double th = M_PI * (k + 0.5) / n;
    const double x = 0.5 * (a + b) + 0.5 * (b - a) * std::cos(th);
    const double sn = std::sin(th);
    s += 0.25 * (b - a) * (b - a) * sn * sn / (2.0 * M_PI * x) * (M_PI / n);
  }
  return s;
}

}  // namespace

TEST_CASE("ensemble kind strings") {
  for (auto k : {EnsembleKind::GaussianIid, EnsembleKind::HaarProjection, EnsembleKind::ExplicitEigenvalues})
    CHECK(parse_ensemble_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_ensemble_kind("wishart"), Error);
}

TEST_CASE("Marchenko-Pastur G against the density") {
  for (double q : {0.25, 0.5, 2.0 / 3.0, 1.5, 2.0}) {
    CHECK(mp_mass(q) == doctest::Approx(std::min(q, 1.0)).epsilon(1e-6));
    SpectralModel m = SpectralModel::marchenko_pastur(q);
    for (double z : {-20.0, -3.0, -1.0, -0.2, 0.0, 0.05}) {
      if (z >= m.z_upper()) continue;
      CHECK(m.G(z) == doctest::Approx(mp_g_oracle(q, z)).epsilon(1e-7));
    }
  }
}

TEST_CASE("projection G") {
  SpectralModel m = SpectralModel::projection(0.4);
  for (double z : {-5.0, -1.0, 0.0, 0.5}) CHECK(m.G(z) == doctest::Approx(0.4 / (z - 1.0)));
  CHECK_THROWS_AS(SpectralModel::projection(1.5), Error);
}

TEST_CASE("R inverts G for the closed forms") {
  for (double q : {0.3, 0.5, 1.0, 2.0, 4.0}) {
    for (auto m : {SpectralModel::marchenko_pastur(q), SpectralModel::projection(std::min(q, 1.0))}) {
      for (double z = -30.0; z < std::min(m.z_upper(), 0.9); z += 0.37) {
        const double g = m.G(z);
        CHECK(std::abs(m.R(g) + 1.0 / g - z) <= 1e-10 * std::max(1.0, std::abs(z)));
      }
      CHECK(m.R(-m.q()) == doctest::Approx(1.0 / m.q()).epsilon(1e-12));
    }
  }
}

TEST_CASE("derivatives match central differences") {
  for (auto m : {SpectralModel::marchenko_pastur(0.5), SpectralModel::marchenko_pastur(2.0),
                 SpectralModel::projection(0.5)}) {
    for (double w : {-5.0, -1.0, -0.3, -0.05}) {
      const double h = 1e-5 * std::abs(w);
      const double fd = (m.R(w + h) - m.R(w - h)) / (2.0 * h);
      CHECK(m.R_prime(w) == doctest::Approx(fd).epsilon(1e-6));
    }
    for (double z : {-5.0, -1.0, -0.1}) {
      const double h = 1e-5;
      const double fd = (m.G(z + h) - m.G(z - h)) / (2.0 * h);
      CHECK(m.G_prime(z) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("G is decreasing and negative below the pole") {
  SpectralModel m = SpectralModel::marchenko_pastur(0.7);
  double prev = 0.0;
  for (double z = -50.0; z < m.z_upper() - 1e-3; z += 0.25) {
    const double g = m.G(z);
    CHECK(g < 0.0);
    if (z > -50.0) CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("explicit spectrum transforms") {
  std::vector<double> eig = {0.0, 0.3, 0.3, 1.0, 2.5, 4.0};
  SpectralModel m = SpectralModel::from_eigenvalues(eig);
  CHECK(m.q() == doctest::Approx(std::accumulate(eig.begin(), eig.end(), 0.0) / eig.size()));
  Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(eig.data(), eig.size());
  for (double z : {-10.0, -1.0, 0.0, 0.2}) CHECK(m.G(z) == doctest::Approx(empirical_g(d, z)).epsilon(1e-14));
  for (double w : {-4.0, -1.0, -0.2, -0.01}) {
    const double z = m.R(w) + 1.0 / w;
    CHECK(m.G(z) == doctest::Approx(w).epsilon(1e-10));
    const double h = 1e-6 * std::abs(w);
    CHECK(m.R_prime(w) == doctest::Approx((m.R(w + h) - m.R(w - h)) / (2.0 * h)).epsilon(1e-5));
  }
  CHECK(m.R(-m.q()) == doctest::Approx(1.0 / m.q()).epsilon(1e-9));
}

TEST_CASE("empirical G matches a dense trace") {
  EnsembleSpec s;
  s.kind = EnsembleKind::GaussianIid;
  s.N = 40;
  s.P = 25;
  s.seed = 9;
  SampledCovariance c = sample_covariance(s);
  const Eigen::MatrixXd k = c.dense();
  for (double z : {-2.0, -0.5, 0.05}) {
    const Eigen::MatrixXd a = z * k - Eigen::MatrixXd::Identity(40, 40);
    const double tr = (k * a.inverse()).trace() / 40.0;
    CHECK(empirical_g(c.D, z) == doctest::Approx(tr).epsilon(1e-10));
  }
  CHECK(empirical_tau(c.D, 0.7) == doctest::Approx(-empirical_g(c.D, -0.7)));
}

TEST_CASE("empirical G reports a pole") {
  Eigen::VectorXd d(3);
  d << 0.5, 1.0, 2.0;
  CHECK_THROWS_AS(empirical_g(d, 1.0), Error);
  try {
    empirical_g(d, 0.5);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Pole);
  }
}

TEST_CASE("sampled covariances") {
  SUBCASE("gaussian, fewer samples than dimension") {
    EnsembleSpec s{EnsembleKind::GaussianIid, 300, 150, {}, 4};
    SampledCovariance c = sample_covariance(s);
    CHECK((c.O.transpose() * c.O - Eigen::MatrixXd::Identity(300, 300)).norm() < 1e-10);
    CHECK(c.D.minCoeff() >= 0.0);
    CHECK(c.D.mean() == doctest::Approx(0.5).epsilon(0.05));
    CHECK(c.D.maxCoeff() < std::pow(1.0 + std::sqrt(0.5), 2.0) * 1.15);
    int zeros = 0;
    for (int i = 0; i < 300; ++i) zeros += c.D(i) < 1e-10;
    CHECK(zeros == 150);
  }
  SUBCASE("gaussian, more samples than dimension") {
    EnsembleSpec s{EnsembleKind::GaussianIid, 100, 200, {}, 4};
    SampledCovariance c = sample_covariance(s);
    CHECK(c.D.mean() == doctest::Approx(2.0).epsilon(0.05));
    CHECK(c.D.minCoeff() > 0.0);
  }
  SUBCASE("projection") {
    EnsembleSpec s{EnsembleKind::HaarProjection, 60, 20, {}, 4};
    SampledCovariance c = sample_covariance(s);
    CHECK(c.D.sum() == doctest::Approx(20.0));
    CHECK((c.O.transpose() * c.O - Eigen::MatrixXd::Identity(60, 60)).norm() < 1e-10);
    const Eigen::MatrixXd k = c.dense();
    CHECK((k * k - k).norm() < 1e-10);
  }
  SUBCASE("explicit with identity basis and epsilon") {
    EnsembleSpec s{EnsembleKind::ExplicitEigenvalues, 0, 0, {1.0, 0.0, 3.0}, 1, 0.25, true};
    SampledCovariance c = sample_covariance(s);
    CHECK(c.O.isIdentity());
    CHECK(c.D(1) == doctest::Approx(0.25));
    CHECK(s.q() == doctest::Approx(4.0 / 3.0 + 0.25));
  }
  SUBCASE("same seed, same sample") {
    EnsembleSpec s{EnsembleKind::GaussianIid, 50, 30, {}, 11};
    CHECK(sample_covariance(s).O == sample_covariance(s).O);
  }
}

TEST_CASE("haar orthogonal moments") {
  const int n = 60, reps = 40;
  double s2 = 0.0, s4 = 0.0;
  for (int r = 0; r < reps; ++r) {
    Eigen::MatrixXd o = haar_orthogonal(n, 100 + r);
    CHECK((o.transpose() * o - Eigen::MatrixXd::Identity(n, n)).norm() < 1e-10);
    s2 += o.array().square().sum();
    s4 += o.array().pow(4).sum();
  }
  const double m4 = s4 / (reps * n * n);
  CHECK(s2 / (reps * n * n) == doctest::Approx(1.0 / n));
  CHECK(m4 == doctest::Approx(3.0 / (n * (n + 2.0))).epsilon(0.05));
}

TEST_CASE("ensemble validation") {
  CHECK_THROWS_AS((EnsembleSpec{EnsembleKind::GaussianIid, 0, 3}.validate()), Error);
  CHECK_THROWS_AS((EnsembleSpec{EnsembleKind::HaarProjection, 3, 5}.validate()), Error);
  CHECK_NOTHROW((EnsembleSpec{EnsembleKind::GaussianIid, 3, 5}.validate()));
  CHECK_THROWS_AS((EnsembleSpec{EnsembleKind::ExplicitEigenvalues, 0, 0, {1.0, -1.0}}.validate()), Error);
  EnsembleSpec big{EnsembleKind::HaarProjection, 100000, 10};
  big.memory_budget_bytes = 1e9;
  try {
    sample_covariance(big);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Capacity);
  }
}

TEST_CASE("closed form R against inverted sample spectrum") {
  EnsembleSpec s{EnsembleKind::GaussianIid, 600, 300, {}, 21};
  SampledCovariance c = sample_covariance(s);
  std::vector<double> e(c.D.data(), c.D.data() + c.D.size());
  SpectralModel emp = SpectralModel::from_eigenvalues(e);
  SpectralModel mp = SpectralModel::marchenko_pastur(0.5);
  for (double w : {-2.0, -1.0, -0.5, -0.2}) CHECK(emp.R(w) == doctest::Approx(mp.R(w)).epsilon(0.1));
}
