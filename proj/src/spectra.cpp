#include "seqvamp/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "seqvamp/numeric.hpp"

namespace seqvamp {

const char* to_string(EnsembleKind kind) {
  switch (kind) {
    case EnsembleKind::GaussianIid: return "gaussian-iid";
    case EnsembleKind::HaarProjection: return "haar-projection";
    case EnsembleKind::ExplicitEigenvalues: return "explicit-eigenvalues";
  }
  return "unknown";
}

EnsembleKind parse_ensemble_kind(const std::string& s) {
  if (s == "gaussian-iid") return EnsembleKind::GaussianIid;
  if (s == "haar-projection") return EnsembleKind::HaarProjection;
  if (s == "explicit-eigenvalues") return EnsembleKind::ExplicitEigenvalues;
  throw Error(ErrorKind::Validation, "unknown ensemble kind '" + s + "'");
}

void EnsembleSpec::validate() const {
  if (kind == EnsembleKind::ExplicitEigenvalues) {
    if (eigenvalues.empty()) throw Error(ErrorKind::Validation, "explicit ensemble needs eigenvalues");
    if (N != 0 && N != static_cast<int>(eigenvalues.size()))
      throw Error(ErrorKind::Validation, "N does not match the number of eigenvalues");
    for (double d : eigenvalues)
      if (!(d >= 0.0) || !std::isfinite(d)) throw Error(ErrorKind::Validation, "eigenvalues must be finite and >= 0");
  } else {
    if (N <= 0 || P <= 0) throw Error(ErrorKind::Validation, "N and P must be positive");
    if (kind == EnsembleKind::HaarProjection && P > N)
      throw Error(ErrorKind::Validation, "P must not exceed N for a projection");
  }
  if (!(epsilon >= 0.0)) throw Error(ErrorKind::Validation, "epsilon must be >= 0");
}

double EnsembleSpec::q() const {
  if (kind == EnsembleKind::ExplicitEigenvalues) {
    double s = 0.0;
    for (double d : eigenvalues) s += d;
    return s / eigenvalues.size() + epsilon;
  }
  return static_cast<double>(P) / N;
}

Eigen::MatrixXd SampledCovariance::dense() const { return O * D.asDiagonal() * O.transpose(); }

namespace {

void fill_normal(Eigen::MatrixXd& a, std::mt19937_64& rng, double sd) {
  std::normal_distribution<double> nd(0.0, sd);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = nd(rng);
}

}  // namespace

Eigen::MatrixXd haar_orthogonal(int n, std::uint64_t seed) {
  auto rng = make_stream(seed, 1);
  Eigen::MatrixXd a(n, n);
  fill_normal(a, rng, 1.0);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  for (int j = 0; j < n; ++j)
    if (qr.matrixQR()(j, j) < 0.0) q.col(j) *= -1.0;
  if (!q.allFinite()) throw Error(ErrorKind::Factorization, "QR of the Gaussian matrix produced non-finite values");
  a = std::move(q);
  return a;
}

SampledCovariance sample_covariance(const EnsembleSpec& spec) {
  spec.validate();
  const int n = spec.kind == EnsembleKind::ExplicitEigenvalues ? static_cast<int>(spec.eigenvalues.size()) : spec.N;
  double bytes = 8.0 * n * n * 2.0;
  if (spec.kind == EnsembleKind::GaussianIid) bytes += 8.0 * n * spec.P * 2.0;
  if (bytes > spec.memory_budget_bytes) {
    std::ostringstream os;
    os << "N=" << n << " needs about " << bytes / (1024.0 * 1024.0) << " MiB, above the memory budget";
    throw Error(ErrorKind::Capacity, os.str());
  }
  SampledCovariance out;
  out.D = Eigen::VectorXd::Zero(n);
  switch (spec.kind) {
    case EnsembleKind::ExplicitEigenvalues: {
      for (int i = 0; i < n; ++i) out.D(i) = spec.eigenvalues[i];
      out.O = spec.identity_basis ? Eigen::MatrixXd::Identity(n, n) : haar_orthogonal(n, spec.seed);
      break;
    }
    case EnsembleKind::HaarProjection: {
      out.O = haar_orthogonal(n, spec.seed);
      out.D.head(spec.P).setOnes();
      break;
    }
    case EnsembleKind::GaussianIid: {
      const int p = spec.P;
      auto rng = make_stream(spec.seed, 1);
      Eigen::MatrixXd x(n, p);
      fill_normal(x, rng, 1.0 / std::sqrt(static_cast<double>(n)));
      const int k = std::min(n, p);
      Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU);
      if (svd.info() != Eigen::Success) throw Error(ErrorKind::Factorization, "SVD of the data matrix failed");
      const Eigen::VectorXd s = svd.singularValues();
      const Eigen::MatrixXd u = svd.matrixU();
      x.resize(0, 0);
      out.O.resize(n, n);
      if (k < n) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(u);
        out.O = qr.householderQ();
      }
      out.O.leftCols(k) = u;
      out.D.head(k) = s.array().square();
      break;
    }
  }
  for (int i = 0; i < n; ++i) {
    if (out.D(i) < 0.0) {
      if (out.D(i) < -1e-12) throw Error(ErrorKind::Consistency, "negative eigenvalue in sampled covariance");
      out.D(i) = 0.0;
    }
    out.D(i) += spec.epsilon;
  }
  return out;
}

SpectralModel SpectralModel::marchenko_pastur(double q) {
  if (!(q > 0.0)) throw Error(ErrorKind::Validation, "q must be positive");
  SpectralModel m;
  m.kind_ = EnsembleKind::GaussianIid;
  m.q_ = q;
  return m;
}

SpectralModel SpectralModel::projection(double q) {
  if (!(q > 0.0) || q > 1.0) throw Error(ErrorKind::Validation, "projection model needs 0 < q <= 1");
  SpectralModel m;
  m.kind_ = EnsembleKind::HaarProjection;
  m.q_ = q;
  return m;
}

SpectralModel SpectralModel::from_eigenvalues(std::vector<double> eigenvalues) {
  if (eigenvalues.empty()) throw Error(ErrorKind::Validation, "empty spectrum");
  SpectralModel m;
  m.kind_ = EnsembleKind::ExplicitEigenvalues;
  double s = 0.0;
  for (double d : eigenvalues) {
    if (!(d >= 0.0)) throw Error(ErrorKind::Validation, "eigenvalues must be >= 0");
    s += d;
    m.dmax_ = std::max(m.dmax_, d);
  }
  if (m.dmax_ <= 0.0) throw Error(ErrorKind::Validation, "spectrum is identically zero");
  m.q_ = s / eigenvalues.size();
  m.eig_ = std::move(eigenvalues);
  return m;
}

SpectralModel make_spectral_model(const EnsembleSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case EnsembleKind::GaussianIid: return SpectralModel::marchenko_pastur(spec.q());
    case EnsembleKind::HaarProjection: return SpectralModel::projection(spec.q());
    case EnsembleKind::ExplicitEigenvalues: {
      std::vector<double> e = spec.eigenvalues;
      for (double& d : e) d += spec.epsilon;
      return SpectralModel::from_eigenvalues(std::move(e));
    }
  }
  throw Error(ErrorKind::Validation, "unknown ensemble");
}

double SpectralModel::z_upper() const {
  switch (kind_) {
    case EnsembleKind::GaussianIid: {
      double e = 1.0 + std::sqrt(q_);
      return 1.0 / (e * e);
    }
    case EnsembleKind::HaarProjection: return 1.0;
    case EnsembleKind::ExplicitEigenvalues: return 1.0 / dmax_;
  }
  return 0.0;
}

double SpectralModel::G(double z) const {
  if (!(z < z_upper())) {
    std::ostringstream os;
    os << "G(z) evaluated at z=" << z << " outside (-inf, " << z_upper() << ")";
    throw Error(ErrorKind::Domain, os.str());
  }
  switch (kind_) {
    case EnsembleKind::GaussianIid: {
      double b = z * (q_ + 1.0) - 1.0;
      double disc = b * b - 4.0 * z * z * q_;
      return 2.0 * q_ / (b - std::sqrt(std::max(disc, 0.0)));
    }
    case EnsembleKind::HaarProjection: return q_ / (z - 1.0);
    case EnsembleKind::ExplicitEigenvalues: {
      double s = 0.0;
      for (double d : eig_) s += d / (z * d - 1.0);
      return s / eig_.size();
    }
  }
  return 0.0;
}

double SpectralModel::G_prime(double z) const {
  if (!(z < z_upper())) throw Error(ErrorKind::Domain, "G'(z) outside domain");
  switch (kind_) {
    case EnsembleKind::HaarProjection: return -q_ / ((z - 1.0) * (z - 1.0));
    case EnsembleKind::GaussianIid: {
      double g = G(z);
      // Differentiate z^2 G^2 - b G + q = 0.
      double b = z * (q_ + 1.0) - 1.0;
      return -(2.0 * z * g * g - (q_ + 1.0) * g) / (2.0 * z * z * g - b);
    }
    case EnsembleKind::ExplicitEigenvalues: {
      double s = 0.0;
      for (double d : eig_) {
        double den = z * d - 1.0;
        s += d * d / (den * den);
      }
      return -s / eig_.size();
    }
  }
  return 0.0;
}

bool SpectralModel::in_r_domain(double omega) const {
  if (!std::isfinite(omega)) return false;
  switch (kind_) {
    case EnsembleKind::GaussianIid: {
      double a = q_ - 1.0;
      if (!(a * a - 4.0 * omega > 0.0)) return false;
      return !(omega == 0.0 && a <= 0.0);
    }
    case EnsembleKind::HaarProjection: return omega != 0.0 || q_ == 1.0;
    case EnsembleKind::ExplicitEigenvalues: return omega < 0.0;
  }
  return false;
}

double SpectralModel::invert_g(double omega) const {
  double lo = -1.0;
  while (G(lo) < omega) {
    lo *= 2.0;
    if (lo < -1e300) throw Error(ErrorKind::Domain, "G inversion failed to bracket");
  }
  double zu = z_upper();
  double delta = 0.5 * zu;
  double hi = zu - delta;
  while (G(hi) > omega) {
    delta *= 0.5;
    hi = zu - delta;
    if (delta < 1e-300 || hi == zu) throw Error(ErrorKind::Domain, "G inversion failed to bracket");
  }
  if (hi < lo) std::swap(lo, hi);
  for (int it = 0; it < 400; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (G(mid) > omega) lo = mid;
    else hi = mid;
    if (hi - lo <= 1e-16 * std::max(1.0, std::abs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

double SpectralModel::R(double omega) const {
  if (!in_r_domain(omega)) {
    std::ostringstream os;
    os << "R(omega) evaluated at omega=" << omega << " outside its domain";
    throw Error(ErrorKind::Domain, os.str());
  }
  switch (kind_) {
    case EnsembleKind::GaussianIid: {
      double a = q_ - 1.0;
      double s = std::sqrt(a * a - 4.0 * omega);
      double apls = a >= 0.0 ? a + s : -4.0 * omega / (s - a);
      return 2.0 / apls;
    }
    case EnsembleKind::HaarProjection: return q_ == 1.0 ? 1.0 : 1.0 + (q_ - 1.0) / omega;
    case EnsembleKind::ExplicitEigenvalues: return invert_g(omega) - 1.0 / omega;
  }
  return 0.0;
}

double SpectralModel::R_prime(double omega) const {
  if (!in_r_domain(omega)) throw Error(ErrorKind::Domain, "R'(omega) outside its domain");
  switch (kind_) {
    case EnsembleKind::GaussianIid: {
      double a = q_ - 1.0;
      double s = std::sqrt(a * a - 4.0 * omega);
      double apls = a >= 0.0 ? a + s : -4.0 * omega / (s - a);
      return 4.0 / (s * apls * apls);
    }
    case EnsembleKind::HaarProjection: return q_ == 1.0 ? 0.0 : (1.0 - q_) / (omega * omega);
    case EnsembleKind::ExplicitEigenvalues: {
      double z = invert_g(omega);
      return 1.0 / G_prime(z) + 1.0 / (omega * omega);
    }
  }
  return 0.0;
}

double empirical_g(const Eigen::VectorXd& eigenvalues, double z) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    double d = eigenvalues(i);
    double den = z * d - 1.0;
    if (std::abs(den) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z * d))) {
      std::ostringstream os;
      os << "pole of G at z=" << z << " from eigenvalue " << d << " (index " << i << ")";
      throw Error(ErrorKind::Pole, os.str());
    }
    s += d / den;
  }
  return s / eigenvalues.size();
}

double empirical_tau(const Eigen::VectorXd& eigenvalues, double lambda) { return -empirical_g(eigenvalues, -lambda); }

}  // namespace seqvamp
