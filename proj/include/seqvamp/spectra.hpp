#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace seqvamp {

enum class EnsembleKind { GaussianIid, HaarProjection, ExplicitEigenvalues };

const char* to_string(EnsembleKind kind);
EnsembleKind parse_ensemble_kind(const std::string& s);

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::GaussianIid;
  int N = 0;
  int P = 0;
  std::vector<double> eigenvalues;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  bool identity_basis = false;
  double memory_budget_bytes = 8.0 * 1024 * 1024 * 1024;

  void validate() const;
  double q() const;
};

struct SampledCovariance {
  Eigen::MatrixXd O;
  Eigen::VectorXd D;

  int N() const { return static_cast<int>(D.size()); }
  Eigen::MatrixXd dense() const;
};

SampledCovariance sample_covariance(const EnsembleSpec& spec);
Eigen::MatrixXd haar_orthogonal(int n, std::uint64_t seed);

class SpectralModel {
 public:
  static SpectralModel marchenko_pastur(double q);
  static SpectralModel projection(double q);
  static SpectralModel from_eigenvalues(std::vector<double> eigenvalues);

  double q() const { return q_; }
  EnsembleKind kind() const { return kind_; }

  double G(double z) const;
  double G_prime(double z) const;
  double R(double omega) const;
  double R_prime(double omega) const;
  double tau(double lambda) const { return -G(-lambda); }

  // Open interval of z on which G is real and monotone.
  double z_upper() const;
  bool in_r_domain(double omega) const;

 private:
  EnsembleKind kind_ = EnsembleKind::GaussianIid;
  double q_ = 1.0;
  std::vector<double> eig_;
  double dmax_ = 0.0;

  double invert_g(double omega) const;
};

SpectralModel make_spectral_model(const EnsembleSpec& spec);

double empirical_g(const Eigen::VectorXd& eigenvalues, double z);
double empirical_tau(const Eigen::VectorXd& eigenvalues, double lambda);

}  // namespace seqvamp
