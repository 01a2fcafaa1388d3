#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace seqvamp {

struct LikelihoodParams {
  double beta = 0.0;
  double sigma = 0.0;
  bool noise_free = false;

  static LikelihoodParams make_noise_free() { return {0.0, 0.0, true}; }
  double eff_beta() const { return noise_free ? 0.0 : beta; }
  double eff_sigma() const { return noise_free ? 0.0 : sigma; }
  bool pure_noise() const { return eff_beta() == 0.5; }
  void validate() const;
};

double log_partition(double nu, double gamma, int y, const LikelihoodParams& p);

struct Moments {
  double m;
  double m_prime;
};

Moments moments(double nu, double gamma, int y, const LikelihoodParams& p);

// p(y | theta) of the probit channel; theta = 0 with sigma = 0 gives 1/2.
double channel_prob(int y, double theta, const LikelihoodParams& p);

// E[theta^k p(y|theta)] for theta ~ Normal(mu, var), k = 0, 1, 2.
struct ChannelMoments {
  double p0;
  double p1;
  double p2;
};
ChannelMoments channel_gaussian_moments(int y, double mu, double var, const LikelihoodParams& p);

Eigen::VectorXd sample_teacher(const Eigen::VectorXd& theta, const LikelihoodParams& p, std::uint64_t seed);

}  // namespace seqvamp
