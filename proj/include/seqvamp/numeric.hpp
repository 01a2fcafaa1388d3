#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace seqvamp {

enum class ErrorKind {
  Validation,
  Domain,
  Pole,
  Capacity,
  Degenerate,
  Consistency,
  Factorization,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, int step = -1)
      : std::runtime_error(what), kind_(kind), step_(step) {}
  ErrorKind kind() const { return kind_; }
  int step() const { return step_; }

 private:
  ErrorKind kind_;
  int step_;
};

inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double normal_cdf(double x);
double log_normal_cdf(double x);

// Tail quantities of Phi(-t) for t >= 5 from the continued fraction of the
// Mills ratio: c = 1/(t + d), d = 2/(t + 3/(t + ...)), phi/Phi = t + c.
struct MillsTail {
  double c;
  double d;
};
MillsTail mills_tail(double t);

double log_add_exp(double a, double b);

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

std::string format_double(double x);

}  // namespace seqvamp
