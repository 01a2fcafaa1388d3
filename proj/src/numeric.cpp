#include "seqvamp/numeric.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>

namespace seqvamp {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Pole: return "pole";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Consistency: return "consistency";
    case ErrorKind::Factorization: return "factorization";
  }
  return "unknown";
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

MillsTail mills_tail(double t) {
  double v = 0.0;
  for (int k = 32; k >= 3; --k) v = k / (t + v);
  double d = 2.0 / (t + v);
  return {1.0 / (t + d), d};
}

double log_normal_cdf(double x) {
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / kSqrt2));
  if (x > -5.0) return std::log(normal_cdf(x));
  double t = -x;
  MillsTail m = mills_tail(t);
  return -0.5 * t * t - kLogSqrt2Pi - std::log(t + m.c);
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

}  // namespace seqvamp
