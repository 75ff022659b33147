#include "caac/numkit/special.hpp"

#include <cmath>
#include <numbers>

namespace caac::numkit {

namespace {

constexpr double kSeriesLimit = 20.0;

// sum_k (-1)^k (x/2)^{2k} / (k!)^2, accumulated in extended precision so the
// alternating terms (largest ~1e7 at x=20) cancel cleanly.
double PowerSeries(double x) {
  const long double q = static_cast<long double>(x) * x / 4.0L;
  long double term = 1.0L;
  long double sum = 1.0L;
  for (int k = 1; k < 200; ++k) {
    term *= -q / (static_cast<long double>(k) * k);
    sum += term;
    if (std::fabs(term) < 1e-21L * std::fabs(sum) && k > static_cast<int>(q)) break;
  }
  return static_cast<double>(sum);
}

// Hankel asymptotic expansion, truncated at the smallest term.
double Asymptotic(double x) {
  double p = 0.0;
  double q = 0.0;
  double term = 1.0;  // a_k / x^k
  double prev = INFINITY;
  for (int k = 0; k < 60; ++k) {
    if (k > 0) {
      const double odd = 2.0 * k - 1.0;
      term *= -(odd * odd) / (k * 8.0 * x);
    }
    const double mag = std::fabs(term);
    if (mag > prev) break;
    prev = mag;
    // a_k contributes to P for even k, to Q for odd k, with alternating sign.
    switch (k % 4) {
      case 0: p += term; break;
      case 1: q += term; break;
      case 2: p -= term; break;
      case 3: q -= term; break;
    }
    if (mag < 1e-18) break;
  }
  const double chi = x - std::numbers::pi / 4.0;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

}  // namespace

double BesselJ0(double x) {
  const double ax = std::fabs(x);
  if (ax < kSeriesLimit) return PowerSeries(ax);
  return Asymptotic(ax);
}

}  // namespace caac::numkit
