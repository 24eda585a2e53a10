#include "ebtrend/special.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "ebtrend/errors.hpp"

namespace ebtrend::stats {

double digamma(double x) { return boost::math::digamma(x); }

double trigamma(double x) { return boost::math::trigamma(x); }

double trigamma_inverse(double y) {
  if (!(y >= 1e-12)) return kInf;
  double x = 0.5 + 1.0 / y;
  for (int iter = 0; iter < 100; ++iter) {
    const double tri = trigamma(x);
    const double step = tri * (1.0 - tri / y) / boost::math::polygamma(2, x);
    x += step;
    if (std::abs(step) < 1e-13 * x) break;
  }
  return x;
}

double normal_two_sided(double x) { return std::erfc(std::abs(x) / std::numbers::sqrt2); }

double t_two_sided(double t, double df) {
  if (std::isinf(df)) return normal_two_sided(t);
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(df);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return std::min(1.0, p);
}

double log_normal_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

double log_scaled_chisq_density(double x, double df, double tau2) {
  if (x < 0.0) return -kInf;
  const double half = 0.5 * df;
  const double lead = half * std::log(half / tau2) - std::lgamma(half);
  const double shape = half - 1.0;
  double body = -df * x / (2.0 * tau2);
  if (shape != 0.0) {
    if (x == 0.0) return shape > 0.0 ? -kInf : kInf;
    body += shape * std::log(x);
  }
  return lead + body;
}

double log_sum_exp(std::span<const double> values) {
  double top = -kInf;
  for (double v : values) top = std::max(top, v);
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw InputError("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double prob) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, prob);
}

}  // namespace ebtrend::stats
