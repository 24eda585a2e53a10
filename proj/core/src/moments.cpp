#include <cmath>
#include <limits>
#include <vector>

#include "ebtrend/errors.hpp"
#include "ebtrend/priorfit.hpp"
#include "ebtrend/special.hpp"

namespace ebtrend {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Solve trigamma(kappa/2) = target; a non-positive target means no excess
// spread over sampling noise, i.e. the point-mass limit.
double kappa_from_target(double target) {
  if (!(target > 0.0)) return kInf;
  const double half = stats::trigamma_inverse(target);
  return std::isfinite(half) ? 2.0 * half : kInf;
}

}  // namespace

InvChisqPrior fit_invchisq_untrended(std::span<const double> s2_values, int df) {
  std::vector<double> e;
  e.reserve(s2_values.size());
  const double d = df;
  const double shift = stats::digamma(d / 2) - std::log(d / 2);
  for (double s2 : s2_values) {
    if (s2 > 0.0) e.push_back(std::log(s2) - shift);
  }
  if (e.size() < 2) throw InputError("method of moments needs at least two positive variances");
  const double n = double(e.size());
  double mean = 0.0;
  for (double v : e) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : e) ss += (v - mean) * (v - mean);
  const double target = ss / (n - 1.0) - stats::trigamma(d / 2);

  InvChisqPrior prior;
  prior.kappa0 = kappa_from_target(target);
  if (std::isfinite(prior.kappa0)) {
    const double k = prior.kappa0 / 2;
    prior.s0_sq = std::exp(mean + stats::digamma(k) - std::log(k));
  } else {
    prior.s0_sq = std::exp(mean);
  }
  return prior;
}

InvChisqPrior fit_invchisq_trended(std::span<const UnitSummary> units, const TrendFit& trend,
                                   int spline_df) {
  if (units.empty()) throw InputError("method of moments needs units");
  const int df = units.front().df;
  const double nu = spline_df > 0 ? spline_df : trend.df();
  std::vector<double> r;
  r.reserve(units.size());
  for (const auto& u : units) {
    if (u.s2 > 0.0) r.push_back(std::log(u.s2) - trend.log_value(u.m));
  }
  const double n = double(r.size());
  if (!(n > nu)) throw InputError("method of moments needs more units than trend degrees of freedom");
  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : r) ss += (v - mean) * (v - mean);
  const double d = df;
  const double target = ss / n * n / (n - nu) - stats::trigamma(d / 2);

  InvChisqPrior prior;
  prior.kappa0 = kappa_from_target(target);
  const double bias = -stats::digamma(d / 2) + std::log(d / 2);
  if (std::isfinite(prior.kappa0)) {
    const double k = prior.kappa0 / 2;
    prior.s0_sq = std::exp(mean + stats::digamma(k) - std::log(k) + bias);
  } else {
    prior.s0_sq = std::exp(mean + bias);
  }
  return prior;
}

}  // namespace ebtrend
