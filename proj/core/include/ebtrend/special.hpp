#pragma once

#include <limits>
#include <span>
#include <vector>

/// Distribution and special-function helpers shared across modules.
namespace ebtrend::stats {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

double digamma(double x);
double trigamma(double x);

/// Solve trigamma(x) = y by Newton iteration on 1/trigamma, started at
/// 0.5 + 1/y. Returns +infinity for y < 1e-12.
double trigamma_inverse(double y);

/// 2 * Phi(-|x|).
double normal_two_sided(double x);
/// 2 * survival of Student t with df degrees of freedom at |t|; df may be
/// fractional, and df = +inf gives the Gaussian limit.
double t_two_sided(double t, double df);

double log_normal_density(double x, double mean, double variance);

/// Log density of tau2 * chi2_df / df at x.
double log_scaled_chisq_density(double x, double df, double tau2);

double log_sum_exp(std::span<const double> values);

/// Sample quantile, linear interpolation between order statistics (type 7).
/// `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double prob);
double quantile(std::vector<double> values, double prob);

}  // namespace ebtrend::stats
