#pragma once

#include <span>
#include <vector>

#include "ebtrend/priors.hpp"

namespace ebtrend::cli {

struct DensityCurve {
  std::vector<double> x;
  std::vector<double> density;
};

/// Marginal density of V^2 = tau2 chi2_df / df with tau2 ~ prior, on `points`
/// log-spaced abscissae covering all but ~1e-9 of the mass.
DensityCurve discrete_marginal(const DiscretePrior1D& prior, int df, int points = 400);

/// Marginal density of V^2 under the Inv-chi2 prior (scaled F, or scaled chi2
/// when kappa0 is infinite).
DensityCurve invchisq_marginal(const InvChisqPrior& prior, int df, int points = 400);

/// Trapezoid rule over the curve.
double trapezoid(const DensityCurve& curve);

struct Histogram {
  std::vector<double> edges;  ///< size bins + 1, log-spaced over the positive values
  std::vector<long> counts;   ///< non-positive values land in the first bin
};

Histogram log_histogram(std::span<const double> values, int bins = 50);

}  // namespace ebtrend::cli
