#pragma once

// Closed forms and prior discretizations shared by the unit and acceptance tests.

#include <cmath>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "ebtrend/linmodel.hpp"
#include "ebtrend/priors.hpp"
#include "ebtrend/special.hpp"

namespace ebtrend::oracle {

// 1/tau^2 ~ chi2_k / (k s0^2). Cells are log-spaced between the 1e-10 tail
// quantiles; each carries its exact probability at the geometric midpoint.
inline DiscretePrior1D discretize_invchisq(double kappa0, double s0_sq, int points) {
  const boost::math::chi_squared_distribution<double> chi(kappa0);
  const double c = kappa0 * s0_sq;
  const double lo = c / boost::math::quantile(boost::math::complement(chi, 1e-10));
  const double hi = c / boost::math::quantile(chi, 1e-10);
  auto cdf = [&](double t) { return boost::math::gamma_q(kappa0 / 2, c / (2 * t)); };
  DiscretePrior1D g;
  double total = 0;
  for (int k = 0; k < points; ++k) {
    const double a = lo * std::pow(hi / lo, double(k) / points);
    const double b = lo * std::pow(hi / lo, double(k + 1) / points);
    g.support.push_back(std::sqrt(a * b));
    g.weights.push_back(cdf(b) - cdf(a));
    total += g.weights.back();
  }
  for (double& w : g.weights) w /= total;
  return g;
}

// mu | sigma^2 ~ N(a0, b0 sigma^2), 1/sigma^2 ~ chi2_k / (k s0^2), on a
// points x points product of probability cells.
inline DiscretePrior2D discretize_conjugate(double a0, double b0, double kappa0, double s0_sq, int points) {
  const DiscretePrior1D sig = discretize_invchisq(kappa0, s0_sq, points);
  const boost::math::normal_distribution<double> std_normal;
  const double edge = boost::math::quantile(boost::math::complement(std_normal, 1e-10));
  std::vector<double> u, pu;
  double total = 0;
  for (int k = 0; k < points; ++k) {
    const double a = -edge + 2 * edge * k / points;
    const double b = -edge + 2 * edge * (k + 1) / points;
    u.push_back(0.5 * (a + b));
    pu.push_back(boost::math::cdf(std_normal, b) - boost::math::cdf(std_normal, a));
    total += pu.back();
  }
  DiscretePrior2D h;
  for (std::size_t j = 0; j < sig.support.size(); ++j)
    for (std::size_t k = 0; k < u.size(); ++k) {
      h.atoms.push_back({a0 + std::sqrt(b0 * sig.support[j]) * u[k], sig.support[j]});
      h.weights.push_back(sig.weights[j] * pu[k] / total);
    }
  return h;
}

inline double conjugate_pvalue(const UnitSummary& u, double nu, int K, double a0, double b0, double kappa0,
                               double s0_sq) {
  const double d = u.df;
  const double check =
      (kappa0 * s0_sq + d * u.s2 + (u.a - a0) * (u.a - a0) / (b0 + 1.0 / K)) / (d + kappa0 + 1);
  return stats::t_two_sided(u.z / (nu * std::sqrt(check)), d + kappa0 + 1);
}

}  // namespace ebtrend::oracle
