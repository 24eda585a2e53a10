#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ebtrend/densities.hpp"
#include "ebtrend/errors.hpp"
#include "ebtrend/pvalues.hpp"

namespace ebtrend {
namespace {

// log of (k/2)^{k/2} / Gamma(k/2), the constant of the unit-scale chi2_k / k density.
double log_chisq_constant(double k) { return 0.5 * k * std::log(0.5 * k) - std::lgamma(0.5 * k); }

// Upper tail point of chi2_k / k beyond which its density is negligible.
double chisq_upper(double k) {
  boost::math::chi_squared dist(k);
  return boost::math::quantile(boost::math::complement(dist, 1e-20)) / k;
}

/// Shared Tweedie quadrature.
///
/// With d = K - p, v the (scaled) variance and c = z^2 / (nu^2 xi^2) the p-value is
///   C v^{d/2-1} / f_d(v) * int_L^inf (t2)^{-(d-1)/2} f_{d+1}(t2) / sqrt((d+1) t2 - d v) dt2,
/// L = (d v + c) / (d + 1), C = c_d (d+1) / (c_{d+1} sqrt(2 pi)). Substituting
/// t2 = L + w^2 turns the root into sqrt((d+1) w^2 + c), finite at w = 0.
double tweedie_integral(double d, double v, double c, double log_f_d,
                        const std::function<double(double)>& log_f_d1,
                        const std::vector<double>& scales, double quad_tol) {
  const double lower = (d * v + c) / (d + 1.0);
  const double log_c = log_chisq_constant(d) + std::log(d + 1.0) - log_chisq_constant(d + 1.0) -
                       0.5 * std::log(2.0 * std::numbers::pi);
  const double log_pref = log_c + (0.5 * d - 1.0) * std::log(v) - log_f_d;

  auto integrand = [&](double w) {
    const double t2 = lower + w * w;
    const double log_body = log_pref - 0.5 * (d - 1.0) * std::log(t2) + log_f_d1(t2);
    return std::exp(log_body) * 2.0 * w / std::sqrt((d + 1.0) * w * w + c);
  };

  // Break the range near each scale's bulk so the adaptive rule sees smooth pieces.
  const double q_hi = chisq_upper(d + 1.0);
  const double top_scale = *std::max_element(scales.begin(), scales.end());
  const double w_max = std::sqrt(top_scale * q_hi);
  std::vector<double> cuts{0.0, w_max};
  for (double s : scales) {
    for (double f : {0.25, 1.0, 4.0}) {
      const double t = s * f - lower;
      if (t > 0.0 && std::sqrt(t) < w_max) cuts.push_back(std::sqrt(t));
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;
  double total = 0.0, total_err = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    double err = 0.0;
    total += Rule::integrate(integrand, cuts[k], cuts[k + 1], 20, quad_tol * 1e-2, &err);
    total_err += err;
  }
  if (!std::isfinite(total) || total_err > quad_tol * std::max(1.0, std::abs(total)))
    throw QuadratureError("tweedie quadrature did not reach the requested tolerance", total_err);
  return std::clamp(total, 0.0, 1.0);
}

// At most this many support points seed the quadrature breakpoints.
constexpr std::size_t kMaxScales = 24;

std::vector<double> thin_scales(std::vector<double> s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  if (s.size() <= kMaxScales) return s;
  std::vector<double> out;
  for (std::size_t k = 0; k < kMaxScales; ++k) out.push_back(s[k * (s.size() - 1) / (kMaxScales - 1)]);
  return out;
}

}  // namespace

double tweedie_reg(const UnitSummary& u, const DiscretePrior1D& prior, double xi2, double nu,
                   double quad_tol) {
  const double d = u.df;
  const double v = std::max(u.s2 / xi2, 1e-300);
  const double c = u.z * u.z / (nu * nu * xi2);
  std::vector<double> scales;
  for (std::size_t k = 0; k < prior.support.size(); ++k) {
    if (prior.weights[k] > 0.0) scales.push_back(prior.support[k]);
  }
  return tweedie_integral(
      d, v, c, log_mixture_density_1d(prior, u.df, v),
      [&](double t2) { return log_mixture_density_1d(prior, u.df + 1, t2); }, thin_scales(scales),
      quad_tol);
}

double tweedie_joint(const UnitSummary& u, const DiscretePrior2D& prior, double nu, int K,
                     double quad_tol) {
  const double d = u.df;
  const double v = std::max(u.s2, 1e-300);
  const double c = u.z * u.z / (nu * nu);
  std::vector<double> scales;
  for (std::size_t k = 0; k < prior.atoms.size(); ++k) {
    if (prior.weights[k] > 0.0) scales.push_back(prior.atoms[k].sigma2);
  }
  return tweedie_integral(
      d, v, c, log_mixture_density_2d(prior, u.df, K, v, u.a),
      [&](double t2) { return log_mixture_density_2d(prior, u.df + 1, K, t2, u.a); },
      thin_scales(scales), quad_tol);
}

}  // namespace ebtrend
