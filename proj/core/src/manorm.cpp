#include <cmath>
#include <limits>

#include "ebtrend/errors.hpp"
#include "ebtrend/pvalues.hpp"
#include "ebtrend/special.hpp"

// MAnorm2-style baseline. The gamma-family local regression of the original
// is replaced by the natural spline trend on bias-corrected log variances.

namespace ebtrend {
namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

std::vector<GroupStats> group_stats(const Eigen::MatrixXd& y, int k_a, int k_b) {
  if (k_a < 2 || k_b < 2) throw DesignError("each group needs at least two samples");
  if (y.cols() != k_a + k_b) throw DesignError("matrix columns do not match the group sizes");
  std::vector<GroupStats> out(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const auto a = y.row(i).head(k_a);
    const auto b = y.row(i).tail(k_b);
    GroupStats g;
    g.mean_a = a.mean();
    g.mean_b = b.mean();
    g.s2_a = (a.array() - g.mean_a).square().sum() / (k_a - 1);
    g.s2_b = (b.array() - g.mean_b).square().sum() / (k_b - 1);
    out[static_cast<std::size_t>(i)] = g;
  }
  return out;
}

PValueVector p_manorm2(std::span<const GroupStats> groups, int k_a, int k_b, ManormFit* fit_out) {
  if (k_a < 2 || k_b < 2) throw DesignError("MAnorm2 needs at least two samples per group");
  const double nu_a = k_a - 1, nu_b = k_b - 1;
  const double bias_a = stats::digamma(nu_a / 2) - std::log(nu_a / 2);
  const double bias_b = stats::digamma(nu_b / 2) - std::log(nu_b / 2);

  std::vector<double> x, y;
  x.reserve(2 * groups.size());
  y.reserve(2 * groups.size());
  for (const auto& g : groups) {
    if (g.s2_a > 0.0) {
      x.push_back(g.mean_a);
      y.push_back(std::log(g.s2_a) - bias_a);
    }
    if (g.s2_b > 0.0) {
      x.push_back(g.mean_b);
      y.push_back(std::log(g.s2_b) - bias_b);
    }
  }
  if (x.size() < 2) throw InputError("MAnorm2 needs positive group variances");
  ManormFit fit{fit_trend(x, y), 0.0, 0.0, 0.0};

  auto d0_of = [&](bool group_a) {
    std::vector<double> z;
    for (const auto& g : groups) {
      const double s2 = group_a ? g.s2_a : g.s2_b;
      if (s2 > 0.0) z.push_back(std::log(s2) - fit.trend.log_value(group_a ? g.mean_a : g.mean_b));
    }
    if (z.size() < 2) return kInf;
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= double(z.size());
    double ss = 0.0;
    for (double v : z) ss += (v - mean) * (v - mean);
    const double target = ss / double(z.size() - 1) - stats::trigamma((group_a ? nu_a : nu_b) / 2);
    if (!(target > 0.0)) return kInf;
    return 2.0 * stats::trigamma_inverse(target);
  };
  fit.d0_a = d0_of(true);
  fit.d0_b = d0_of(false);
  fit.d0 = 0.5 * (fit.d0_a + fit.d0_b);

  const double d0 = fit.d0;
  const double resid_df = k_a + k_b - 2;
  const double scale_shift =
      std::isfinite(d0) ? stats::digamma(d0 / 2) - std::log(d0 / 2) : 0.0;
  const double factor = 1.0 / k_a + 1.0 / k_b;

  PValueVector out;
  out.method = MethodId::Manorm2;
  out.p.resize(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    const double diff = g.mean_b - g.mean_a;
    if (diff == 0.0) {
      out.p[i] = 1.0;
      continue;
    }
    const double a_tilde = 0.5 * (g.mean_a + g.mean_b);
    const double xi = std::exp(fit.trend.log_value(a_tilde) + scale_shift);
    const double pooled = (nu_a * g.s2_a + nu_b * g.s2_b) / resid_df;
    const double s2 = std::isfinite(d0) ? (d0 * xi + resid_df * pooled) / (d0 + resid_df) : xi;
    out.p[i] = stats::t_two_sided(diff / std::sqrt(factor * s2), d0 + resid_df);
  }
  if (fit_out) *fit_out = std::move(fit);
  return out;
}

}  // namespace ebtrend
