#include "ebtrend/pvalues.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ebtrend/densities.hpp"
#include "ebtrend/errors.hpp"
#include "ebtrend/special.hpp"

namespace ebtrend {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kS2Floor = 1e-300;

constexpr std::array<std::string_view, kAllMethods.size()> kNames = {
    "ttest",     "untrended_invchisq", "untrended_npmle", "reg_invchisq", "reg_npmle",
    "joint_npmle", "discrete_joint",   "map",             "manorm2",      "oracle"};

double clamp_unit(double p) { return std::clamp(p, 0.0, 1.0); }

// Weighted ratio sum_k e^{lw_k} p_k / sum_k e^{lw_k} with log-weights in `lw`.
double ratio(const std::vector<double>& lw, const std::vector<double>& pk) {
  double top = -kInf;
  for (double v : lw) top = std::max(top, v);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < lw.size(); ++k) {
    const double e = std::exp(lw[k] - top);
    num += e * pk[k];
    den += e;
  }
  return clamp_unit(num / den);
}

bool all_neg_inf(const std::vector<double>& lw) {
  return std::none_of(lw.begin(), lw.end(), [](double v) { return v > -kInf; });
}

}  // namespace

std::string_view method_name(MethodId id) { return kNames[static_cast<std::size_t>(id)]; }

std::optional<MethodId> parse_method(std::string_view name) {
  for (std::size_t k = 0; k < kNames.size(); ++k) {
    if (kNames[k] == name) return kAllMethods[k];
  }
  return std::nullopt;
}

double p_ttest(const UnitSummary& u, double nu) {
  if (u.z == 0.0) return 1.0;
  if (!(u.s2 > 0.0)) return 0.0;
  return stats::t_two_sided(u.z / (nu * std::sqrt(u.s2)), u.df);
}

double p_limma_param(const UnitSummary& u, const InvChisqPrior& prior, double nu, double xi2) {
  if (u.z == 0.0) return 1.0;
  if (prior.is_point_mass())
    return stats::normal_two_sided(u.z / (nu * std::sqrt(prior.s0_sq * xi2)));
  const double d = u.df;
  const double s2 = (d * u.s2 + prior.kappa0 * prior.s0_sq * xi2) / (d + prior.kappa0);
  return stats::t_two_sided(u.z / (nu * std::sqrt(s2)), d + prior.kappa0);
}

double p_partially_bayes_1d(const UnitSummary& u, const DiscretePrior1D& prior, double nu,
                            double xi2, bool* flagged) {
  if (flagged) *flagged = false;
  if (u.z == 0.0) return 1.0;
  const std::size_t m = prior.support.size();
  double v2 = u.s2 / xi2;
  if (v2 < kS2Floor) v2 = prior.support.front();
  thread_local std::vector<double> lw, pk;
  lw.resize(m);
  pk.resize(m);
  const double zs = std::abs(u.z) / (nu * std::sqrt(xi2));
  for (std::size_t k = 0; k < m; ++k) {
    lw[k] = std::log(prior.weights[k]) + stats::log_scaled_chisq_density(v2, u.df, prior.support[k]);
    pk[k] = stats::normal_two_sided(zs / std::sqrt(prior.support[k]));
  }
  if (all_neg_inf(lw)) {
    if (flagged) *flagged = true;
    std::size_t best = 0;
    for (std::size_t k = 1; k < m; ++k) {
      if (std::abs(std::log(prior.support[k] / v2)) < std::abs(std::log(prior.support[best] / v2)))
        best = k;
    }
    return pk[best];
  }
  return ratio(lw, pk);
}

double p_joint(const UnitSummary& u, const DiscretePrior2D& prior, double nu, int K,
               bool* flagged) {
  if (flagged) *flagged = false;
  if (u.z == 0.0) return 1.0;
  const std::size_t m = prior.atoms.size();
  double s2 = u.s2;
  if (s2 < kS2Floor) {
    s2 = kInf;
    for (const auto& atom : prior.atoms) s2 = std::min(s2, atom.sigma2);
  }
  thread_local std::vector<double> lw, pk;
  lw.resize(m);
  pk.resize(m);
  const double zs = std::abs(u.z) / nu;
  for (std::size_t k = 0; k < m; ++k) {
    const auto& atom = prior.atoms[k];
    lw[k] = std::log(prior.weights[k]) + log_joint_kernel(s2, u.a, atom.mu, atom.sigma2, u.df, K);
    pk[k] = stats::normal_two_sided(zs / std::sqrt(atom.sigma2));
  }
  if (all_neg_inf(lw)) {
    if (flagged) *flagged = true;
    std::size_t best = 0;
    for (std::size_t k = 1; k < m; ++k) {
      if (std::abs(std::log(prior.atoms[k].sigma2 / s2)) <
          std::abs(std::log(prior.atoms[best].sigma2 / s2)))
        best = k;
    }
    return pk[best];
  }
  return ratio(lw, pk);
}

JointPValue::JointPValue(const JointNpmleFit& fit) : K_(fit.K) {
  const int pv = fit.sieve.residual_points();
  for (int b = 0; b < fit.sieve.bins(); ++b) {
    for (int v = 0; v < pv; ++v) {
      const double w = fit.cell_weight(b, v);
      if (w <= 0.0) continue;
      const double sigma2 = fit.sieve.sigma2[b][v];
      kernels_.emplace_back(fit.sieve.bin_means[b], sigma2 / K_);
      cells_.push_back({std::log(w), sigma2, kernels_.size() - 1});
    }
  }
  if (cells_.empty()) throw InputError("joint fit carries no weight");
}

double JointPValue::operator()(const UnitSummary& u, double nu, bool* flagged) const {
  if (flagged) *flagged = false;
  if (u.z == 0.0) return 1.0;
  const std::size_t m = cells_.size();
  double s2 = u.s2;
  if (s2 < kS2Floor) {
    s2 = kInf;
    for (const auto& c : cells_) s2 = std::min(s2, c.sigma2);
  }
  thread_local std::vector<double> lw, pk;
  lw.resize(m);
  pk.resize(m);
  const double zs = std::abs(u.z) / nu;
  for (std::size_t k = 0; k < m; ++k) {
    const auto& c = cells_[k];
    lw[k] = c.log_weight + stats::log_scaled_chisq_density(s2, u.df, c.sigma2) +
            kernels_[c.kernel].log_mean(u.a);
    pk[k] = stats::normal_two_sided(zs / std::sqrt(c.sigma2));
  }
  if (all_neg_inf(lw)) {
    if (flagged) *flagged = true;
    std::size_t best = 0;
    for (std::size_t k = 1; k < m; ++k) {
      if (std::abs(std::log(cells_[k].sigma2 / s2)) < std::abs(std::log(cells_[best].sigma2 / s2)))
        best = k;
    }
    return pk[best];
  }
  return ratio(lw, pk);
}

double p_discrete_joint(const UnitSummary& u, const BinnedPriorSet& priors, double nu,
                        bool* flagged) {
  return p_partially_bayes_1d(u, priors.priors[priors.bin_of(u.m)], nu, 1.0, flagged);
}

double log_variance_bias(int df) {
  const double h = 0.5 * df;
  return stats::digamma(h) - std::log(h);
}

double p_map(const UnitSummary& u, const TrendFit& trend, double nu) {
  if (u.z == 0.0) return 1.0;
  return stats::normal_two_sided(u.z / (nu * std::sqrt(trend.eval(u.m).xi2_hat)));
}

}  // namespace ebtrend
