#include <algorithm>
#include <cmath>
#include <limits>

#include "ebtrend/densities.hpp"
#include "ebtrend/errors.hpp"
#include "ebtrend/parallel.hpp"
#include "ebtrend/priorfit.hpp"
#include "ebtrend/special.hpp"

namespace ebtrend {
namespace {

int common_df(std::span<const UnitSummary> units) {
  if (units.empty()) throw InputError("no units to fit");
  const int df = units.front().df;
  for (const auto& u : units) {
    if (u.df != df) throw InputError("units disagree on residual degrees of freedom");
  }
  if (df < 1) throw InputError("residual degrees of freedom must be positive");
  return df;
}

}  // namespace

NpmleFit1D fit_npmle_1d(std::span<const double> v2, int df, const NpmleOptions& options,
                        Warnings* warnings) {
  if (v2.empty()) throw InputError("fit_npmle_1d: no observations");
  NpmleFit1D fit;
  fit.grid = grid_1d(v2, options.grid, warnings);
  const std::size_t n = v2.size();
  const std::size_t m = fit.grid.size();
  const double floor_value = fit.grid.front();

  LogLikMatrix lik(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  parallel_for(n, resolve_threads(options.em.threads), [&](std::size_t i) {
    const double x = v2[i] < options.s2_floor ? floor_value : v2[i];
    for (std::size_t k = 0; k < m; ++k)
      lik(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          stats::log_scaled_chisq_density(x, df, fit.grid[k]);
  });
  fit.em = npmle_em(std::move(lik), {}, options.em);
  if (!fit.em.converged && warnings)
    warnings->push_back("npmle: EM stopped at max_iter before converging");
  fit.prior = {fit.grid, fit.em.weights};
  prune_weights(fit.prior, options.prune_threshold);
  return fit;
}

NpmleFit1D fit_reg_npmle(std::span<const UnitSummary> units, const TrendFit& trend,
                         const NpmleOptions& options, Warnings* warnings) {
  const int df = common_df(units);
  std::vector<double> v2(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) v2[i] = units[i].s2 / trend.eval(units[i].m).xi2_hat;
  return fit_npmle_1d(v2, df, options, warnings);
}

NpmleFit1D fit_untrended_npmle(std::span<const UnitSummary> units, const NpmleOptions& options,
                               Warnings* warnings) {
  const int df = common_df(units);
  std::vector<double> s2(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) s2[i] = units[i].s2;
  return fit_npmle_1d(s2, df, options, warnings);
}

DiscretePrior2D JointNpmleFit::expand() const {
  DiscretePrior2D prior;
  const int pv = sieve.residual_points();
  for (int b = 0; b < sieve.bins(); ++b) {
    const auto& means = sieve.bin_means[b];
    for (int v = 0; v < pv; ++v) {
      const double w = cell_weight(b, v);
      if (w <= 0.0) continue;
      const double share = w / double(means.size());
      for (double mu : means) {
        prior.atoms.push_back({mu, sieve.sigma2[b][v]});
        prior.weights.push_back(share);
      }
    }
  }
  return prior;
}

JointNpmleFit fit_joint_npmle(std::span<const UnitSummary> units, const TrendFit& trend, int K,
                              const NpmleOptions& options, Warnings* warnings) {
  const int df = common_df(units);
  if (K < 1) throw InputError("fit_joint_npmle: K must be positive");
  const std::size_t n = units.size();
  std::vector<double> a(n), s2(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = units[i].a;
    s2[i] = units[i].s2;
  }

  JointNpmleFit fit;
  fit.K = K;
  fit.sieve = grid_2d(a, s2, trend, options.joint, warnings);
  const int bins = fit.sieve.bins();
  const int pv = fit.sieve.residual_points();
  const std::size_t cells = static_cast<std::size_t>(bins) * pv;

  double floor_value = std::numeric_limits<double>::infinity();
  std::vector<MeanGaussianKernel> kernels;
  kernels.reserve(cells);
  for (int b = 0; b < bins; ++b) {
    for (int v = 0; v < pv; ++v) {
      const double sigma2 = fit.sieve.sigma2[b][v];
      floor_value = std::min(floor_value, sigma2);
      kernels.emplace_back(fit.sieve.bin_means[b], sigma2 / K);
    }
  }

  LogLikMatrix lik(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cells));
  parallel_for(n, resolve_threads(options.em.threads), [&](std::size_t i) {
    const double x = s2[i] < options.s2_floor ? floor_value : s2[i];
    double* row = lik.data() + i * cells;
    for (int b = 0; b < bins; ++b) {
      for (int v = 0; v < pv; ++v) {
        const std::size_t c = static_cast<std::size_t>(b) * pv + v;
        row[c] = stats::log_scaled_chisq_density(x, df, fit.sieve.sigma2[b][v]) +
                 kernels[c].log_mean(a[i]);
      }
    }
  });

  fit.em = npmle_em(std::move(lik), {}, options.em);
  if (!fit.em.converged && warnings)
    warnings->push_back("joint npmle: EM stopped at max_iter before converging");

  // Prune on the cell level; the expanded atoms inherit it.
  fit.cell_weights = fit.em.weights;
  double kept = 0.0;
  const std::size_t top = static_cast<std::size_t>(
      std::max_element(fit.cell_weights.begin(), fit.cell_weights.end()) - fit.cell_weights.begin());
  for (std::size_t c = 0; c < cells; ++c) {
    if (c != top && fit.cell_weights[c] < options.prune_threshold) fit.cell_weights[c] = 0.0;
    kept += fit.cell_weights[c];
  }
  for (double& w : fit.cell_weights) w /= kept;
  return fit;
}

int BinnedPriorSet::bin_of(double m) const {
  const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), m);
  const auto idx = static_cast<int>(it - bin_edges.begin()) - 1;
  if (idx >= 0 && idx < bins()) return idx;
  // The final edge is inclusive.
  if (!bin_edges.empty() && m == bin_edges.back()) return bins() - 1;
  throw BinningError("side information " + std::to_string(m) + " falls outside every bin");
}

std::vector<double> resolve_bin_edges(std::span<const double> m, const BinRule& rule) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!rule.edges.empty()) {
    if (rule.edges.size() < 2) throw BinningError("explicit bin edges need at least two values");
    for (std::size_t i = 1; i < rule.edges.size(); ++i) {
      if (!(rule.edges[i] > rule.edges[i - 1]))
        throw BinningError("explicit bin edges must be strictly increasing");
    }
    return rule.edges;
  }
  if (rule.exact_upto < 0 || rule.pooled < 0 || (rule.exact_upto == 0 && rule.pooled == 0))
    throw BinningError("bin rule defines no bins");

  std::vector<double> edges;
  if (rule.exact_upto > 0) {
    for (int v = 1; v <= rule.exact_upto; ++v) edges.push_back(v - 0.5);
    edges.push_back(rule.exact_upto + 0.5);
  } else {
    edges.push_back(-inf);
  }
  if (rule.pooled == 0) return edges;

  const double start = edges.back();
  std::vector<double> rest;
  for (double v : m) {
    if (v >= start) rest.push_back(v);
  }
  std::sort(rest.begin(), rest.end());
  const std::size_t count = rest.size();
  const auto j = static_cast<std::size_t>(rule.pooled);
  for (std::size_t b = 1; b < j && count > 0; ++b) {
    std::size_t cut = b * count / j;
    if (cut == 0 || cut >= count) continue;
    // Move the cut to the start of its run of ties so the edge is a distinct value.
    while (cut > 0 && rest[cut] == rest[cut - 1]) --cut;
    if (cut == 0) continue;
    if (rest[cut] > edges.back()) edges.push_back(rest[cut]);
  }
  edges.push_back(inf);
  return edges;
}

BinnedPriorSet fit_discrete_priors(std::span<const UnitSummary> units, const BinRule& rule,
                                   const NpmleOptions& options, Warnings* warnings) {
  const int df = common_df(units);
  std::vector<double> m(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) m[i] = units[i].m;

  BinnedPriorSet set;
  set.bin_edges = resolve_bin_edges(m, rule);
  const int bins = static_cast<int>(set.bin_edges.size()) - 1;
  set.priors.resize(static_cast<std::size_t>(bins));
  set.assignment.resize(units.size());
  std::vector<std::vector<double>> members(static_cast<std::size_t>(bins));
  for (std::size_t i = 0; i < units.size(); ++i) {
    const int b = set.bin_of(m[i]);
    set.assignment[i] = b;
    members[b].push_back(units[i].s2);
  }
  for (int b = 0; b < bins; ++b) {
    if (members[b].empty())
      throw BinningError("bin " + std::to_string(b) + " [" + std::to_string(set.bin_edges[b]) +
                         ", " + std::to_string(set.bin_edges[b + 1]) + ") has no units");
    set.priors[b] = fit_npmle_1d(members[b], df, options, warnings).prior;
  }
  return set;
}

}  // namespace ebtrend
