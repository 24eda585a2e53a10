#pragma once

#include <span>
#include <string>
#include <vector>

#include "ebtrend/linmodel.hpp"
#include "ebtrend/npmle.hpp"
#include "ebtrend/priors.hpp"
#include "ebtrend/trend.hpp"

namespace ebtrend {

using Warnings = std::vector<std::string>;

struct GridOptions {
  int points = 300;
  double lower_quantile = 0.01;
};

/// Log-spaced grid from the lower quantile to the maximum of the positive
/// entries of `values`. Collapses to one point when that range is empty.
std::vector<double> grid_1d(std::span<const double> values, const GridOptions& options = {},
                            Warnings* warnings = nullptr);

struct JointGridOptions {
  int bins = 50;
  int residual_points = 50;
  double lower_quantile = 0.01;
};

/// Discretization of (mu, sigma^2) used by the joint NPMLE.
struct JointSieve {
  std::vector<std::vector<double>> bin_means;  ///< observed A values per bin, sorted, duplicates kept
  std::vector<double> bin_medians;             ///< u_b
  std::vector<double> residual_grid;           ///< shared grid of log S^2 - m_hat(A)
  std::vector<std::vector<double>> sigma2;     ///< exp(m_hat(u_b) + r) per bin

  int bins() const noexcept { return static_cast<int>(bin_means.size()); }
  int residual_points() const noexcept { return static_cast<int>(residual_grid.size()); }
};

JointSieve grid_2d(std::span<const double> a_values, std::span<const double> s2_values,
                   const TrendFit& trend, const JointGridOptions& options = {},
                   Warnings* warnings = nullptr);

struct NpmleOptions {
  GridOptions grid;
  JointGridOptions joint;
  EmOptions em;
  double prune_threshold = 1e-10;
  double s2_floor = 1e-300;
};

struct NpmleFit1D {
  DiscretePrior1D prior;             ///< pruned
  std::vector<double> grid;          ///< full support before pruning
  EmResult em;                       ///< solver output on the full grid
};

/// NPMLE of G for v2 ~ tau2 chi2_df / df, tau2 ~ G.
NpmleFit1D fit_npmle_1d(std::span<const double> v2, int df, const NpmleOptions& options = {},
                        Warnings* warnings = nullptr);

/// NPMLE on V^2 = S^2 / xi2_hat(M).
NpmleFit1D fit_reg_npmle(std::span<const UnitSummary> units, const TrendFit& trend,
                         const NpmleOptions& options = {}, Warnings* warnings = nullptr);

/// NPMLE on S^2 ignoring side information.
NpmleFit1D fit_untrended_npmle(std::span<const UnitSummary> units,
                               const NpmleOptions& options = {}, Warnings* warnings = nullptr);

/// Joint NPMLE of H over the bin-level sieve. Weights live on (bin, sigma^2)
/// cells; expand() spreads each cell equally over the bin's observed means.
struct JointNpmleFit {
  JointSieve sieve;
  int K = 0;
  std::vector<double> cell_weights;  ///< row-major bins x residual_points, pruned
  EmResult em;

  double cell_weight(int b, int v) const {
    return cell_weights[static_cast<std::size_t>(b) * sieve.residual_points() + v];
  }
  DiscretePrior2D expand() const;
};

JointNpmleFit fit_joint_npmle(std::span<const UnitSummary> units, const TrendFit& trend, int K,
                              const NpmleOptions& options = {}, Warnings* warnings = nullptr);

/// Method-of-moments Inv-chi^2 prior on untrended log variances.
InvChisqPrior fit_invchisq_untrended(std::span<const double> s2_values, int df);

/// Same on residuals from `trend`, with the n/(n - spline_df) correction.
/// spline_df <= 0 takes trend.df().
InvChisqPrior fit_invchisq_trended(std::span<const UnitSummary> units, const TrendFit& trend,
                                   int spline_df = 0);

/// Bins over discrete side information.
///
/// exact_upto(k): one bin [v - 0.5, v + 0.5) per integer v = 1..k.
/// pooled(j): the values above k split into j near-equal-count bins whose
/// edges fall on distinct observed values; the last bin is open above.
/// Explicit edges give half-open bins [e_b, e_{b+1}).
struct BinRule {
  int exact_upto = 0;
  int pooled = 1;
  std::vector<double> edges;

  static BinRule single() { return {0, 1, {}}; }
  static BinRule exact_and_pooled(int k, int j) { return {k, j, {}}; }
  static BinRule explicit_edges(std::vector<double> e) { return {0, 0, std::move(e)}; }
};

struct BinnedPriorSet {
  std::vector<double> bin_edges;         ///< size bins + 1, may start at -inf and end at +inf
  std::vector<DiscretePrior1D> priors;
  std::vector<int> assignment;           ///< bin of each fitted unit

  int bins() const noexcept { return static_cast<int>(priors.size()); }
  /// Throws BinningError when m falls outside every bin.
  int bin_of(double m) const;
};

/// Resolve `rule` into edges for the given side-information values.
std::vector<double> resolve_bin_edges(std::span<const double> m, const BinRule& rule);

BinnedPriorSet fit_discrete_priors(std::span<const UnitSummary> units, const BinRule& rule,
                                   const NpmleOptions& options = {}, Warnings* warnings = nullptr);

}  // namespace ebtrend
