#include <algorithm>
#include <cmath>
#include <numeric>

#include "ebtrend/errors.hpp"
#include "ebtrend/priorfit.hpp"
#include "ebtrend/special.hpp"

namespace ebtrend {
namespace {

void warn(Warnings* warnings, std::string message) {
  if (warnings) warnings->push_back(std::move(message));
}

}  // namespace

std::vector<double> grid_1d(std::span<const double> values, const GridOptions& options,
                            Warnings* warnings) {
  if (options.points < 1) throw InputError("grid needs at least one point");
  std::vector<double> pos;
  pos.reserve(values.size());
  for (double v : values) {
    if (v > 0.0 && std::isfinite(v)) pos.push_back(v);
  }
  if (pos.empty()) throw InputError("grid_1d: no positive values");
  if (pos.size() != values.size())
    warn(warnings, "grid_1d: excluded " + std::to_string(values.size() - pos.size()) +
                       " non-positive values");
  std::sort(pos.begin(), pos.end());
  const double lo = stats::quantile_sorted(pos, options.lower_quantile);
  const double hi = pos.back();
  if (!(hi > lo) || options.points == 1) {
    if (!(hi > lo)) warn(warnings, "grid_1d: degenerate range, single support point");
    return {hi};
  }
  const int b = options.points;
  std::vector<double> grid(static_cast<std::size_t>(b));
  const double llo = std::log(lo);
  const double step = (std::log(hi) - llo) / (b - 1);
  for (int k = 0; k < b; ++k) grid[k] = std::exp(llo + step * k);
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

JointSieve grid_2d(std::span<const double> a_values, std::span<const double> s2_values,
                   const TrendFit& trend, const JointGridOptions& options, Warnings* warnings) {
  const std::size_t n = a_values.size();
  if (n == 0 || s2_values.size() != n) throw InputError("grid_2d: mismatched or empty inputs");
  if (options.bins < 1 || options.residual_points < 1)
    throw InputError("grid_2d: bins and residual points must be positive");

  std::vector<double> sorted_a(a_values.begin(), a_values.end());
  std::sort(sorted_a.begin(), sorted_a.end());
  std::size_t n_distinct = sorted_a.empty() ? 0 : 1;
  for (std::size_t i = 1; i < n; ++i) n_distinct += sorted_a[i] != sorted_a[i - 1];

  std::size_t bins = static_cast<std::size_t>(options.bins);
  if (bins > n_distinct || bins > n) {
    bins = std::min(n_distinct, n);
    warn(warnings, "grid_2d: reduced bins to " + std::to_string(bins));
  }

  JointSieve sieve;
  sieve.bin_means.resize(bins);
  sieve.bin_medians.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t begin = b * n / bins;
    const std::size_t end = (b + 1) * n / bins;
    sieve.bin_means[b].assign(sorted_a.begin() + static_cast<std::ptrdiff_t>(begin),
                              sorted_a.begin() + static_cast<std::ptrdiff_t>(end));
    sieve.bin_medians[b] = stats::quantile_sorted(sieve.bin_means[b], 0.5);
  }

  std::vector<double> resid;
  resid.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (s2_values[i] > 0.0) resid.push_back(std::log(s2_values[i]) - trend.log_value(a_values[i]));
  }
  if (resid.empty()) throw InputError("grid_2d: every unit has zero variance");
  std::sort(resid.begin(), resid.end());
  const double lo = stats::quantile_sorted(resid, options.lower_quantile);
  const double hi = resid.back();
  if (!(hi > lo) || options.residual_points == 1) {
    sieve.residual_grid = {hi};
  } else {
    const int pv = options.residual_points;
    sieve.residual_grid.resize(static_cast<std::size_t>(pv));
    for (int v = 0; v < pv; ++v) sieve.residual_grid[v] = lo + (hi - lo) * v / (pv - 1);
    sieve.residual_grid.back() = hi;
  }

  sieve.sigma2.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const double base = trend.log_value(sieve.bin_medians[b]);
    auto& row = sieve.sigma2[b];
    row.resize(sieve.residual_grid.size());
    for (std::size_t v = 0; v < row.size(); ++v) row[v] = std::exp(base + sieve.residual_grid[v]);
  }
  return sieve;
}

}  // namespace ebtrend
