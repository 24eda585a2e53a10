#include "ebtrend/multiplicity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ebtrend/errors.hpp"

namespace ebtrend {
namespace {

// Indices ordered by p, ties broken by index.
std::vector<std::size_t> order_of(std::span<const double> p) {
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  return idx;
}

void check(std::span<const double> p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (std::isnan(p[i])) throw InputError("p-value " + std::to_string(i) + " is NaN");
    if (p[i] < 0.0 || p[i] > 1.0) throw InputError("p-value " + std::to_string(i) + " outside [0, 1]");
  }
}

}  // namespace

BhResult bh_reject(std::span<const double> p, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  check(p);
  BhResult out;
  out.alpha = alpha;
  out.rejected.assign(p.size(), false);
  const std::size_t n = p.size();
  if (n == 0) return out;
  const auto idx = order_of(p);
  for (std::size_t j = n; j >= 1; --j) {
    if (p[idx[j - 1]] <= double(j) / double(n) * alpha) {
      out.j_hat = j;
      break;
    }
  }
  out.threshold = double(out.j_hat) / double(n) * alpha;
  if (out.j_hat == 0) return out;
  const double cut = p[idx[out.j_hat - 1]];
  // A tie with P_(j_hat) at a later rank would itself pass its step bound,
  // so this marks exactly j_hat units.
  for (std::size_t i = 0; i < n; ++i) out.rejected[i] = p[i] <= cut;
  return out;
}

std::vector<double> bh_adjust(std::span<const double> p) {
  check(p);
  const std::size_t n = p.size();
  std::vector<double> q(n);
  if (n == 0) return q;
  const auto idx = order_of(p);
  double running = 1.0;
  for (std::size_t j = n; j >= 1; --j) {
    running = std::min(running, double(n) * p[idx[j - 1]] / double(j));
    q[idx[j - 1]] = std::min(running, 1.0);
  }
  return q;
}

ErrorMetrics error_metrics(const BhResult& result, const std::vector<bool>& null_mask) {
  if (null_mask.size() != result.rejected.size())
    throw InputError("null mask and rejection vector differ in length");
  ErrorMetrics m;
  std::size_t alternatives = 0, true_hits = 0;
  for (std::size_t i = 0; i < null_mask.size(); ++i) {
    if (!null_mask[i]) ++alternatives;
    if (!result.rejected[i]) continue;
    ++m.r;
    if (null_mask[i]) ++m.v;
    else ++true_hits;
  }
  m.fdp = double(m.v) / double(std::max<std::size_t>(m.r, 1));
  m.power = alternatives ? double(true_hits) / double(alternatives) : 0.0;
  return m;
}

}  // namespace ebtrend
