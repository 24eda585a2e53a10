#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ebtrend {

struct BhResult {
  double alpha = 0.05;
  std::size_t j_hat = 0;
  double threshold = 0.0;  ///< j_hat / n * alpha
  std::vector<bool> rejected;
};

/// Benjamini-Hochberg step-up. Every p at or below P_(j_hat) is rejected.
BhResult bh_reject(std::span<const double> p, double alpha);

/// BH-adjusted p-values: q_i = min_{j >= rank(i)} n P_(j) / j, capped at 1.
std::vector<double> bh_adjust(std::span<const double> p);

struct ErrorMetrics {
  std::size_t v = 0;  ///< false discoveries
  std::size_t r = 0;  ///< discoveries
  double fdp = 0.0;
  double power = 0.0;
};

ErrorMetrics error_metrics(const BhResult& result, const std::vector<bool>& null_mask);

}  // namespace ebtrend
