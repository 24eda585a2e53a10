#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ebtrend/linmodel.hpp"

namespace ebtrend {

/// Spline degrees of freedom: min{1 + 1(n>=3) + 1(n>=6) + 1(n>=30), distinct_m}.
int select_spline_df(std::size_t n, std::size_t distinct_m);

/// Natural cubic spline basis in the truncated-power form, one column per
/// knot (the first two columns are 1 and x). Knots must be strictly
/// increasing; x and knots share units. The basis is linear outside the
/// boundary knots.
Eigen::MatrixXd natural_spline_basis(std::span<const double> x, std::span<const double> knots);

struct TrendValue {
  double m_hat = 0.0;
  double xi2_hat = 1.0;  ///< exp(m_hat)
};

/// Fitted mean-variance trend of log S^2 against side information.
class TrendFit {
 public:
  enum class Kind { Constant, Spline };

  static TrendFit constant(double value);

  Kind kind() const noexcept { return kind_; }
  double constant_value() const noexcept { return constant_; }
  /// Knot locations in side-information units (boundary knots first and last).
  const std::vector<double>& knots() const noexcept { return knots_; }
  const Eigen::VectorXd& coefficients() const noexcept { return coef_; }
  /// Degrees of freedom used by the fit (1 for the constant fit).
  int df() const noexcept { return df_; }
  /// True when a spline was requested but the data forced a constant fit.
  bool fell_back() const noexcept { return fell_back_; }

  double log_value(double m) const;
  TrendValue eval(double m) const;
  /// Same curve moved by `delta` on the log scale.
  TrendFit shifted(double delta) const;

 private:
  friend TrendFit fit_trend(std::span<const double>, std::span<const double>, int);

  Kind kind_ = Kind::Constant;
  double constant_ = 0.0;
  std::vector<double> knots_;
  std::vector<double> scaled_knots_;
  Eigen::VectorXd coef_;
  double lo_ = 0.0;
  double span_ = 1.0;
  int df_ = 1;
  bool fell_back_ = false;
};

/// Least-squares natural spline fit of log_s2 on m. With df <= 0 the degrees
/// of freedom are chosen by select_spline_df. Interior knots sit at equally
/// spaced quantiles of m, boundary knots at its range.
TrendFit fit_trend(std::span<const double> m, std::span<const double> log_s2, int df = 0);

inline TrendValue eval_trend(const TrendFit& fit, double m) { return fit.eval(m); }

/// Trend of log S^2 on M over units with S^2 > 0; `dropped` receives the
/// number of zero-variance units left out.
TrendFit fit_trend_units(std::span<const UnitSummary> units, std::size_t* dropped = nullptr);

}  // namespace ebtrend
