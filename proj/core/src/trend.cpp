#include "ebtrend/trend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ebtrend/errors.hpp"
#include "ebtrend/special.hpp"

namespace ebtrend {

int select_spline_df(std::size_t n, std::size_t distinct_m) {
  const int by_n = 1 + (n >= 3) + (n >= 6) + (n >= 30);
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(by_n), distinct_m));
}

namespace {

double cube_plus(double v) { return v > 0.0 ? v * v * v : 0.0; }

std::size_t count_distinct(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace

Eigen::MatrixXd natural_spline_basis(std::span<const double> x, std::span<const double> knots) {
  const auto nk = knots.size();
  if (nk < 2) throw InputError("natural spline basis needs at least two knots");
  const double last = knots[nk - 1];
  const double second_last = knots[nk - 2];
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(nk));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    basis(i, 0) = 1.0;
    basis(i, 1) = xi;
    const double d_last = (cube_plus(xi - second_last) - cube_plus(xi - last)) / (last - second_last);
    for (std::size_t k = 0; k + 2 < nk; ++k) {
      const double dk = (cube_plus(xi - knots[k]) - cube_plus(xi - last)) / (last - knots[k]);
      basis(i, static_cast<Eigen::Index>(k + 2)) = dk - d_last;
    }
  }
  return basis;
}

TrendFit TrendFit::constant(double value) {
  TrendFit fit;
  fit.kind_ = TrendFit::Kind::Constant;
  fit.constant_ = value;
  fit.df_ = 1;
  return fit;
}

double TrendFit::log_value(double m) const {
  if (kind_ == TrendFit::Kind::Constant) return constant_;
  const double x = (m - lo_) / span_;
  const auto& k = scaled_knots_;
  const std::size_t nk = k.size();
  const double last = k[nk - 1];
  const double d_last = (cube_plus(x - k[nk - 2]) - cube_plus(x - last)) / (last - k[nk - 2]);
  double acc = coef_(0) + coef_(1) * x;
  for (std::size_t j = 0; j + 2 < nk; ++j) {
    const double dj = (cube_plus(x - k[j]) - cube_plus(x - last)) / (last - k[j]);
    acc += coef_(static_cast<Eigen::Index>(j + 2)) * (dj - d_last);
  }
  return acc;
}

TrendValue TrendFit::eval(double m) const {
  const double mh = log_value(m);
  return {mh, std::exp(mh)};
}

TrendFit TrendFit::shifted(double delta) const {
  TrendFit out = *this;
  if (kind_ == Kind::Constant)
    out.constant_ += delta;
  else
    out.coef_(0) += delta;
  return out;
}

TrendFit fit_trend(std::span<const double> m, std::span<const double> log_s2, int df) {
  if (m.size() != log_s2.size()) throw InputError("trend inputs differ in length");
  if (m.empty()) throw InputError("trend fit needs at least one point");
  for (double v : log_s2)
    if (!std::isfinite(v)) throw InputError("trend response must be finite");

  const std::size_t n = m.size();
  const double mean = std::accumulate(log_s2.begin(), log_s2.end(), 0.0) / double(n);
  std::vector<double> mv(m.begin(), m.end());
  const std::size_t distinct = count_distinct(mv);
  const int requested = df > 0 ? df : select_spline_df(n, distinct);
  if (requested < 2) return TrendFit::constant(mean);
  if (distinct < 2) {
    TrendFit fit = TrendFit::constant(mean);
    fit.fell_back_ = true;
    return fit;
  }

  std::vector<double> sorted = mv;
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front();
  const double span = sorted.back() - lo;

  std::vector<double> scaled(n);
  for (std::size_t i = 0; i < n; ++i) scaled[i] = (m[i] - lo) / span;
  std::vector<double> sorted_scaled(n);
  for (std::size_t i = 0; i < n; ++i) sorted_scaled[i] = (sorted[i] - lo) / span;

  const int eff_df = std::min<int>(requested, static_cast<int>(distinct));
  std::vector<double> knots{0.0};
  for (int j = 1; j + 1 < eff_df; ++j)
    knots.push_back(stats::quantile_sorted(sorted_scaled, double(j) / double(eff_df - 1)));
  knots.push_back(1.0);
  // Tied quantiles collapse onto one knot.
  knots.erase(std::unique(knots.begin(), knots.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              knots.end());

  const Eigen::MatrixXd basis = natural_spline_basis(scaled, knots);
  const Eigen::Map<const Eigen::VectorXd> y(log_s2.data(), static_cast<Eigen::Index>(n));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  TrendFit fit;
  fit.kind_ = TrendFit::Kind::Spline;
  fit.coef_ = qr.solve(y);
  fit.scaled_knots_ = knots;
  fit.lo_ = lo;
  fit.span_ = span;
  fit.df_ = static_cast<int>(knots.size());
  fit.knots_.reserve(knots.size());
  for (double k : knots) fit.knots_.push_back(lo + k * span);
  return fit;
}

TrendFit fit_trend_units(std::span<const UnitSummary> units, std::size_t* dropped) {
  std::vector<double> m;
  std::vector<double> y;
  m.reserve(units.size());
  y.reserve(units.size());
  std::size_t zero = 0;
  for (const auto& u : units) {
    if (u.s2 > 0.0) {
      m.push_back(u.m);
      y.push_back(std::log(u.s2));
    } else {
      ++zero;
    }
  }
  if (dropped) *dropped = zero;
  if (m.empty()) throw InputError("every unit has zero residual variance; no trend can be fitted");
  return fit_trend(m, y);
}

}  // namespace ebtrend
