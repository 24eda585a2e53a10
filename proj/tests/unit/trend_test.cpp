#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ebtrend/trend.hpp"

using namespace ebtrend;

namespace {

// Natural cubic interpolant through (k_i, v_i), linear beyond the ends.
double natural_interp(const std::vector<double>& k, const std::vector<double>& v, double x) {
  const std::size_t n = k.size();
  std::vector<double> h(n - 1), m2(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = k[i + 1] - k[i];
  if (n > 2) {
    // Tridiagonal system for interior second derivatives (Thomas algorithm).
    const std::size_t q = n - 2;
    std::vector<double> a(q), b(q), c(q), r(q);
    for (std::size_t j = 0; j < q; ++j) {
      const std::size_t i = j + 1;
      a[j] = h[i - 1];
      b[j] = 2.0 * (h[i - 1] + h[i]);
      c[j] = h[i];
      r[j] = 6.0 * ((v[i + 1] - v[i]) / h[i] - (v[i] - v[i - 1]) / h[i - 1]);
    }
    for (std::size_t j = 1; j < q; ++j) {
      const double f = a[j] / b[j - 1];
      b[j] -= f * c[j - 1];
      r[j] -= f * r[j - 1];
    }
    m2[q] = r[q - 1] / b[q - 1];
    for (std::size_t j = q - 1; j-- > 0;) m2[j + 1] = (r[j] - c[j] * m2[j + 2]) / b[j];
  }
  auto slope = [&](std::size_t i, bool left) {
    const double d = (v[i + 1] - v[i]) / h[i];
    return left ? d - h[i] * (2 * m2[i] + m2[i + 1]) / 6.0 : d + h[i] * (m2[i] + 2 * m2[i + 1]) / 6.0;
  };
  if (x <= k.front()) return v.front() + slope(0, true) * (x - k.front());
  if (x >= k.back()) return v.back() + slope(n - 2, false) * (x - k.back());
  std::size_t i = 0;
  while (x > k[i + 1]) ++i;
  const double t = x - k[i], u = k[i + 1] - x;
  return m2[i] * u * u * u / (6 * h[i]) + m2[i + 1] * t * t * t / (6 * h[i]) +
         (v[i] / h[i] - m2[i] * h[i] / 6) * u + (v[i + 1] / h[i] - m2[i + 1] * h[i] / 6) * t;
}

}  // namespace

TEST(Trend, SelectSplineDf) {
  EXPECT_EQ(select_spline_df(15735, 5000), 4);
  EXPECT_EQ(select_spline_df(5, 5), 2);
  EXPECT_EQ(select_spline_df(2, 2), 1);
  EXPECT_EQ(select_spline_df(100, 3), 3);
}

TEST(Trend, ConstantResponse) {
  std::vector<double> m, y;
  for (int i = 0; i < 50; ++i) {
    m.push_back(i * 0.37);
    y.push_back(-1.25);
  }
  const TrendFit fit = fit_trend(m, y);
  for (double x : m) EXPECT_NEAR(fit.log_value(x), -1.25, 1e-9);
}

TEST(Trend, ExactLineReproduced) {
  std::vector<double> m, y;
  for (int i = 0; i < 100; ++i) {
    m.push_back(i / 99.0);
    y.push_back(2 * m.back() + 1);
  }
  const TrendFit fit = fit_trend(m, y);
  EXPECT_EQ(fit.kind(), TrendFit::Kind::Spline);
  for (double x : m) EXPECT_NEAR(fit.log_value(x), 2 * x + 1, 1e-6);
  const auto v = fit.eval(0.5);
  EXPECT_NEAR(v.m_hat, 2.0, 1e-6);
  EXPECT_NEAR(v.xi2_hat, std::exp(2.0), 1e-5);
}

TEST(Trend, TwoPointsGiveConstantMean) {
  const std::vector<double> m = {0, 1}, y = {0, 4};
  const TrendFit fit = fit_trend(m, y);
  EXPECT_EQ(fit.kind(), TrendFit::Kind::Constant);
  EXPECT_DOUBLE_EQ(fit.eval(0.3).m_hat, 2.0);
}

TEST(Trend, ConstantFitEvaluatesToOne) {
  const TrendFit fit = TrendFit::constant(0.0);
  EXPECT_DOUBLE_EQ(fit.eval(123.0).xi2_hat, 1.0);
}

TEST(Trend, IdenticalSideInformationFallsBack) {
  const std::vector<double> m(20, 3.0);
  std::vector<double> y;
  for (int i = 0; i < 20; ++i) y.push_back(i);
  // Automatic selection already settles on a constant; an explicit df has to fall back.
  const TrendFit automatic = fit_trend(m, y);
  EXPECT_EQ(automatic.kind(), TrendFit::Kind::Constant);
  EXPECT_FALSE(automatic.fell_back());
  const TrendFit fit = fit_trend(m, y, 4);
  EXPECT_EQ(fit.kind(), TrendFit::Kind::Constant);
  EXPECT_TRUE(fit.fell_back());
  EXPECT_NEAR(fit.constant_value(), 9.5, 1e-12);
}

class TrendOracle : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 800; ++i) {
      const double x = 20 + nd(rng);
      m.push_back(x);
      y.push_back(-3.0 / (1 + std::exp(-(x - 20) / 0.4)) + 0.5 * nd(rng));
    }
    fit = fit_trend(m, y);
  }
  std::vector<double> m, y;
  TrendFit fit;
};

TEST_F(TrendOracle, MatchesCardinalBasisLeastSquares) {
  const auto& knots = fit.knots();
  ASSERT_EQ(knots.size(), 4u);
  const auto n = Eigen::Index(m.size());
  const auto q = Eigen::Index(knots.size());
  Eigen::MatrixXd basis(n, q);
  for (Eigen::Index j = 0; j < q; ++j) {
    std::vector<double> unit(knots.size(), 0.0);
    unit[std::size_t(j)] = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) basis(i, j) = natural_interp(knots, unit, m[std::size_t(i)]);
  }
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const Eigen::VectorXd values = basis.colPivHouseholderQr().solve(yv);
  const std::vector<double> node_values(values.data(), values.data() + q);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ud(*std::min_element(m.begin(), m.end()),
                                            *std::max_element(m.begin(), m.end()));
  for (int t = 0; t < 1000; ++t) {
    const double x = ud(rng);
    EXPECT_NEAR(fit.log_value(x), natural_interp(knots, node_values, x), 1e-8);
  }
}

TEST_F(TrendOracle, ResidualsOrthogonalToBasis) {
  const auto& knots = fit.knots();
  Eigen::MatrixXd basis = natural_spline_basis(m, knots);
  Eigen::VectorXd r(Eigen::Index(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i) r(Eigen::Index(i)) = y[i] - fit.log_value(m[i]);
  const Eigen::VectorXd g = basis.transpose() * r;
  EXPECT_LE(g.cwiseAbs().maxCoeff() / double(m.size()), 1e-8);
}

TEST_F(TrendOracle, LinearBeyondBoundaryKnots) {
  const double lo = fit.knots().front(), hi = fit.knots().back();
  const double span = hi - lo;
  for (double base : {hi + 0.1, hi + 2 * span, lo - 2 * span}) {
    const double h = 0.01 * span;
    const double d2 = fit.log_value(base + h) - 2 * fit.log_value(base) + fit.log_value(base - h);
    EXPECT_NEAR(d2, 0.0, 1e-9);
    EXPECT_TRUE(std::isfinite(fit.log_value(base)));
    EXPECT_GT(fit.eval(base).xi2_hat, 0.0);
  }
}

TEST_F(TrendOracle, ShiftMovesEveryValue) {
  const TrendFit s = fit.shifted(0.7);
  for (double x : {18.0, 20.0, 22.5}) EXPECT_NEAR(s.log_value(x), fit.log_value(x) + 0.7, 1e-12);
  EXPECT_NEAR(TrendFit::constant(1.0).shifted(-0.5).log_value(0.0), 0.5, 1e-15);
}
