#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ebtrend/errors.hpp"
#include "ebtrend/npmle.hpp"
#include "ebtrend/special.hpp"

using namespace ebtrend;

namespace {

LogLikMatrix chisq_problem(std::mt19937_64& rng, int n, const std::vector<double>& grid, int df,
                           const std::vector<double>& atoms, const std::vector<double>& probs) {
  std::chi_squared_distribution<double> chi(df);
  std::discrete_distribution<int> pick(probs.begin(), probs.end());
  LogLikMatrix l(n, Eigen::Index(grid.size()));
  for (int i = 0; i < n; ++i) {
    const double v = atoms[std::size_t(pick(rng))] * chi(rng) / df;
    for (std::size_t k = 0; k < grid.size(); ++k)
      l(i, Eigen::Index(k)) = stats::log_scaled_chisq_density(v, df, grid[k]);
  }
  return l;
}

std::vector<double> log_grid(double lo, double hi, int m) {
  std::vector<double> g;
  for (int k = 0; k < m; ++k) g.push_back(lo * std::pow(hi / lo, k / double(m - 1)));
  return g;
}

}  // namespace

TEST(Npmle, SingleColumn) {
  LogLikMatrix l(3, 1);
  l << -1.0, -2.0, -4.5;
  const auto r = npmle_em(l);
  ASSERT_EQ(r.weights.size(), 1u);
  EXPECT_DOUBLE_EQ(r.weights[0], 1.0);
  EXPECT_NEAR(r.loglik, -2.5, 1e-14);
  EXPECT_TRUE(r.converged);
}

TEST(Npmle, IdentityLikelihoodIsAFixedPoint) {
  LogLikMatrix l(2, 2);
  const double ninf = -std::numeric_limits<double>::infinity();
  l << 0.0, ninf, ninf, 0.0;
  for (bool acc : {false, true}) {
    EmOptions o;
    o.accelerate = acc;
    const auto r = npmle_em(l, {}, o);
    EXPECT_NEAR(r.weights[0], 0.5, 1e-12);
    EXPECT_NEAR(r.weights[1], 0.5, 1e-12);
  }
}

TEST(Npmle, RowWithoutFiniteEntryThrows) {
  LogLikMatrix l(2, 2);
  const double ninf = -std::numeric_limits<double>::infinity();
  l << 0.0, -1.0, ninf, ninf;
  try {
    npmle_em(l);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(Npmle, MonotoneForEmAndNewton) {
  std::mt19937_64 rng(21);
  const auto grid = log_grid(0.05, 50, 60);
  for (int t = 0; t < 10; ++t) {
    const LogLikMatrix l = chisq_problem(rng, 400, grid, 2 + t % 4, {0.5, 3.0, 12.0}, {0.3, 0.5, 0.2});
    for (bool acc : {false, true}) {
      EmOptions o;
      o.accelerate = acc;
      o.record_trace = true;
      o.max_iter = acc ? 5000 : 300;
      const auto r = npmle_em(l, {}, o);
      for (std::size_t k = 1; k < r.trace.size(); ++k)
        ASSERT_GE(r.trace[k], r.trace[k - 1] - 1e-12 * std::max(1.0, std::abs(r.trace[k - 1])));
    }
  }
}

TEST(Npmle, KktCertificate) {
  std::mt19937_64 rng(4);
  const auto grid = log_grid(0.05, 50, 100);
  const LogLikMatrix l = chisq_problem(rng, 3000, grid, 4, {1.0, 10.0}, {0.5, 0.5});
  const auto r = npmle_em(l);
  ASSERT_TRUE(r.converged);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_LE(r.gradient[k], 1.0 + 1e-4);
    if (r.weights[k] > 1e-8) EXPECT_NEAR(r.gradient[k], 1.0, 1e-4);
  }
}

TEST(Npmle, TwoAtomRecovery) {
  std::mt19937_64 rng(8);
  std::vector<double> grid = log_grid(0.1, 100, 31);  // holds 1 and 10 exactly
  grid[10] = 1.0;
  grid[20] = 10.0;
  // Well separated atoms at twelve degrees of freedom.
  const LogLikMatrix l = chisq_problem(rng, 5000, grid, 12, {1.0, 10.0}, {0.3, 0.7});
  const auto r = npmle_em(l);
  double low = 0, high = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) (grid[k] < 3.0 ? low : high) += r.weights[k];
  EXPECT_NEAR(low, 0.3, 0.05);
  EXPECT_NEAR(high, 0.7, 0.05);
  EXPECT_NEAR(r.weights[10], 0.3, 0.05);
  EXPECT_NEAR(r.weights[20], 0.7, 0.05);
}

TEST(Npmle, DeterministicAcrossThreadCounts) {
  std::mt19937_64 rng(6);
  const auto grid = log_grid(0.05, 50, 80);
  const LogLikMatrix l = chisq_problem(rng, 2000, grid, 3, {1.0, 6.0}, {0.5, 0.5});
  EmOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = npmle_em(l, {}, one);
  const auto b = npmle_em(l, {}, four);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.loglik, b.loglik);
}
