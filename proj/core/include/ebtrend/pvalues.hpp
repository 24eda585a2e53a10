#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ebtrend/densities.hpp"
#include "ebtrend/linmodel.hpp"
#include "ebtrend/priorfit.hpp"
#include "ebtrend/priors.hpp"
#include "ebtrend/trend.hpp"

namespace ebtrend {

/// Testing methods in output column order. Oracle needs simulation truth.
enum class MethodId {
  TTest,
  UntrendedInvChisq,
  UntrendedNpmle,
  RegInvChisq,
  RegNpmle,
  JointNpmle,
  DiscreteJoint,
  Map,
  Manorm2,
  Oracle,
};

inline constexpr std::array<MethodId, 10> kAllMethods = {
    MethodId::TTest,       MethodId::UntrendedInvChisq, MethodId::UntrendedNpmle,
    MethodId::RegInvChisq, MethodId::RegNpmle,          MethodId::JointNpmle,
    MethodId::DiscreteJoint, MethodId::Map,             MethodId::Manorm2,
    MethodId::Oracle};

std::string_view method_name(MethodId id);
std::optional<MethodId> parse_method(std::string_view name);

struct PValueVector {
  MethodId method = MethodId::TTest;
  std::vector<double> p;
  std::size_t flagged = 0;  ///< units evaluated through the underflow fallback
};

/// Two-sided t-test on df = K - p. A zero-variance unit gives 0 when z != 0, else 1.
double p_ttest(const UnitSummary& u, double nu);

/// Moderated t-test (limma; limma-trend when xi2 is the trend value).
double p_limma_param(const UnitSummary& u, const InvChisqPrior& prior, double nu, double xi2 = 1.0);

/// Partially Bayes p-value for a discrete scale prior on S^2 / xi2.
/// `flagged` is set when every atom underflowed and the nearest atom was used.
double p_partially_bayes_1d(const UnitSummary& u, const DiscretePrior1D& prior, double nu,
                            double xi2 = 1.0, bool* flagged = nullptr);

/// Partially Bayes p-value for a discrete prior on (mu, sigma^2), using (S^2, A).
double p_joint(const UnitSummary& u, const DiscretePrior2D& prior, double nu, int K,
               bool* flagged = nullptr);

/// p_joint against a fitted joint NPMLE without expanding it into atoms.
///
/// A cell (b, v) of the fit stands for |M_b| atoms sharing sigma^2, and the
/// sum of their Gaussian factors is the bin's mean normal density, so the
/// result equals p_joint(u, fit.expand(), nu, K) up to round-off.
class JointPValue {
 public:
  explicit JointPValue(const JointNpmleFit& fit);
  double operator()(const UnitSummary& u, double nu, bool* flagged = nullptr) const;

 private:
  struct Cell {
    double log_weight;
    double sigma2;
    std::size_t kernel;
  };
  std::vector<Cell> cells_;
  std::vector<MeanGaussianKernel> kernels_;
  int K_;
};

double p_discrete_joint(const UnitSummary& u, const BinnedPriorSet& priors, double nu,
                        bool* flagged = nullptr);

/// Gaussian p-value with the trend as the variance; S^2 is ignored.
double p_map(const UnitSummary& u, const TrendFit& trend, double nu);

/// E[log S^2] - log sigma^2 under a scaled chi-square with df degrees of freedom.
double log_variance_bias(int df);

/// Per-unit group means and variances for a two-group design.
struct GroupStats {
  double mean_a = 0.0;
  double s2_a = 0.0;
  double mean_b = 0.0;
  double s2_b = 0.0;
};

std::vector<GroupStats> group_stats(const Eigen::MatrixXd& y, int k_a, int k_b);

struct ManormFit {
  TrendFit trend;      ///< bias-corrected log variance against group mean
  double d0 = 0.0;     ///< prior degrees of freedom (may be +inf)
  double d0_a = 0.0;
  double d0_b = 0.0;
};

/// MAnorm2-style moderated test; the variance curve is evaluated at (mean_a + mean_b) / 2.
PValueVector p_manorm2(std::span<const GroupStats> groups, int k_a, int k_b,
                       ManormFit* fit_out = nullptr);

/// Tweedie-form evaluation of p_partially_bayes_1d by one-dimensional quadrature.
double tweedie_reg(const UnitSummary& u, const DiscretePrior1D& prior, double xi2, double nu,
                   double quad_tol = 1e-8);

/// Tweedie-form evaluation of p_joint.
double tweedie_joint(const UnitSummary& u, const DiscretePrior2D& prior, double nu, int K,
                     double quad_tol = 1e-8);

}  // namespace ebtrend
