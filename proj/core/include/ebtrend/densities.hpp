#pragma once

#include <span>
#include <vector>

#include "ebtrend/priors.hpp"

namespace ebtrend {

/// Density of tau2 * chi2_df / df at x.
double scaled_chisq_density(double x, int df, double tau2);

double log_mixture_density_1d(const DiscretePrior1D& prior, int df, double v2);
double mixture_density_1d(const DiscretePrior1D& prior, int df, double v2);

/// p_chi2(s2 | kappa, sigma2) times the N(mu, sigma2 / K) density at a.
double log_joint_kernel(double s2, double a, double mu, double sigma2, int kappa, int K);
double joint_kernel(double s2, double a, double mu, double sigma2, int kappa, int K);

double log_mixture_density_2d(const DiscretePrior2D& prior, int kappa, int K, double s2, double a);
double mixture_density_2d(const DiscretePrior2D& prior, int kappa, int K, double s2, double a);

/// log of (1/|mu|) sum_mu N(a; mu, variance) for a fixed set of means.
///
/// Evaluation is exact to round-off: near queries use a Taylor expansion of
/// the Gaussian cross term about the centre of the means, far queries a
/// windowed log-sum-exp over the means that matter.
class MeanGaussianKernel {
 public:
  MeanGaussianKernel(std::span<const double> sorted_means, double variance);

  double log_mean(double a) const;
  double variance() const noexcept { return variance_; }

 private:
  double direct(double a) const;

  std::vector<double> means_;
  double variance_;
  double h_;
  double centre_;
  double radius_;  // max |mu - centre| / h
  double log_norm_;
  std::vector<double> moments_;  // sum_mu u^k exp(-u^2/2) / k!
};

/// Reference implementation of MeanGaussianKernel::log_mean: plain log-sum-exp.
double log_mean_normal_density(std::span<const double> means, double variance, double a);

}  // namespace ebtrend
