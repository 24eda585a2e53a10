#include "ebtrend/densities.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ebtrend/errors.hpp"
#include "ebtrend/special.hpp"

namespace ebtrend {

void DiscretePrior1D::validate() const {
  if (support.empty() || support.size() != weights.size())
    throw InputError("prior support and weights must be non-empty and of equal length");
  double total = 0.0;
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (!(support[k] > 0.0)) throw InputError("prior support must be positive");
    if (k > 0 && !(support[k] > support[k - 1]))
      throw InputError("prior support must be strictly increasing");
    if (!(weights[k] >= 0.0)) throw InputError("prior weights must be non-negative");
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-10) throw InputError("prior weights must sum to one");
}

void DiscretePrior2D::validate() const {
  if (atoms.empty() || atoms.size() != weights.size())
    throw InputError("prior atoms and weights must be non-empty and of equal length");
  double total = 0.0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    if (!(atoms[k].sigma2 > 0.0) || !std::isfinite(atoms[k].mu))
      throw InputError("prior atoms need finite mu and positive sigma2");
    if (!(weights[k] >= 0.0)) throw InputError("prior weights must be non-negative");
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-10) throw InputError("prior weights must sum to one");
}

namespace {

template <class Atom>
void prune_impl(std::vector<Atom>& atoms, std::vector<double>& weights, double threshold) {
  if (weights.empty()) return;
  const auto top = static_cast<std::size_t>(
      std::max_element(weights.begin(), weights.end()) - weights.begin());
  std::vector<Atom> kept_atoms;
  std::vector<double> kept_weights;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] >= threshold || k == top) {
      kept_atoms.push_back(atoms[k]);
      kept_weights.push_back(weights[k]);
    }
  }
  double total = 0.0;
  for (double w : kept_weights) total += w;
  for (double& w : kept_weights) w /= total;
  atoms = std::move(kept_atoms);
  weights = std::move(kept_weights);
}

}  // namespace

void prune_weights(DiscretePrior1D& prior, double threshold) {
  prune_impl(prior.support, prior.weights, threshold);
}

void prune_weights(DiscretePrior2D& prior, double threshold) {
  prune_impl(prior.atoms, prior.weights, threshold);
}

double scaled_chisq_density(double x, int df, double tau2) {
  return std::exp(stats::log_scaled_chisq_density(x, df, tau2));
}

double log_mixture_density_1d(const DiscretePrior1D& prior, int df, double v2) {
  std::vector<double> terms(prior.support.size());
  for (std::size_t k = 0; k < terms.size(); ++k)
    terms[k] = std::log(prior.weights[k]) + stats::log_scaled_chisq_density(v2, df, prior.support[k]);
  return stats::log_sum_exp(terms);
}

double mixture_density_1d(const DiscretePrior1D& prior, int df, double v2) {
  return std::exp(log_mixture_density_1d(prior, df, v2));
}

double log_joint_kernel(double s2, double a, double mu, double sigma2, int kappa, int K) {
  return stats::log_scaled_chisq_density(s2, kappa, sigma2) +
         stats::log_normal_density(a, mu, sigma2 / K);
}

double joint_kernel(double s2, double a, double mu, double sigma2, int kappa, int K) {
  return std::exp(log_joint_kernel(s2, a, mu, sigma2, kappa, K));
}

double log_mixture_density_2d(const DiscretePrior2D& prior, int kappa, int K, double s2, double a) {
  std::vector<double> terms(prior.atoms.size());
  for (std::size_t k = 0; k < terms.size(); ++k)
    terms[k] = std::log(prior.weights[k]) +
               log_joint_kernel(s2, a, prior.atoms[k].mu, prior.atoms[k].sigma2, kappa, K);
  return stats::log_sum_exp(terms);
}

double mixture_density_2d(const DiscretePrior2D& prior, int kappa, int K, double s2, double a) {
  return std::exp(log_mixture_density_2d(prior, kappa, K, s2, a));
}

namespace {

constexpr int kTaylorOrder = 30;
// Taylor branch is used while |y| * radius <= kTaylorReach; the truncation
// error is then below (2^30 / 30!) e^4 ~ 1e-22 relative.
constexpr double kTaylorReach = 2.0;
// Wider mean sets would underflow exp(-u^2/2) in the moments.
constexpr double kTaylorMaxRadius = 8.0;
// Terms more than exp(-40) below the largest one are dropped in the direct sum.
constexpr double kDirectCut = 40.0;

}  // namespace

MeanGaussianKernel::MeanGaussianKernel(std::span<const double> sorted_means, double variance)
    : means_(sorted_means.begin(), sorted_means.end()), variance_(variance) {
  if (means_.empty()) throw InputError("mean-Gaussian kernel needs at least one mean");
  if (!(variance > 0.0)) throw InputError("mean-Gaussian kernel needs positive variance");
  if (!std::is_sorted(means_.begin(), means_.end())) std::sort(means_.begin(), means_.end());
  h_ = std::sqrt(variance);
  centre_ = 0.5 * (means_.front() + means_.back());
  radius_ = 0.5 * (means_.back() - means_.front()) / h_;
  log_norm_ = std::log(double(means_.size()) * h_ * std::sqrt(2.0 * std::numbers::pi));
  moments_.assign(kTaylorOrder + 1, 0.0);
  for (double mu : means_) {
    const double u = (mu - centre_) / h_;
    double term = std::exp(-0.5 * u * u);
    for (int k = 0; k <= kTaylorOrder; ++k) {
      moments_[k] += term;
      term *= u / double(k + 1);
    }
  }
}

double MeanGaussianKernel::log_mean(double a) const {
  const double y = (a - centre_) / h_;
  if (radius_ <= kTaylorMaxRadius && std::abs(y) * radius_ <= kTaylorReach) {
    double acc = moments_[kTaylorOrder];
    for (int k = kTaylorOrder - 1; k >= 0; --k) acc = acc * y + moments_[k];
    return -0.5 * y * y + std::log(acc) - log_norm_;
  }
  return direct(a);
}

double MeanGaussianKernel::direct(double a) const {
  const auto it = std::lower_bound(means_.begin(), means_.end(), a);
  std::size_t hi = static_cast<std::size_t>(it - means_.begin());
  std::size_t nearest = hi;
  if (hi == means_.size() || (hi > 0 && a - means_[hi - 1] < means_[hi] - a)) nearest = hi - 1;
  const double inv2v = 0.5 / variance_;
  const double top = -(a - means_[nearest]) * (a - means_[nearest]) * inv2v;
  double acc = 0.0;
  for (std::size_t k = nearest + 1; k-- > 0;) {
    const double e = -(a - means_[k]) * (a - means_[k]) * inv2v - top;
    if (e < -kDirectCut) break;
    acc += std::exp(e);
  }
  for (std::size_t k = nearest + 1; k < means_.size(); ++k) {
    const double e = -(a - means_[k]) * (a - means_[k]) * inv2v - top;
    if (e < -kDirectCut) break;
    acc += std::exp(e);
  }
  return top + std::log(acc) - log_norm_;
}

double log_mean_normal_density(std::span<const double> means, double variance, double a) {
  std::vector<double> terms(means.size());
  for (std::size_t k = 0; k < means.size(); ++k)
    terms[k] = stats::log_normal_density(a, means[k], variance);
  return stats::log_sum_exp(terms) - std::log(double(means.size()));
}

}  // namespace ebtrend
