#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ebtrend {

/// n observations x m support points, entries are log-likelihoods (-inf allowed).
using LogLikMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EmOptions {
  double tol = 1e-9;       ///< relative change of the average log-likelihood
  int max_iter = 5000;
  double kkt_tol = 1e-4;   ///< convergence also requires max gradient <= 1 + kkt_tol
  bool accelerate = true;  ///< Newton steps on the simplex; false runs plain EM
  int max_candidates = 300;   ///< columns modelled individually in a Newton step
  int max_violators = 100;    ///< of which at most this many enter on gradient alone
  bool record_trace = false;
  unsigned threads = 1;
};

struct EmResult {
  std::vector<double> weights;
  double loglik = 0.0;       ///< average log-likelihood at `weights`
  int iterations = 0;
  bool converged = false;
  double max_gradient = 0.0; ///< max_k (1/n) sum_i L_ik / f_i
  std::vector<double> gradient;
  std::vector<double> trace; ///< average log-likelihood at the start of every iteration
};

/// Maximize (1/n) sum_i log sum_k w_k L_ik over the simplex.
///
/// The base iteration is the EM fixed point w_k <- w_k (1/n) sum_i L_ik / f_i.
/// With `accelerate` each iteration instead takes a projected Newton step:
/// a quadratic model of the objective is maximized over the simplex on the
/// weighted columns plus the strongest gradient violators, the remaining
/// mass riding along as one aggregate column, followed by a backtracking line
/// search. The EM step is the fallback. Either way the objective never
/// decreases, and convergence requires the first-order certificate
/// max_k gradient_k <= 1 + kkt_tol. Empty `init` means uniform weights.
/// Reductions run in a fixed order for any thread count.
EmResult npmle_em(LogLikMatrix log_lik, std::span<const double> init = {},
                  const EmOptions& options = {});

}  // namespace ebtrend
