#pragma once

#include <limits>
#include <vector>

namespace ebtrend {

/// Discrete scale prior: weights on strictly increasing positive support points.
struct DiscretePrior1D {
  std::vector<double> support;
  std::vector<double> weights;

  /// Throws InputError unless the simplex and support invariants hold.
  void validate() const;
  static DiscretePrior1D point_mass(double tau2) { return {{tau2}, {1.0}}; }
};

struct Atom2D {
  double mu = 0.0;
  double sigma2 = 1.0;
};

/// Discrete bivariate prior on (mu, sigma^2).
struct DiscretePrior2D {
  std::vector<Atom2D> atoms;
  std::vector<double> weights;

  void validate() const;
};

/// 1/sigma^2 ~ chi2_kappa0 / (kappa0 * s0_sq); kappa0 = +inf is the point mass at s0_sq.
struct InvChisqPrior {
  double kappa0 = std::numeric_limits<double>::infinity();
  double s0_sq = 1.0;

  bool is_point_mass() const noexcept { return kappa0 == std::numeric_limits<double>::infinity(); }
};

/// Drop weights below `threshold` and renormalize. The largest atom always survives.
void prune_weights(DiscretePrior1D& prior, double threshold);
void prune_weights(DiscretePrior2D& prior, double threshold);

}  // namespace ebtrend
