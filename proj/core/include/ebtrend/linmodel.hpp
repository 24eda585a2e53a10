#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ebtrend {

/// K x p design matrix with cached factorizations.
///
/// Construction validates full column rank and p < K. Responses are fitted
/// through a Householder QR of X; (X'X)^{-1} is kept alongside for contrast
/// variances and orthogonality checks.
class Design {
 public:
  explicit Design(Eigen::MatrixXd x);

  const Eigen::MatrixXd& matrix() const noexcept { return x_; }
  const Eigen::MatrixXd& gram_inverse() const noexcept { return gram_inverse_; }
  int samples() const noexcept { return static_cast<int>(x_.rows()); }
  int covariates() const noexcept { return static_cast<int>(x_.cols()); }
  int residual_df() const noexcept { return samples() - covariates(); }

  Eigen::VectorXd coefficients(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  Eigen::VectorXd residuals(const Eigen::Ref<const Eigen::VectorXd>& y) const;

  /// Group sizes (K_A, K_B) when X is the two-column indicator encoding of a
  /// two-group comparison, nullopt otherwise.
  std::optional<std::pair<int, int>> two_group_sizes() const;

 private:
  Eigen::MatrixXd x_;
  Eigen::MatrixXd gram_inverse_;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::MatrixXd thin_q_;
};

/// Indicator encoding: the first k_a rows are (1, 0), the remaining k_b rows (0, 1).
Design two_group_design(int k_a, int k_b);

struct Contrast {
  Eigen::VectorXd weights;
  double nu = 0.0;  ///< sqrt(c' (X'X)^{-1} c)
};

Contrast make_contrast(const Design& design, Eigen::VectorXd weights);

/// c_A = (1/K) sum_j x_j, the contrast whose estimate is the average intensity.
Contrast intensity_contrast(const Design& design);

/// MAnorm2's (0.5, 0.5) contrast on a two-group indicator design.
Contrast manorm_contrast(const Design& design);

enum class SideMode { AverageIntensity, External, ManormTilde };

struct SideInfo {
  SideMode mode = SideMode::AverageIntensity;
  double external = 0.0;  ///< used when mode == External
};

struct UnitSummary {
  double z = 0.0;   ///< contrast estimate
  double s2 = 0.0;  ///< residual variance
  double a = 0.0;   ///< average intensity
  double m = 0.0;   ///< side information
  int df = 0;       ///< K - p
};

UnitSummary fit_unit(std::span<const double> y, const Design& design, const Contrast& theta,
                     SideInfo side = {});

/// Fit every row of `y` (n x K). `external` supplies M_i when side == External.
std::vector<UnitSummary> fit_units(const Eigen::MatrixXd& y, const Design& design,
                                   const Contrast& theta, SideMode side,
                                   std::span<const double> external = {}, unsigned threads = 1);

struct OrthogonalityReport {
  double value = 0.0;          ///< c_theta' (X'X)^{-1} c_side
  bool ok = false;             ///< contrast condition and ones-vector condition both hold
  bool contrast_ok = false;
  bool ones_in_colspace = false;
  double ones_residual = 0.0;  ///< || (I - P_X) 1 || / sqrt(K)
};

OrthogonalityReport check_orthogonality(const Design& design, const Contrast& theta,
                                        const Contrast& side, double tol = 1e-10);

}  // namespace ebtrend
