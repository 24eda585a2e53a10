#include "ebtrend/linmodel.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "ebtrend/errors.hpp"
#include "ebtrend/parallel.hpp"

namespace ebtrend {

Design::Design(Eigen::MatrixXd x) : x_(std::move(x)) {
  const auto k = x_.rows();
  const auto p = x_.cols();
  if (p < 1) throw DesignError("design has no columns");
  if (k <= p)
    throw DesignError("design needs more samples than covariates (K=" + std::to_string(k) +
                      ", p=" + std::to_string(p) + ")");
  if (!x_.allFinite()) throw DesignError("design contains non-finite entries");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_probe(x_);
  rank_probe.setThreshold(1e-10);
  if (rank_probe.rank() < p) throw DesignError("design is rank deficient");

  qr_.compute(x_);
  thin_q_ = qr_.householderQ() * Eigen::MatrixXd::Identity(k, p);
  const Eigen::MatrixXd gram = x_.transpose() * x_;
  gram_inverse_ = gram.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
}

Eigen::VectorXd Design::coefficients(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  return qr_.solve(y);
}

Eigen::VectorXd Design::residuals(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  return y - thin_q_ * (thin_q_.transpose() * y);
}

std::optional<std::pair<int, int>> Design::two_group_sizes() const {
  if (x_.cols() != 2) return std::nullopt;
  int first = 0;
  int second = 0;
  for (Eigen::Index j = 0; j < x_.rows(); ++j) {
    const double u = x_(j, 0);
    const double v = x_(j, 1);
    if (u == 1.0 && v == 0.0) {
      ++first;
    } else if (u == 0.0 && v == 1.0) {
      ++second;
    } else {
      return std::nullopt;
    }
  }
  if (first == 0 || second == 0) return std::nullopt;
  return std::make_pair(first, second);
}

Design two_group_design(int k_a, int k_b) {
  if (k_a < 1 || k_b < 1) throw DesignError("both groups need at least one sample");
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(k_a + k_b, 2);
  x.col(0).head(k_a).setOnes();
  x.col(1).tail(k_b).setOnes();
  return Design(std::move(x));
}

Contrast make_contrast(const Design& design, Eigen::VectorXd weights) {
  if (weights.size() != design.covariates())
    throw DesignError("contrast has " + std::to_string(weights.size()) +
                      " weights but the design has " + std::to_string(design.covariates()) +
                      " columns");
  const double var = weights.dot(design.gram_inverse() * weights);
  if (!(var > 0.0)) throw DesignError("contrast has zero variance");
  return Contrast{std::move(weights), std::sqrt(var)};
}

Contrast intensity_contrast(const Design& design) {
  Eigen::VectorXd c = design.matrix().colwise().mean().transpose();
  return make_contrast(design, std::move(c));
}

Contrast manorm_contrast(const Design& design) {
  if (!design.two_group_sizes())
    throw DesignError("the MAnorm2 intensity is only defined for two-group indicator designs");
  return make_contrast(design, Eigen::Vector2d(0.5, 0.5));
}

UnitSummary fit_unit(std::span<const double> y, const Design& design, const Contrast& theta,
                     SideInfo side) {
  const int k = design.samples();
  if (static_cast<int>(y.size()) != k)
    throw DesignError("response has " + std::to_string(y.size()) + " entries, design has " +
                      std::to_string(k) + " rows");
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), k);
  if (!yv.allFinite()) throw InputError("response contains non-finite values");
  if (theta.weights.size() != design.covariates())
    throw DesignError("contrast does not match the design");

  const Eigen::VectorXd beta = design.coefficients(yv);
  const Eigen::VectorXd resid = design.residuals(yv);

  UnitSummary u;
  u.df = design.residual_df();
  u.z = theta.weights.dot(beta);
  u.a = yv.mean();
  const double rss = resid.squaredNorm();
  // Treat round-off sized residuals from an exactly saturated fit as zero.
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * yv.norm();
  u.s2 = rss <= noise * noise ? 0.0 : rss / u.df;

  switch (side.mode) {
    case SideMode::AverageIntensity:
      u.m = u.a;
      break;
    case SideMode::External:
      u.m = side.external;
      break;
    case SideMode::ManormTilde:
      if (!design.two_group_sizes())
        throw DesignError("manorm side information needs a two-group indicator design");
      u.m = 0.5 * (beta(0) + beta(1));
      break;
  }
  return u;
}

std::vector<UnitSummary> fit_units(const Eigen::MatrixXd& y, const Design& design,
                                   const Contrast& theta, SideMode side,
                                   std::span<const double> external, unsigned threads) {
  const auto n = static_cast<std::size_t>(y.rows());
  if (side == SideMode::External && external.size() != n)
    throw InputError("external side information has " + std::to_string(external.size()) +
                     " values for " + std::to_string(n) + " units");
  std::vector<UnitSummary> out(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const Eigen::VectorXd row = y.row(static_cast<Eigen::Index>(i)).transpose();
    SideInfo info{side, side == SideMode::External ? external[i] : 0.0};
    out[i] = fit_unit(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                      design, theta, info);
  });
  return out;
}

OrthogonalityReport check_orthogonality(const Design& design, const Contrast& theta,
                                        const Contrast& side, double tol) {
  const auto p = design.covariates();
  if (theta.weights.size() != p || side.weights.size() != p)
    throw DesignError("contrast dimensions do not match the design");
  OrthogonalityReport r;
  r.value = theta.weights.dot(design.gram_inverse() * side.weights);
  const double scale = std::max(1.0, theta.weights.norm() * side.weights.norm());
  r.contrast_ok = std::abs(r.value) <= tol * scale;

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(design.samples());
  r.ones_residual = design.residuals(ones).norm() / std::sqrt(double(design.samples()));
  r.ones_in_colspace = r.ones_residual <= std::max(tol, 1e-12);
  r.ok = r.contrast_ok && r.ones_in_colspace;
  return r;
}

}  // namespace ebtrend
