#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ebtrend/linmodel.hpp"
#include "ebtrend/priorfit.hpp"
#include "ebtrend/pvalues.hpp"
#include "ebtrend/trend.hpp"

namespace ebtrend {

struct AnalysisOptions {
  NpmleOptions npmle;
  BinRule bin_rule = BinRule::single();
  int spline_df = 0;  ///< 0 selects it from the data
  unsigned threads = 0;
};

struct AnalysisInput {
  std::vector<UnitSummary> units;
  double nu = 1.0;
  int K = 0;
  SideMode side = SideMode::AverageIntensity;
  std::vector<GroupStats> groups;  ///< filled for two-group designs
  int k_a = 0;
  int k_b = 0;
};

/// Empty when `method` can run on this input, otherwise the reason it cannot.
std::optional<std::string> method_inapplicable(MethodId method, const AnalysisInput& input);

/// Lazily fitted trend and priors shared by every method on one data set.
class Analysis {
 public:
  explicit Analysis(AnalysisInput input, AnalysisOptions options = {});

  const AnalysisInput& input() const noexcept { return input_; }
  const Warnings& warnings() const noexcept { return warnings_; }

  const TrendFit& trend();
  const InvChisqPrior& untrended_invchisq();
  const InvChisqPrior& reg_invchisq();
  const NpmleFit1D& untrended_npmle();
  const NpmleFit1D& reg_npmle();
  const JointNpmleFit& joint_npmle();
  const BinnedPriorSet& discrete_priors();

  /// Throws ApplicabilityError for methods that do not apply (Oracle always).
  PValueVector pvalues(MethodId method);

 private:
  AnalysisInput input_;
  AnalysisOptions options_;
  unsigned threads_;
  Warnings warnings_;
  std::optional<TrendFit> trend_;
  std::optional<InvChisqPrior> untrended_invchisq_;
  std::optional<InvChisqPrior> reg_invchisq_;
  std::optional<NpmleFit1D> untrended_npmle_;
  std::optional<NpmleFit1D> reg_npmle_;
  std::optional<JointNpmleFit> joint_npmle_;
  std::optional<BinnedPriorSet> discrete_priors_;
};

}  // namespace ebtrend
