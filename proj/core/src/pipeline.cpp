#include "ebtrend/pipeline.hpp"
#include <cmath>

#include "ebtrend/errors.hpp"
#include "ebtrend/parallel.hpp"

namespace ebtrend {

std::optional<std::string> method_inapplicable(MethodId method, const AnalysisInput& input) {
  switch (method) {
    case MethodId::JointNpmle:
      if (input.side != SideMode::AverageIntensity)
        return std::string("method requires average intensity as side information");
      break;
    case MethodId::DiscreteJoint:
      if (input.side != SideMode::External)
        return std::string("method requires external discrete side information");
      break;
    case MethodId::Manorm2:
      if (input.side == SideMode::External)
        return std::string("method requires average intensity as side information");
      if (input.k_a < 2 || input.k_b < 2 || input.groups.size() != input.units.size())
        return std::string("method requires a two-group design with at least two samples per group");
      break;
    case MethodId::Oracle:
      return std::string("oracle p-values need simulation truth");
    default:
      break;
  }
  return std::nullopt;
}

Analysis::Analysis(AnalysisInput input, AnalysisOptions options)
    : input_(std::move(input)), options_(std::move(options)), threads_(resolve_threads(options_.threads)) {
  if (input_.units.empty()) throw InputError("analysis needs at least one unit");
  options_.npmle.em.threads = threads_;
}

const TrendFit& Analysis::trend() {
  if (!trend_) {
    std::size_t dropped = 0;
    std::vector<double> m, y;
    for (const auto& u : input_.units) {
      if (u.s2 > 0.0) {
        m.push_back(u.m);
        y.push_back(std::log(u.s2));
      } else {
        ++dropped;
      }
    }
    if (m.empty()) throw InputError("every unit has zero residual variance");
    trend_ = fit_trend(m, y, options_.spline_df);
    if (dropped)
      warnings_.push_back("trend: left out " + std::to_string(dropped) + " zero-variance units");
    if (trend_->fell_back()) warnings_.push_back("trend: side information is constant, constant fit used");
  }
  return *trend_;
}

const InvChisqPrior& Analysis::untrended_invchisq() {
  if (!untrended_invchisq_) {
    std::vector<double> s2;
    for (const auto& u : input_.units) s2.push_back(u.s2);
    untrended_invchisq_ = fit_invchisq_untrended(s2, input_.units.front().df);
  }
  return *untrended_invchisq_;
}

const InvChisqPrior& Analysis::reg_invchisq() {
  if (!reg_invchisq_) reg_invchisq_ = fit_invchisq_trended(input_.units, trend());
  return *reg_invchisq_;
}

const NpmleFit1D& Analysis::untrended_npmle() {
  if (!untrended_npmle_) untrended_npmle_ = fit_untrended_npmle(input_.units, options_.npmle, &warnings_);
  return *untrended_npmle_;
}

const NpmleFit1D& Analysis::reg_npmle() {
  if (!reg_npmle_) reg_npmle_ = fit_reg_npmle(input_.units, trend(), options_.npmle, &warnings_);
  return *reg_npmle_;
}

const JointNpmleFit& Analysis::joint_npmle() {
  if (!joint_npmle_)
    joint_npmle_ = fit_joint_npmle(input_.units, trend(), input_.K, options_.npmle, &warnings_);
  return *joint_npmle_;
}

const BinnedPriorSet& Analysis::discrete_priors() {
  if (!discrete_priors_)
    discrete_priors_ = fit_discrete_priors(input_.units, options_.bin_rule, options_.npmle, &warnings_);
  return *discrete_priors_;
}

PValueVector Analysis::pvalues(MethodId method) {
  if (auto reason = method_inapplicable(method, input_))
    throw ApplicabilityError(std::string(method_name(method)) + ": " + *reason);

  const auto& units = input_.units;
  const double nu = input_.nu;
  PValueVector out;
  out.method = method;
  out.p.resize(units.size());
  std::vector<char> flags(units.size(), 0);

  // Fits run before the parallel map so workers only read shared state.
  auto each = [&](auto&& fn) {
    parallel_for(units.size(), threads_, [&](std::size_t i) {
      bool flagged = false;
      out.p[i] = fn(units[i], &flagged);
      flags[i] = flagged;
    });
  };

  switch (method) {
    case MethodId::TTest:
      each([&](const UnitSummary& u, bool*) { return p_ttest(u, nu); });
      break;
    case MethodId::UntrendedInvChisq: {
      const auto& prior = untrended_invchisq();
      each([&](const UnitSummary& u, bool*) { return p_limma_param(u, prior, nu); });
      break;
    }
    case MethodId::UntrendedNpmle: {
      const auto& prior = untrended_npmle().prior;
      each([&](const UnitSummary& u, bool* f) { return p_partially_bayes_1d(u, prior, nu, 1.0, f); });
      break;
    }
    case MethodId::RegInvChisq: {
      const auto& prior = reg_invchisq();
      const auto& t = trend();
      each([&](const UnitSummary& u, bool*) { return p_limma_param(u, prior, nu, t.eval(u.m).xi2_hat); });
      break;
    }
    case MethodId::RegNpmle: {
      const auto& prior = reg_npmle().prior;
      const auto& t = trend();
      each([&](const UnitSummary& u, bool* f) {
        return p_partially_bayes_1d(u, prior, nu, t.eval(u.m).xi2_hat, f);
      });
      break;
    }
    case MethodId::JointNpmle: {
      const JointPValue eval(joint_npmle());
      each([&](const UnitSummary& u, bool* f) { return eval(u, nu, f); });
      break;
    }
    case MethodId::DiscreteJoint: {
      const auto& priors = discrete_priors();
      each([&](const UnitSummary& u, bool* f) { return p_discrete_joint(u, priors, nu, f); });
      break;
    }
    case MethodId::Map: {
      // The trend tracks E[log S^2]; MAP needs it back on the variance scale.
      const TrendFit t = trend().shifted(-log_variance_bias(units.front().df));
      each([&](const UnitSummary& u, bool*) { return p_map(u, t, nu); });
      break;
    }
    case MethodId::Manorm2: {
      auto res = p_manorm2(input_.groups, input_.k_a, input_.k_b);
      out.p = std::move(res.p);
      break;
    }
    case MethodId::Oracle:
      break;
  }
  for (char f : flags) out.flagged += f != 0;
  if (out.flagged)
    warnings_.push_back(std::string(method_name(method)) + ": " + std::to_string(out.flagged) +
                        " units used the underflow fallback");
  return out;
}

}  // namespace ebtrend
