#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ebtrend/multiplicity.hpp"
#include "ebtrend/pipeline.hpp"
#include "ebtrend/priors.hpp"
#include "ebtrend/pvalues.hpp"
#include "ebtrend/rng.hpp"

namespace ebtrend {

/// Residual variance prior G.
struct PriorSpec {
  enum class Kind { Dirac, ScaledInvChisq, TwoPoint };
  Kind kind = Kind::Dirac;
  double v1 = 1.0;     ///< Dirac location, or first two-point atom
  double v2 = 1.0;     ///< second two-point atom
  double w = 1.0;      ///< mass on v1
  double df = 10.0;    ///< scaled inverse chi2: tau2 = scale / chi2_df
  double scale = 10.0;

  static PriorSpec dirac(double v) { return {Kind::Dirac, v, v, 1.0, 0.0, 0.0}; }
  static PriorSpec two_point(double a, double b, double w) { return {Kind::TwoPoint, a, b, w, 0.0, 0.0}; }
  static PriorSpec scaled_invchisq(double df, double scale) {
    return {Kind::ScaledInvChisq, 0.0, 0.0, 0.0, df, scale};
  }

  double sample(CounterRng& rng) const;
  /// Exact atoms for discrete kinds; `nodes` log-spaced quadrature atoms otherwise.
  DiscretePrior1D discretize(int nodes = 200) const;
};

/// Log-variance trend m(mu).
struct TrendSpec {
  enum class Kind { Constant, Logistic };
  Kind kind = Kind::Constant;
  double c = 0.0;
  double amplitude = 0.0;
  double center = 0.0;
  double width = 1.0;
  double offset = 0.0;

  static TrendSpec constant(double value) { return {Kind::Constant, value, 0, 0, 1, 0}; }
  /// amplitude * logistic((mu - center) / width) + offset
  static TrendSpec logistic(double amplitude, double center, double width, double offset) {
    return {Kind::Logistic, 0.0, amplitude, center, width, offset};
  }

  double operator()(double mu) const;
};

struct SimConfig {
  int n = 10000;
  int n0 = 9000;
  int k_a = 3;
  int k_b = 3;
  PriorSpec prior_g = PriorSpec::two_point(1.0, 10.0, 0.5);
  TrendSpec trend_m = TrendSpec::constant(0.0);
  double mu_mean = 20.0;
  double mu_sd = 1.7320508075688772;
  double theta_scale = 16.0;
  SideMode side = SideMode::AverageIntensity;  ///< AverageIntensity or External (M = mu)
  double alpha = 0.05;
  int reps = 20;
  std::uint64_t seed = 1;

  /// Throws InputError when the invariants fail.
  void validate() const;
};

/// Named configurations "setting1" .. "setting4". Throws InputError for unknown names.
SimConfig sim_preset(std::string_view name);
std::vector<std::string> sim_preset_names();

/// JSON with optional "preset" base and field overrides; ParseError on bad input.
SimConfig sim_config_from_json(const std::string& text);
std::string sim_config_to_json(const SimConfig& cfg);

struct SimTruth {
  std::vector<double> theta;
  std::vector<double> mu;
  std::vector<double> sigma2;
  std::vector<bool> is_null;
};

struct SimDataset {
  Eigen::MatrixXd y;  ///< n x (k_a + k_b), group A columns first
  SimTruth truth;
  int k_a = 0;
  int k_b = 0;
};

/// Deterministic in (cfg.seed, rep): unit i draws from CounterRng(seed ^ rep, i).
/// The first n0 units are null. Group means are mu + theta k_b / K and
/// mu - theta k_a / K, so the grand mean is mu and theta is the A - B difference.
SimDataset gen_setting(const SimConfig& cfg, std::uint64_t rep, unsigned threads = 1);

/// Unit summaries for the (1, -1) contrast under cfg.side.
AnalysisInput sim_analysis_input(const SimDataset& ds, const SimConfig& cfg, unsigned threads = 1);

/// Oracle p-values from the true prior and trend.
std::vector<double> oracle_pvalues(const AnalysisInput& input, const SimConfig& cfg,
                                   std::span<const double> true_mu, unsigned threads = 1);

struct MethodMetrics {
  MethodId method = MethodId::TTest;
  enum class Status { Ok, Skipped, Failed } status = Status::Ok;
  std::string note;
  ErrorMetrics metrics;
};

std::vector<MethodMetrics> run_methods(const SimDataset& ds, const SimConfig& cfg,
                                       std::span<const MethodId> methods,
                                       const AnalysisOptions& options = {});

struct SummaryRow {
  MethodId method = MethodId::TTest;
  int reps = 0;     ///< replicates that produced metrics
  double fdr = 0.0;
  double fdr_se = 0.0;
  double power = 0.0;
  double power_se = 0.0;
  std::string note;  ///< skip / failure reason when reps == 0
};

struct MonteCarloResult {
  std::vector<SummaryRow> summary;
  std::vector<std::vector<MethodMetrics>> replicates;
};

/// Replicates run `rep_threads` at a time; inner work uses options.threads.
MonteCarloResult monte_carlo(const SimConfig& cfg, std::span<const MethodId> methods,
                             const AnalysisOptions& options = {}, unsigned rep_threads = 1);

/// method, fdr, fdr_se, power, power_se (and note).
void write_summary_tsv(std::ostream& out, const MonteCarloResult& result);
void write_replicates_tsv(std::ostream& out, const MonteCarloResult& result);

}  // namespace ebtrend
