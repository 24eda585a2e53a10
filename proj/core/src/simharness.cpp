#include "ebtrend/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <boost/math/distributions/inverse_chi_squared.hpp>
#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include "json.hpp"

#include "ebtrend/errors.hpp"
#include "ebtrend/parallel.hpp"
#include "ebtrend/special.hpp"
#include "ebtrend/table_io.hpp"

namespace ebtrend {

double PriorSpec::sample(CounterRng& rng) const {
  switch (kind) {
    case Kind::Dirac:
      return v1;
    case Kind::TwoPoint:
      return boost::random::uniform_01<double>()(rng) < w ? v1 : v2;
    case Kind::ScaledInvChisq:
      return scale / boost::random::chi_squared_distribution<double>(df)(rng);
  }
  return v1;
}

DiscretePrior1D PriorSpec::discretize(int nodes) const {
  switch (kind) {
    case Kind::Dirac:
      return DiscretePrior1D::point_mass(v1);
    case Kind::TwoPoint: {
      if (v1 == v2 || w >= 1.0) return DiscretePrior1D::point_mass(v1);
      if (w <= 0.0) return DiscretePrior1D::point_mass(v2);
      if (v1 < v2) return {{v1, v2}, {w, 1.0 - w}};
      return {{v2, v1}, {1.0 - w, w}};
    }
    case Kind::ScaledInvChisq: {
      // tau2 = scale / chi2_df is scaled inverse chi2 with scale parameter scale / df.
      const boost::math::inverse_chi_squared_distribution<double> dist(df, scale / df);
      const double lo = std::log(boost::math::quantile(dist, 1e-10));
      const double hi = std::log(boost::math::quantile(dist, 1.0 - 1e-10));
      DiscretePrior1D prior;
      double total = 0.0;
      for (int k = 0; k < nodes; ++k) {
        const double t = std::exp(lo + (hi - lo) * k / (nodes - 1));
        // Log-spaced nodes carry the Jacobian t.
        const double w_k = boost::math::pdf(dist, t) * t;
        prior.support.push_back(t);
        prior.weights.push_back(w_k);
        total += w_k;
      }
      for (double& v : prior.weights) v /= total;
      return prior;
    }
  }
  return DiscretePrior1D::point_mass(1.0);
}

double TrendSpec::operator()(double mu) const {
  if (kind == Kind::Constant) return c;
  return amplitude / (1.0 + std::exp(-(mu - center) / width)) + offset;
}

void SimConfig::validate() const {
  if (n < 1 || n0 < 0 || n0 > n) throw InputError("simulation needs 0 <= n0 <= n and n >= 1");
  if (k_a < 1 || k_b < 1 || k_a + k_b <= 2) throw InputError("simulation needs k_a, k_b >= 1 and k_a + k_b > 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (reps < 1) throw InputError("reps must be at least 1");
  if (!(mu_sd >= 0.0) || !(theta_scale >= 0.0)) throw InputError("mu_sd and theta_scale must be non-negative");
  if (side != SideMode::AverageIntensity && side != SideMode::External)
    throw InputError("simulation side mode must be average_intensity or external_mu");
  switch (prior_g.kind) {
    case PriorSpec::Kind::Dirac:
      if (!(prior_g.v1 > 0.0)) throw InputError("dirac prior needs a positive value");
      break;
    case PriorSpec::Kind::TwoPoint:
      if (!(prior_g.v1 > 0.0 && prior_g.v2 > 0.0 && prior_g.w >= 0.0 && prior_g.w <= 1.0))
        throw InputError("two-point prior needs positive atoms and w in [0, 1]");
      break;
    case PriorSpec::Kind::ScaledInvChisq:
      if (!(prior_g.df > 0.0 && prior_g.scale > 0.0))
        throw InputError("scaled inverse chi2 prior needs positive df and scale");
      break;
  }
  if (trend_m.kind == TrendSpec::Kind::Logistic && !(trend_m.width > 0.0))
    throw InputError("logistic trend needs a positive width");
}

SimConfig sim_preset(std::string_view name) {
  SimConfig cfg;
  const auto steep = TrendSpec::logistic(-6.0, 20.0, 0.15, 0.0);
  if (name == "setting1") return cfg;
  if (name == "setting2") {
    cfg.trend_m = TrendSpec::logistic(-4.0, 16.0, 4.0, 12.0);
    return cfg;
  }
  if (name == "setting3") {
    cfg.k_a = 2;
    cfg.k_b = 10;
    cfg.prior_g = PriorSpec::scaled_invchisq(10.0, 10.0);
    cfg.trend_m = steep;
    cfg.mu_sd = std::sqrt(0.2);
    return cfg;
  }
  if (name == "setting4") {
    cfg.k_a = 3;
    cfg.k_b = 5;
    cfg.prior_g = PriorSpec::dirac(1.0);
    cfg.trend_m = steep;
    cfg.mu_sd = std::sqrt(0.2);
    cfg.side = SideMode::External;
    return cfg;
  }
  throw InputError("unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> sim_preset_names() { return {"setting1", "setting2", "setting3", "setting4"}; }

namespace {

using nlohmann::json;

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

SimConfig sim_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("simulation config must be a JSON object");
  try {
    SimConfig cfg = j.contains("preset") ? sim_preset(j.at("preset").get<std::string>()) : SimConfig{};
    take(j, "n", cfg.n);
    take(j, "n0", cfg.n0);
    take(j, "k_a", cfg.k_a);
    take(j, "k_b", cfg.k_b);
    take(j, "theta_scale", cfg.theta_scale);
    take(j, "alpha", cfg.alpha);
    take(j, "reps", cfg.reps);
    take(j, "seed", cfg.seed);
    if (j.contains("mu_dist")) {
      const auto& m = j.at("mu_dist");
      take(m, "mean", cfg.mu_mean);
      take(m, "sd", cfg.mu_sd);
    }
    if (j.contains("side_mode")) {
      const auto s = j.at("side_mode").get<std::string>();
      if (s == "average_intensity") cfg.side = SideMode::AverageIntensity;
      else if (s == "external_mu") cfg.side = SideMode::External;
      else throw ParseError("side_mode must be average_intensity or external_mu");
    }
    if (j.contains("prior_g")) {
      const auto& g = j.at("prior_g");
      const auto type = g.at("type").get<std::string>();
      if (type == "dirac") cfg.prior_g = PriorSpec::dirac(g.at("value").get<double>());
      else if (type == "two_point")
        cfg.prior_g = PriorSpec::two_point(g.at("v1").get<double>(), g.at("v2").get<double>(),
                                           g.at("w").get<double>());
      else if (type == "scaled_invchisq")
        cfg.prior_g = PriorSpec::scaled_invchisq(g.at("df").get<double>(), g.at("scale").get<double>());
      else throw ParseError("unknown prior_g type '" + type + "'");
    }
    if (j.contains("trend_m")) {
      const auto& t = j.at("trend_m");
      const auto type = t.at("type").get<std::string>();
      if (type == "constant") cfg.trend_m = TrendSpec::constant(t.value("c", 0.0));
      else if (type == "logistic")
        cfg.trend_m = TrendSpec::logistic(t.at("amplitude").get<double>(), t.at("center").get<double>(),
                                          t.at("width").get<double>(), t.value("offset", 0.0));
      else throw ParseError("unknown trend_m type '" + type + "'");
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad simulation config: ") + e.what());
  } catch (const InputError& e) {
    throw ParseError(std::string("bad simulation config: ") + e.what());
  }
}

std::string sim_config_to_json(const SimConfig& cfg) {
  json j;
  j["n"] = cfg.n;
  j["n0"] = cfg.n0;
  j["k_a"] = cfg.k_a;
  j["k_b"] = cfg.k_b;
  j["theta_scale"] = cfg.theta_scale;
  j["alpha"] = cfg.alpha;
  j["reps"] = cfg.reps;
  j["seed"] = cfg.seed;
  j["mu_dist"] = {{"mean", cfg.mu_mean}, {"sd", cfg.mu_sd}};
  j["side_mode"] = cfg.side == SideMode::External ? "external_mu" : "average_intensity";
  const auto& g = cfg.prior_g;
  switch (g.kind) {
    case PriorSpec::Kind::Dirac: j["prior_g"] = {{"type", "dirac"}, {"value", g.v1}}; break;
    case PriorSpec::Kind::TwoPoint:
      j["prior_g"] = {{"type", "two_point"}, {"v1", g.v1}, {"v2", g.v2}, {"w", g.w}};
      break;
    case PriorSpec::Kind::ScaledInvChisq:
      j["prior_g"] = {{"type", "scaled_invchisq"}, {"df", g.df}, {"scale", g.scale}};
      break;
  }
  const auto& t = cfg.trend_m;
  if (t.kind == TrendSpec::Kind::Constant) j["trend_m"] = {{"type", "constant"}, {"c", t.c}};
  else
    j["trend_m"] = {{"type", "logistic"}, {"amplitude", t.amplitude}, {"center", t.center},
                    {"width", t.width}, {"offset", t.offset}};
  return j.dump(2);
}

SimDataset gen_setting(const SimConfig& cfg, std::uint64_t rep, unsigned threads) {
  cfg.validate();
  const int K = cfg.k_a + cfg.k_b;
  SimDataset ds;
  ds.k_a = cfg.k_a;
  ds.k_b = cfg.k_b;
  ds.y.resize(cfg.n, K);
  auto& t = ds.truth;
  t.theta.resize(cfg.n);
  t.mu.resize(cfg.n);
  t.sigma2.resize(cfg.n);
  t.is_null.assign(cfg.n, false);
  for (int i = 0; i < cfg.n0; ++i) t.is_null[i] = true;

  const std::uint64_t key = cfg.seed ^ rep;
  parallel_for(static_cast<std::size_t>(cfg.n), resolve_threads(threads), [&](std::size_t i) {
    CounterRng rng(key, i);
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    const double mu = cfg.mu_mean + cfg.mu_sd * normal(rng);
    const double tau2 = cfg.prior_g.sample(rng);
    const double sigma2 = std::exp(cfg.trend_m(mu)) * tau2;
    const double draw = normal(rng);
    const double theta = i < static_cast<std::size_t>(cfg.n0) ? 0.0 : std::sqrt(cfg.theta_scale * sigma2) * draw;
    const double sigma = std::sqrt(sigma2);
    const double mean_a = mu + theta * cfg.k_b / K;
    const double mean_b = mu - theta * cfg.k_a / K;
    const auto row = static_cast<Eigen::Index>(i);
    for (int j = 0; j < K; ++j) ds.y(row, j) = (j < cfg.k_a ? mean_a : mean_b) + sigma * normal(rng);
    t.theta[i] = theta;
    t.mu[i] = mu;
    t.sigma2[i] = sigma2;
  });
  return ds;
}

AnalysisInput sim_analysis_input(const SimDataset& ds, const SimConfig& cfg, unsigned threads) {
  const Design design = two_group_design(ds.k_a, ds.k_b);
  Eigen::Vector2d w(1.0, -1.0);
  const Contrast theta = make_contrast(design, w);
  AnalysisInput input;
  input.units = fit_units(ds.y, design, theta, cfg.side, ds.truth.mu, threads);
  input.nu = theta.nu;
  input.K = design.samples();
  input.side = cfg.side;
  input.k_a = ds.k_a;
  input.k_b = ds.k_b;
  if (ds.k_a >= 2 && ds.k_b >= 2) input.groups = group_stats(ds.y, ds.k_a, ds.k_b);
  return input;
}

namespace {

constexpr int kOracleMuNodes = 128;
constexpr double kOracleMuReach = 7.0;

struct OracleAtom {
  double log_w;  // log weight plus the sigma-dependent density constants
  double mu;
  double inv_2s2;
  double sigma;
};

}  // namespace

std::vector<double> oracle_pvalues(const AnalysisInput& input, const SimConfig& cfg,
                                   std::span<const double> true_mu, unsigned threads) {
  const auto& units = input.units;
  const double nu = input.nu;
  std::vector<double> p(units.size());
  const DiscretePrior1D g = cfg.prior_g.discretize();

  if (cfg.side == SideMode::External) {
    if (true_mu.size() != units.size()) throw InputError("oracle needs the true means");
    parallel_for(units.size(), resolve_threads(threads), [&](std::size_t i) {
      p[i] = p_partially_bayes_1d(units[i], g, nu, std::exp(cfg.trend_m(true_mu[i])));
    });
    return p;
  }

  // Discretized H: mu on an equally spaced grid weighted by its normal density,
  // crossed with the discretized G, sigma^2 = exp(m(mu)) tau^2.
  const int d = units.front().df;
  const int K = input.K;
  std::vector<OracleAtom> atoms;
  const int mu_nodes = cfg.mu_sd > 0.0 ? kOracleMuNodes : 1;
  std::vector<double> mu_w(mu_nodes), mu_x(mu_nodes);
  double total = 0.0;
  for (int k = 0; k < mu_nodes; ++k) {
    const double u = mu_nodes == 1 ? 0.0 : -kOracleMuReach + 2.0 * kOracleMuReach * k / (mu_nodes - 1);
    mu_x[k] = cfg.mu_mean + cfg.mu_sd * u;
    mu_w[k] = std::exp(-0.5 * u * u);
    total += mu_w[k];
  }
  for (int k = 0; k < mu_nodes; ++k) {
    const double m = std::exp(cfg.trend_m(mu_x[k]));
    for (std::size_t t = 0; t < g.support.size(); ++t) {
      const double s2 = m * g.support[t];
      const double log_w = std::log(mu_w[k] / total * g.weights[t]) + 0.5 * d * std::log(d / (2.0 * s2)) -
                           0.5 * std::log(s2);
      atoms.push_back({log_w, mu_x[k], 0.5 / s2, std::sqrt(s2)});
    }
  }

  parallel_for(units.size(), resolve_threads(threads), [&](std::size_t i) {
    const auto& u = units[i];
    if (u.z == 0.0) {
      p[i] = 1.0;
      return;
    }
    thread_local std::vector<double> lw;
    lw.resize(atoms.size());
    double top = -stats::kInf;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const auto& at = atoms[k];
      const double da = u.a - at.mu;
      lw[k] = at.log_w - (d * u.s2 + K * da * da) * at.inv_2s2;
      top = std::max(top, lw[k]);
    }
    const double zs = std::abs(u.z) / nu;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const double e = std::exp(lw[k] - top);
      if (e < 1e-300) continue;
      den += e;
      num += e * stats::normal_two_sided(zs / atoms[k].sigma);
    }
    p[i] = std::clamp(num / den, 0.0, 1.0);
  });
  return p;
}

std::vector<MethodMetrics> run_methods(const SimDataset& ds, const SimConfig& cfg,
                                       std::span<const MethodId> methods,
                                       const AnalysisOptions& options) {
  const unsigned threads = resolve_threads(options.threads);
  Analysis analysis(sim_analysis_input(ds, cfg, threads), options);
  std::vector<MethodMetrics> out;
  for (MethodId method : methods) {
    MethodMetrics mm;
    mm.method = method;
    try {
      std::vector<double> p;
      if (method == MethodId::Oracle) {
        p = oracle_pvalues(analysis.input(), cfg, ds.truth.mu, threads);
      } else if (auto reason = method_inapplicable(method, analysis.input())) {
        mm.status = MethodMetrics::Status::Skipped;
        mm.note = *reason;
        out.push_back(std::move(mm));
        continue;
      } else {
        p = analysis.pvalues(method).p;
      }
      mm.metrics = error_metrics(bh_reject(p, cfg.alpha), ds.truth.is_null);
    } catch (const std::exception& e) {
      mm.status = MethodMetrics::Status::Failed;
      mm.note = e.what();
    }
    out.push_back(std::move(mm));
  }
  return out;
}

MonteCarloResult monte_carlo(const SimConfig& cfg, std::span<const MethodId> methods,
                             const AnalysisOptions& options, unsigned rep_threads) {
  cfg.validate();
  MonteCarloResult result;
  result.replicates.resize(static_cast<std::size_t>(cfg.reps));
  const unsigned outer = std::max(1u, rep_threads);
  AnalysisOptions inner = options;
  if (outer > 1) inner.threads = 1;
  parallel_for(result.replicates.size(), outer, [&](std::size_t r) {
    const auto ds = gen_setting(cfg, r, inner.threads);
    result.replicates[r] = run_methods(ds, cfg, methods, inner);
  });

  for (std::size_t m = 0; m < methods.size(); ++m) {
    SummaryRow row;
    row.method = methods[m];
    std::vector<double> fdp, power;
    for (const auto& rep : result.replicates) {
      const auto& mm = rep[m];
      if (mm.status == MethodMetrics::Status::Ok) {
        fdp.push_back(mm.metrics.fdp);
        power.push_back(mm.metrics.power);
      } else if (row.note.empty()) {
        row.note = mm.note;
      }
    }
    row.reps = static_cast<int>(fdp.size());
    auto mean_se = [](const std::vector<double>& v, double& mean, double& se) {
      mean = 0.0;
      for (double x : v) mean += x;
      mean /= double(v.size());
      se = 0.0;
      if (v.size() < 2) return;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      se = std::sqrt(ss / double(v.size() - 1) / double(v.size()));
    };
    if (row.reps > 0) {
      mean_se(fdp, row.fdr, row.fdr_se);
      mean_se(power, row.power, row.power_se);
    }
    result.summary.push_back(row);
  }
  return result;
}

void write_summary_tsv(std::ostream& out, const MonteCarloResult& result) {
  out << "method\tfdr\tfdr_se\tpower\tpower_se\n";
  for (const auto& row : result.summary) {
    out << method_name(row.method);
    if (row.reps == 0) {
      out << "\t--\t--\t--\t--\n";
      continue;
    }
    out << '\t' << format_double(row.fdr) << '\t' << format_double(row.fdr_se) << '\t'
        << format_double(row.power) << '\t' << format_double(row.power_se) << '\n';
  }
}

void write_replicates_tsv(std::ostream& out, const MonteCarloResult& result) {
  out << "rep\tmethod\tstatus\tv\tr\tfdp\tpower\n";
  for (std::size_t r = 0; r < result.replicates.size(); ++r) {
    for (const auto& mm : result.replicates[r]) {
      out << r << '\t' << method_name(mm.method) << '\t';
      switch (mm.status) {
        case MethodMetrics::Status::Ok:
          out << "ok\t" << mm.metrics.v << '\t' << mm.metrics.r << '\t' << format_double(mm.metrics.fdp)
              << '\t' << format_double(mm.metrics.power) << '\n';
          break;
        case MethodMetrics::Status::Skipped:
          out << "skipped\t--\t--\t--\t--\n";
          break;
        case MethodMetrics::Status::Failed:
          out << "failed\t--\t--\t--\t--\n";
          break;
      }
    }
  }
}

}  // namespace ebtrend
