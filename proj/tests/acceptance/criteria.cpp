#include "criteria.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "ebtrend/linmodel.hpp"
#include "ebtrend/multiplicity.hpp"
#include "ebtrend/npmle.hpp"
#include "ebtrend/pipeline.hpp"
#include "ebtrend/priorfit.hpp"
#include "ebtrend/pvalues.hpp"
#include "ebtrend/simharness.hpp"
#include "ebtrend/special.hpp"
#include "ebtrend/table_io.hpp"
#include "ebtrend_cli/cli.hpp"
#include "oracles.hpp"

namespace ebtrend::acceptance {

namespace {

// Collects named checks and renders them as one detail string.
class Checks {
 public:
  void expect(bool ok, const std::string& what, double value) {
    std::ostringstream s;
    s << std::setprecision(4) << what << '=' << value;
    items_.push_back((ok ? "" : "!") + s.str());
    pass_ = pass_ && ok;
  }
  void expect(bool ok, const std::string& what) {
    items_.push_back((ok ? "" : "!") + what);
    pass_ = pass_ && ok;
  }
  Outcome outcome() const {
    std::string detail;
    for (const auto& item : items_) detail += (detail.empty() ? "" : " ") + item;
    return {pass_, detail};
  }

 private:
  bool pass_ = true;
  std::vector<std::string> items_;
};

UnitSummary unit(double z, double s2, int df, double a = 0.0) {
  UnitSummary u;
  u.z = z;
  u.s2 = s2;
  u.df = df;
  u.a = u.m = a;
  return u;
}

double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = double(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    d = std::max({d, double(i + 1) / n - p[i], p[i] - double(i) / n});
  return d;
}

// Largest KS distance over the ten deciles of `key`.
double stratified_ks(const std::vector<double>& p, const std::vector<double>& key) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  double worst = 0.0;
  for (int s = 0; s < 10; ++s) {
    std::vector<double> part;
    for (std::size_t j = order.size() * s / 10; j < order.size() * (s + 1) / 10; ++j)
      part.push_back(p[order[j]]);
    worst = std::max(worst, ks_uniform(std::move(part)));
  }
  return worst;
}

Outcome oracle_uniformity() {
  Checks c;
  const int n = 20000;
  const double marginal_bound = 1.5 / std::sqrt(double(n));
  const double strata_bound = 4.0 / std::sqrt(n / 10.0);

  // External side information with a steep trend and a two-point G.
  SimConfig one = sim_preset("setting4");
  one.prior_g = PriorSpec::two_point(1.0, 10.0, 0.5);
  one.n = one.n0 = n;
  one.seed = 101;
  {
    const auto ds = gen_setting(one, 0);
    const auto input = sim_analysis_input(ds, one);
    const auto p = oracle_pvalues(input, one, ds.truth.mu);
    std::vector<double> s2;
    for (const auto& u : input.units) s2.push_back(u.s2);
    const double d = ks_uniform(p), ds2 = stratified_ks(p, s2);
    c.expect(d <= marginal_bound, "ks1d", d);
    c.expect(ds2 <= strata_bound, "ks1d|S2", ds2);
  }

  // Average intensity: H is the normal mean law crossed with G under the trend.
  SimConfig two = sim_preset("setting3");
  two.prior_g = PriorSpec::two_point(1.0, 10.0, 0.5);
  two.n = two.n0 = n;
  two.seed = 202;
  {
    const auto ds = gen_setting(two, 0);
    const auto input = sim_analysis_input(ds, two);
    const auto p = oracle_pvalues(input, two, ds.truth.mu);
    std::vector<double> s2, a;
    for (const auto& u : input.units) {
      s2.push_back(u.s2);
      a.push_back(u.a);
    }
    const double d = ks_uniform(p), ds2 = stratified_ks(p, s2), da = stratified_ks(p, a);
    c.expect(d <= marginal_bound, "ks2d", d);
    c.expect(ds2 <= strata_bound, "ks2d|S2", ds2);
    c.expect(da <= strata_bound, "ks2d|A", da);
  }
  return c.outcome();
}

Outcome tweedie_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ud(-1.5, 1.5), zd(0.0, 6.0), sd(0.05, 8.0), nud(0.3, 3.0);
  double worst_1d = 0.0, worst_2d = 0.0;
  for (int prior = 0; prior < 5; ++prior) {
    DiscretePrior1D g;
    DiscretePrior2D h;
    const int atoms = 2 + prior;
    double total = 0.0;
    for (int k = 0; k < atoms; ++k) {
      g.support.push_back(std::exp(ud(rng) + k));
      g.weights.push_back(std::exp(ud(rng)));
      h.atoms.push_back({2.0 * ud(rng), std::exp(ud(rng) + k)});
      h.weights.push_back(g.weights.back());
      total += g.weights.back();
    }
    for (double& w : g.weights) w /= total;
    for (double& w : h.weights) w /= total;
    for (int i = 0; i < 100; ++i) {
      const int df = 2 + 2 * (i % 4);
      const double nu = nud(rng), xi2 = std::exp(ud(rng));
      const auto u = unit(zd(rng), sd(rng), df, 2.0 * ud(rng));
      worst_1d = std::max(worst_1d, std::abs(tweedie_reg(u, g, xi2, nu) - p_partially_bayes_1d(u, g, nu, xi2)));
      worst_2d = std::max(worst_2d, std::abs(tweedie_joint(u, h, nu, df + 2) - p_joint(u, h, nu, df + 2)));
    }
  }
  Checks c;
  c.expect(worst_1d <= 1e-6, "max|1d|", worst_1d);
  c.expect(worst_2d <= 1e-6, "max|2d|", worst_2d);
  return c.outcome();
}

Outcome closed_forms() {
  Checks c;
  {
    const double kappa0 = 6.0, s0 = 1.5, nu = 1.2;
    const auto g200 = oracle::discretize_invchisq(kappa0, s0, 200);
    const auto g400 = oracle::discretize_invchisq(kappa0, s0, 400);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> zd(0, 5), sd(0.1, 4);
    double e200 = 0.0, e400 = 0.0;
    for (int t = 0; t < 100; ++t) {
      const auto u = unit(zd(rng), sd(rng), 2 + 2 * (t % 3));
      const double ref = p_limma_param(u, {kappa0, s0}, nu);
      e200 = std::max(e200, std::abs(p_partially_bayes_1d(u, g200, nu) - ref));
      e400 = std::max(e400, std::abs(p_partially_bayes_1d(u, g400, nu) - ref));
    }
    c.expect(e200 <= 5e-3, "invchisq200", e200);
    c.expect(e400 <= 0.5 * e200, "invchisq400", e400);
  }
  {
    const double a0 = 1.0, b0 = 0.5, kappa0 = 5.0, s0 = 2.0;
    const int K = 6;
    const auto h = oracle::discretize_conjugate(a0, b0, kappa0, s0, 200);
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> zd(0, 6), sd(0.2, 5), ad(-2, 4);
    double e = 0.0;
    for (int t = 0; t < 50; ++t) {
      const auto u = unit(zd(rng), sd(rng), 4, ad(rng));
      e = std::max(e, std::abs(p_joint(u, h, 1.0, K) - oracle::conjugate_pvalue(u, 1.0, K, a0, b0, kappa0, s0)));
    }
    c.expect(e <= 5e-3, "conjugate", e);
  }
  return c.outcome();
}

struct McTable {
  MonteCarloResult result;
  const SummaryRow* row(MethodId m) const {
    for (const auto& r : result.summary)
      if (r.method == m && r.reps > 0) return &r;
    return nullptr;
  }
};

McTable run_setting(const std::string& preset, const std::vector<MethodId>& methods) {
  SimConfig cfg = sim_preset(preset);
  cfg.reps = monte_carlo_reps();
  return {monte_carlo(cfg, methods)};
}

std::string label(MethodId m, const char* what) { return std::string(method_name(m)) + "." + what; }

// FDR and power of one method, failing the criterion when it produced nothing.
std::optional<SummaryRow> need(const McTable& t, MethodId m, Checks& c) {
  if (const auto* r = t.row(m)) return *r;
  c.expect(false, std::string(method_name(m)) + ".missing");
  return std::nullopt;
}

void fdr_at_most(const McTable& t, MethodId m, double bound, Checks& c) {
  if (auto r = need(t, m, c)) c.expect(r->fdr <= bound, label(m, "fdr"), r->fdr);
}

void fdr_at_least(const McTable& t, MethodId m, double bound, Checks& c) {
  if (auto r = need(t, m, c)) c.expect(r->fdr >= bound, label(m, "fdr"), r->fdr);
}

Outcome setting_one() {
  using M = MethodId;
  const auto t = run_setting("setting1", {M::TTest, M::UntrendedNpmle, M::RegNpmle, M::JointNpmle, M::Map,
                                          M::Oracle});
  Checks c;
  for (M m : {M::Oracle, M::RegNpmle, M::JointNpmle, M::UntrendedNpmle}) fdr_at_most(t, m, 0.065, c);
  fdr_at_least(t, M::Map, 0.30, c);
  const auto joint = need(t, M::JointNpmle, c), ttest = need(t, M::TTest, c);
  if (joint && ttest) {
    c.expect(joint->power >= ttest->power + 0.15, label(M::JointNpmle, "power"), joint->power);
    c.expect(true, label(M::TTest, "power"), ttest->power);
  }
  return c.outcome();
}

Outcome setting_three() {
  using M = MethodId;
  const auto t = run_setting("setting3", {M::TTest, M::RegNpmle, M::JointNpmle, M::Map, M::Manorm2});
  Checks c;
  fdr_at_least(t, M::Manorm2, 0.08, c);
  fdr_at_least(t, M::Map, 0.20, c);
  fdr_at_most(t, M::RegNpmle, 0.065, c);
  fdr_at_most(t, M::JointNpmle, 0.065, c);
  const auto joint = need(t, M::JointNpmle, c), ttest = need(t, M::TTest, c);
  if (joint && ttest) {
    c.expect(joint->power >= ttest->power, label(M::JointNpmle, "power"), joint->power);
    c.expect(true, label(M::TTest, "power"), ttest->power);
  }
  return c.outcome();
}

Outcome setting_four() {
  using M = MethodId;
  const std::vector<M> methods(kAllMethods.begin(), kAllMethods.end());
  const auto t = run_setting("setting4", methods);
  Checks c;
  const auto reg = need(t, M::RegNpmle, c), oracle = need(t, M::Oracle, c), untr = need(t, M::UntrendedNpmle, c);
  if (reg && oracle) c.expect(std::abs(reg->power - oracle->power) <= 0.02, "|reg-oracle|.power",
                              std::abs(reg->power - oracle->power));
  if (reg && untr) c.expect(reg->power >= untr->power + 0.08, "reg-untrended.power", reg->power - untr->power);
  int feasible = 0;
  for (const auto& r : t.result.summary) {
    if (r.reps == 0) continue;
    ++feasible;
    if (r.fdr > 0.065) c.expect(false, label(r.method, "fdr"), r.fdr);
  }
  c.expect(feasible > 0, "feasible", feasible);
  return c.outcome();
}

LogLikMatrix chisq_problem(std::mt19937_64& rng, int n, const std::vector<double>& grid, int df,
                           const std::vector<double>& atoms, const std::vector<double>& probs) {
  std::chi_squared_distribution<double> chi(df);
  std::discrete_distribution<int> pick(probs.begin(), probs.end());
  LogLikMatrix l(n, Eigen::Index(grid.size()));
  for (int i = 0; i < n; ++i) {
    const double v = atoms[std::size_t(pick(rng))] * chi(rng) / df;
    for (std::size_t k = 0; k < grid.size(); ++k) l(i, Eigen::Index(k)) = stats::log_scaled_chisq_density(v, df, grid[k]);
  }
  return l;
}

std::vector<double> log_grid(double lo, double hi, int m) {
  std::vector<double> g;
  for (int k = 0; k < m; ++k) g.push_back(lo * std::pow(hi / lo, k / double(m - 1)));
  return g;
}

Outcome npmle_quality() {
  Checks c;
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  int drops = 0, unconverged = 0;
  double worst_kkt = 0.0, worst_active = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto grid = log_grid(0.02, 100.0, 40 + t % 40);
    const int df = 2 + t % 7;
    std::vector<double> atoms, probs;
    for (int k = 0; k < 1 + t % 4; ++k) {
      atoms.push_back(std::exp(6.0 * ud(rng) - 2.0));
      probs.push_back(0.1 + ud(rng));
    }
    const auto l = chisq_problem(rng, 300 + 50 * (t % 10), grid, df, atoms, probs);
    for (bool accelerate : {false, true}) {
      EmOptions o;
      o.accelerate = accelerate;
      o.record_trace = true;
      o.max_iter = accelerate ? 5000 : 2000;
      const auto r = npmle_em(l, {}, o);
      for (std::size_t k = 1; k < r.trace.size(); ++k)
        if (r.trace[k] < r.trace[k - 1] - 1e-12 * std::max(1.0, std::abs(r.trace[k - 1]))) ++drops;
      if (!accelerate) continue;
      if (!r.converged) ++unconverged;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        worst_kkt = std::max(worst_kkt, r.gradient[k] - 1.0);
        if (r.weights[k] > 1e-6) worst_active = std::max(worst_active, std::abs(r.gradient[k] - 1.0));
      }
    }
  }
  c.expect(drops == 0, "decreases", drops);
  c.expect(unconverged == 0, "unconverged", unconverged);
  c.expect(worst_kkt <= 1e-4, "kkt", worst_kkt);
  c.expect(worst_active <= 1e-3, "active", worst_active);

  std::vector<double> grid = log_grid(0.1, 100.0, 31);
  grid[10] = 1.0;
  grid[20] = 10.0;
  const auto l = chisq_problem(rng, 5000, grid, 12, {1.0, 10.0}, {0.3, 0.7});
  const auto r = npmle_em(l);
  double low = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (grid[k] < 3.0) low += r.weights[k];
  c.expect(std::abs(low - 0.3) <= 0.05, "two_atom_low", low);
  return c.outcome();
}

Outcome moment_recovery() {
  Checks c;
  std::mt19937_64 rng(81);
  std::chi_squared_distribution<double> prior_chi(10.0), chi(4.0);
  std::vector<double> s2;
  for (int i = 0; i < 100000; ++i) s2.push_back(10.0 / prior_chi(rng) * chi(rng) / 4.0);
  const auto p = fit_invchisq_untrended(s2, 4);
  c.expect(p.kappa0 >= 8.0 && p.kappa0 <= 12.0, "kappa0", p.kappa0);
  c.expect(p.s0_sq >= 0.9 && p.s0_sq <= 1.1, "s0_sq", p.s0_sq);
  double worst = 0.0;
  for (int k = 0; k <= 700; ++k) {
    const double y = std::pow(10.0, -4.0 + k * 0.01);
    worst = std::max(worst, std::abs(stats::trigamma(stats::trigamma_inverse(y)) - y) / y);
  }
  c.expect(worst <= 1e-8, "trigamma_inverse", worst);
  return c.outcome();
}

Outcome bh_correctness() {
  Checks c;
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> ud;
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 1 + int(rng() % 80);
    std::vector<double> p(std::size_t(n), 0.0);
    for (double& v : p) v = ud(rng) < 0.3 ? std::pow(ud(rng), 6) : ud(rng);
    if (t % 5 == 0) p[0] = p[std::size_t(n - 1)];
    const double alpha = 0.01 + 0.2 * ud(rng);
    // Step-up by definition: the largest j with P_(j) <= j alpha / n.
    std::vector<double> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::size_t j_hat = 0;
    for (std::size_t j = 1; j <= sorted.size(); ++j)
      if (sorted[j - 1] <= double(j) * alpha / n) j_hat = j;
    const auto r = bh_reject(p, alpha);
    bool same = r.j_hat == j_hat;
    for (std::size_t i = 0; i < p.size(); ++i)
      same = same && r.rejected[i] == (j_hat > 0 && p[i] <= sorted[j_hat - 1]);
    mismatches += !same;
  }
  c.expect(mismatches == 0, "mismatches", mismatches);

  const int reps = 200, n = 10000, n0 = 9000;
  const double alpha = 0.05;
  std::normal_distribution<double> nd;
  std::vector<double> fdp;
  std::vector<bool> is_null(n, false);
  std::fill(is_null.begin(), is_null.begin() + n0, true);
  for (int r = 0; r < reps; ++r) {
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) p[std::size_t(i)] = i < n0 ? ud(rng) : stats::normal_two_sided(3.0 + nd(rng));
    fdp.push_back(error_metrics(bh_reject(p, alpha), is_null).fdp);
  }
  const double mean = std::accumulate(fdp.begin(), fdp.end(), 0.0) / reps;
  double ss = 0.0;
  for (double v : fdp) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (reps - 1) / reps);
  c.expect(mean <= alpha + 2.0 * se, "fdr", mean);
  c.expect(true, "se", se);
  return c.outcome();
}

Outcome design_checks() {
  Checks c;
  double worst = 0.0;
  bool all_ok = true;
  for (int ka = 1; ka <= 10; ++ka)
    for (int kb = 1; kb <= 10; ++kb) {
      if (ka + kb <= 2) continue;
      const Design d = two_group_design(ka, kb);
      const auto r = check_orthogonality(d, make_contrast(d, Eigen::Vector2d(1, -1)), intensity_contrast(d));
      worst = std::max(worst, std::abs(r.value));
      all_ok = all_ok && r.ok;
    }
  c.expect(all_ok && worst <= 1e-12, "two_group", worst);

  // Intercept, treatment indicator and a control covariate.
  std::mt19937_64 rng(101);
  std::normal_distribution<double> nd;
  worst = 0.0;
  all_ok = true;
  for (int k = 4; k <= 20; ++k) {
    Eigen::MatrixXd x(k, 3);
    for (int j = 0; j < k; ++j) x.row(j) << 1.0, j % 2, nd(rng);
    const Design d(x);
    const auto r = check_orthogonality(d, make_contrast(d, Eigen::Vector3d(0, 1, 0)), intensity_contrast(d));
    worst = std::max(worst, std::abs(r.value));
    all_ok = all_ok && r.ok;
  }
  c.expect(all_ok && worst <= 1e-12, "treatment", worst);

  const Design d = two_group_design(2, 10);
  const auto r = check_orthogonality(d, make_contrast(d, Eigen::Vector2d(1, -1)), manorm_contrast(d));
  c.expect(std::abs(r.value - 0.2) <= 1e-12 && !r.ok, "manorm_2_10", r.value);
  return c.outcome();
}

namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "ebtrend");
  std::ostringstream out, err;
  return cli::run_cli(args, out, err);
}

// Runs one command per thread count and compares every file it wrote.
void same_outputs(const fs::path& root, const std::string& name, std::vector<std::string> args, Checks& c) {
  std::vector<fs::path> dirs;
  for (const char* threads : {"1", "3"}) {
    const fs::path dir = root / (name + "_t" + threads);
    auto full = args;
    full.insert(full.end(), {"--threads", threads, "--out", dir.string()});
    if (run(full) != 0) {
      c.expect(false, name + ".exit");
      return;
    }
    dirs.push_back(dir);
  }
  std::size_t files = 0;
  bool same = true;
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    const auto other = dirs[1] / entry.path().filename();
    same = same && fs::exists(other) && slurp(entry.path()) == slurp(other);
    ++files;
  }
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(dirs[1])) --files;
  c.expect(same && files == 0, name);
}

Outcome determinism() {
  Checks c;
  const fs::path root = fs::temp_directory_path() / "ebtrend_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);

  SimConfig cfg = sim_preset("setting2");
  cfg.n = 1500;
  cfg.n0 = 1350;
  const auto ds = gen_setting(cfg, 0);
  const fs::path matrix = root / "matrix.csv";
  {
    std::ofstream out(matrix);
    out << "unit";
    for (Eigen::Index j = 0; j < ds.y.cols(); ++j) out << ",s" << j;
    out << '\n';
    for (Eigen::Index i = 0; i < ds.y.rows(); ++i) {
      out << 'u' << i;
      for (Eigen::Index j = 0; j < ds.y.cols(); ++j) out << ',' << format_double(ds.y(i, j));
      out << '\n';
    }
  }
  const std::string groups = std::to_string(ds.k_a) + "," + std::to_string(ds.k_b);
  same_outputs(root, "analyze",
               {"analyze", "--matrix", matrix.string(), "--groups", groups, "--seed", "5", "--methods",
                "ttest,untrended_invchisq,untrended_npmle,reg_invchisq,reg_npmle,joint_npmle,map"},
               c);
  same_outputs(root, "diagnose", {"diagnose", "--matrix", matrix.string(), "--groups", groups}, c);
  same_outputs(root, "simulate",
               {"simulate", "--preset", "setting4", "--reps", "3", "--n", "2000", "--seed", "9"}, c);
  fs::remove_all(root);
  return c.outcome();
}

}  // namespace

int monte_carlo_reps() {
  if (const char* env = std::getenv("EBTREND_ACCEPT_REPS")) {
    const int reps = std::atoi(env);
    if (reps > 0) return reps;
  }
  return 20;
}

std::vector<Criterion> all_criteria() {
  return {
      {1, "oracle conditional uniformity", oracle_uniformity},
      {2, "tweedie equivalence", tweedie_equivalence},
      {3, "closed-form oracles", closed_forms},
      {4, "simulation setting 1", setting_one},
      {5, "simulation setting 3", setting_three},
      {6, "simulation setting 4", setting_four},
      {7, "npmle solver quality", npmle_quality},
      {8, "method-of-moments recovery", moment_recovery},
      {9, "bh correctness", bh_correctness},
      {10, "design checks", design_checks},
      {11, "determinism", determinism},
  };
}

}  // namespace ebtrend::acceptance
