#include "ebtrend_cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "ebtrend/errors.hpp"
#include "ebtrend/linmodel.hpp"
#include "ebtrend/multiplicity.hpp"
#include "ebtrend/parallel.hpp"
#include "ebtrend/pipeline.hpp"
#include "ebtrend/simharness.hpp"
#include "ebtrend/table_io.hpp"
#include "commands.hpp"

namespace ebtrend::cli {

namespace {

double parse_number(const std::string& text, const std::string& what) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && *first == ' ') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    throw ParseError(what + ": '" + text + "' is not a finite number");
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) parts.push_back(item);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

std::vector<MethodId> parse_methods(const std::string& csv) {
  std::set<MethodId> chosen;
  for (const auto& name : split(csv, ',')) {
    if (name.empty()) continue;
    const auto id = parse_method(name);
    if (!id) throw ParseError("unknown method '" + name + "'");
    chosen.insert(*id);
  }
  if (chosen.empty()) throw ParseError("the method list is empty");
  // std::set orders by the enum, which is the output column order.
  return {chosen.begin(), chosen.end()};
}

ContrastSpec parse_contrast(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ParseError("contrast must look like NAME=w1,w2,...");
  ContrastSpec spec;
  spec.name = text.substr(0, eq);
  for (const auto& w : split(text.substr(eq + 1), ','))
    spec.weights.push_back(parse_number(w, "contrast weight"));
  if (spec.weights.empty()) throw ParseError("contrast has no weights");
  return spec;
}

SideSpec parse_side(const std::string& text) {
  if (text == "intensity") return {SideMode::AverageIntensity, {}};
  if (text == "manorm") return {SideMode::ManormTilde, {}};
  constexpr std::string_view prefix = "column:";
  if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size())
    return {SideMode::External, text.substr(prefix.size())};
  throw ParseError("--side must be intensity, manorm or column:NAME");
}

std::pair<int, int> parse_groups(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw ParseError("--groups must be KA,KB");
  const double a = parse_number(parts[0], "--groups");
  const double b = parse_number(parts[1], "--groups");
  if (a != std::floor(a) || b != std::floor(b) || a < 1 || b < 1)
    throw ParseError("--groups sizes must be positive integers");
  return {static_cast<int>(a), static_cast<int>(b)};
}

Design load_design(const DataArgs& args, const std::vector<std::string>& samples) {
  if (!args.design.empty() && !args.groups.empty())
    throw ParseError("give either --design or --groups, not both");
  if (!args.groups.empty()) {
    const auto [ka, kb] = parse_groups(args.groups);
    if (!samples.empty() && std::size_t(ka + kb) != samples.size())
      throw ParseError("--groups sizes add up to " + std::to_string(ka + kb) + " but the matrix has " +
                       std::to_string(samples.size()) + " samples");
    return two_group_design(ka, kb);
  }
  if (args.design.empty()) throw ParseError("--design or --groups is required");
  DesignTable table = read_design_table(args.design);
  if (samples.empty()) return Design(std::move(table.x));
  if (table.samples.empty()) {
    if (table.x.rows() != static_cast<Eigen::Index>(samples.size()))
      throw ParseError("design has " + std::to_string(table.x.rows()) + " rows but the matrix has " +
                       std::to_string(samples.size()) + " samples");
    return Design(std::move(table.x));
  }
  // Rows are matched to matrix columns by sample identifier.
  if (table.samples.size() != samples.size())
    throw ParseError("design lists " + std::to_string(table.samples.size()) +
                     " samples but the matrix has " + std::to_string(samples.size()));
  Eigen::MatrixXd x(table.x.rows(), table.x.cols());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const auto it = std::find(table.samples.begin(), table.samples.end(), samples[j]);
    if (it == table.samples.end()) throw ParseError("sample '" + samples[j] + "' is missing from the design");
    x.row(static_cast<Eigen::Index>(j)) = table.x.row(it - table.samples.begin());
  }
  return Design(std::move(x));
}

Contrast load_contrast(const DataArgs& args, const Design& design, std::string* name) {
  ContrastSpec spec;
  if (!args.contrast.empty()) {
    spec = parse_contrast(args.contrast);
  } else if (design.two_group_sizes()) {
    spec = {"A_vs_B", {1.0, -1.0}};
  } else {
    throw ParseError("--contrast is required for this design");
  }
  if (static_cast<int>(spec.weights.size()) != design.covariates())
    throw ParseError("contrast '" + spec.name + "' has " + std::to_string(spec.weights.size()) +
                     " weights but the design has " + std::to_string(design.covariates()) + " columns");
  if (name) *name = spec.name;
  return make_contrast(design, Eigen::Map<const Eigen::VectorXd>(spec.weights.data(),
                                                                  Eigen::Index(spec.weights.size())));
}

LoadedData load_data(const DataArgs& args) {
  LoadedData data;
  if (args.matrix.empty()) throw ParseError("--matrix is required");
  LabelledMatrix mat = read_labelled_matrix(args.matrix);
  const SideSpec side = parse_side(args.side);

  std::vector<double> external;
  if (side.mode == SideMode::External) {
    const auto it = std::find(mat.columns.begin(), mat.columns.end(), side.column);
    if (it == mat.columns.end()) throw ParseError("side column '" + side.column + "' is not in the matrix");
    const auto col = static_cast<Eigen::Index>(it - mat.columns.begin());
    external.assign(mat.values.col(col).data(), mat.values.col(col).data() + mat.values.rows());
    Eigen::MatrixXd rest(mat.values.rows(), mat.values.cols() - 1);
    for (Eigen::Index j = 0, k = 0; j < mat.values.cols(); ++j)
      if (j != col) rest.col(k++) = mat.values.col(j);
    mat.values = std::move(rest);
    mat.columns.erase(it);
  }
  if (mat.values.rows() == 0) throw ParseError("the matrix has no units");

  data.design.emplace(load_design(args, mat.columns));
  const Design& design = *data.design;
  data.theta = load_contrast(args, design, &data.contrast_name);
  if (side.mode == SideMode::ManormTilde && !design.two_group_sizes())
    throw DesignError("--side manorm needs a two-group indicator design");

  const unsigned threads = resolve_threads(args.threads);
  AnalysisInput& input = data.input;
  input.units = fit_units(mat.values, design, data.theta, side.mode, external, threads);
  input.nu = data.theta.nu;
  input.K = design.samples();
  input.side = side.mode;
  if (const auto sizes = design.two_group_sizes()) {
    input.k_a = sizes->first;
    input.k_b = sizes->second;
    if (input.k_a >= 2 && input.k_b >= 2) {
      // group_stats expects group A columns first.
      Eigen::MatrixXd ordered(mat.values.rows(), mat.values.cols());
      Eigen::Index next = 0;
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index j = 0; j < design.matrix().rows(); ++j)
          if (design.matrix()(j, pass) == 1.0) ordered.col(next++) = mat.values.col(j);
      input.groups = group_stats(ordered, input.k_a, input.k_b);
    }
  }
  data.unit_ids = std::move(mat.rows);
  return data;
}

namespace {

bool trended(MethodId m) {
  switch (m) {
    case MethodId::RegInvChisq:
    case MethodId::RegNpmle:
    case MethodId::JointNpmle:
    case MethodId::DiscreteJoint:
    case MethodId::Map:
      return true;
    default:
      return false;
  }
}

std::ofstream open_output(const std::string& dir, const std::string& file, std::string* path) {
  std::filesystem::create_directories(dir);
  *path = (std::filesystem::path(dir) / file).string();
  std::ofstream out(*path);
  if (!out) throw ParseError("cannot write '" + *path + "'");
  return out;
}

void print_warnings(const Warnings& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

int cmd_analyze(const DataArgs& data_args, const std::string& methods_csv, double alpha,
                bool allow_nonorthogonal, const std::string& out_dir, std::ostream& out,
                std::ostream& err) {
  const auto methods = parse_methods(methods_csv);
  LoadedData data = load_data(data_args);
  const Design& design = *data.design;

  const bool needs_check = std::any_of(methods.begin(), methods.end(), trended);
  if (needs_check && data.input.side != SideMode::External) {
    const Contrast side = data.input.side == SideMode::ManormTilde ? manorm_contrast(design)
                                                                   : intensity_contrast(design);
    const auto report = check_orthogonality(design, data.theta, side);
    if (!report.ok) {
      err << (allow_nonorthogonal ? "warning" : "error")
          << ": contrast is not orthogonal to the side-information contrast (c_theta' (X'X)^-1 c_side = "
          << format_double(report.value) << ", ones in column space: "
          << (report.ones_in_colspace ? "yes" : "no") << ")\n";
      if (!allow_nonorthogonal) return kDesign;
    }
  }
  for (MethodId m : methods)
    if (auto reason = method_inapplicable(m, data.input)) {
      err << "error: " << method_name(m) << ": " << *reason << '\n';
      return kApplicability;
    }

  AnalysisOptions options;
  options.threads = resolve_threads(data_args.threads);
  Analysis analysis(std::move(data.input), options);
  std::vector<std::vector<double>> p, q;
  for (MethodId m : methods) {
    auto pv = analysis.pvalues(m);
    q.push_back(bh_adjust(pv.p));
    p.push_back(std::move(pv.p));
  }
  print_warnings(analysis.warnings(), err);

  std::string path;
  auto tsv = open_output(out_dir, "analyze.tsv", &path);
  tsv << "unit_id";
  for (MethodId m : methods) tsv << "\tp_" << method_name(m);
  for (MethodId m : methods) tsv << "\tq_" << method_name(m);
  tsv << '\n';
  for (std::size_t i = 0; i < data.unit_ids.size(); ++i) {
    tsv << data.unit_ids[i];
    for (const auto& col : p) tsv << '\t' << format_double(col[i]);
    for (const auto& col : q) tsv << '\t' << format_double(col[i]);
    tsv << '\n';
  }
  tsv.close();
  if (!tsv) throw ParseError("failed writing '" + path + "'");

  out << "contrast\t" << data.contrast_name << '\n' << "units\t" << data.unit_ids.size() << '\n';
  for (std::size_t k = 0; k < methods.size(); ++k)
    out << "rejected_" << method_name(methods[k]) << '\t' << bh_reject(p[k], alpha).j_hat
        << '\n';
  out << "output\t" << path << '\n';
  return kOk;
}

int cmd_simulate(const std::string& preset, const std::string& config_path, int reps, int n,
                 std::uint64_t seed, bool seed_set, double alpha, bool alpha_set,
                 const std::string& methods_csv, unsigned threads, const std::string& out_dir,
                 std::ostream& out, std::ostream& err) {
  SimConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ParseError("cannot open config '" + config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    cfg = sim_config_from_json(buf.str());
  } else {
    try {
      cfg = sim_preset(preset);
    } catch (const InputError& e) {
      throw ParseError(e.what());
    }
  }
  if (reps > 0) cfg.reps = reps;
  if (n > 0) {
    // Keep the null fraction of the base configuration.
    const double null_share = double(cfg.n0) / double(cfg.n);
    cfg.n = n;
    cfg.n0 = static_cast<int>(std::lround(null_share * n));
  }
  if (seed_set) cfg.seed = seed;
  if (alpha_set) cfg.alpha = alpha;
  try {
    cfg.validate();
  } catch (const InputError& e) {
    throw ParseError(e.what());
  }
  const auto methods = parse_methods(methods_csv);

  AnalysisOptions options;
  options.threads = resolve_threads(threads);
  const auto result = monte_carlo(cfg, methods, options, 1);
  for (const auto& row : result.summary)
    if (!row.note.empty()) err << "note: " << method_name(row.method) << ": " << row.note << '\n';

  std::string path;
  auto tsv = open_output(out_dir, "simulate.tsv", &path);
  write_summary_tsv(tsv, result);
  tsv.close();
  std::string rep_path;
  auto reps_tsv = open_output(out_dir, "replicates.tsv", &rep_path);
  write_replicates_tsv(reps_tsv, result);
  reps_tsv.close();
  if (!tsv || !reps_tsv) throw ParseError("failed writing simulation output");
  write_summary_tsv(out, result);
  return kOk;
}

int cmd_check_design(const DataArgs& args, std::ostream& out) {
  const Design design = load_design(args, {});
  std::string name;
  const Contrast theta = load_contrast(args, design, &name);
  const SideSpec side = parse_side(args.side);
  if (side.mode == SideMode::External)
    throw ParseError("check-design compares against intensity or manorm side information");
  const Contrast c_side =
      side.mode == SideMode::ManormTilde ? manorm_contrast(design) : intensity_contrast(design);
  const auto report = check_orthogonality(design, theta, c_side);
  out << "{\"ones_in_colspace\": " << (report.ones_in_colspace ? "true" : "false")
      << ", \"c_theta_gram_c_A\": " << format_double(report.value)
      << ", \"ok\": " << (report.ok ? "true" : "false") << "}\n";
  return report.ok ? kOk : kDesign;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Empirical Bayes tests with trended variance priors", "ebtrend"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  DataArgs data;
  std::string methods = "reg_npmle";
  std::string out_dir = ".";
  double alpha = 0.05;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool allow_nonorthogonal = false;
  std::string preset = "setting1";
  std::string config;
  int reps = 0;
  int n = 0;

  auto add_data = [&](CLI::App* cmd, bool need_matrix) {
    auto* opt = cmd->add_option("--matrix", data.matrix, "Unit x sample matrix (CSV or TSV)");
    if (need_matrix) opt->required();
    cmd->add_option("--design", data.design, "Design matrix CSV (rows = samples)");
    cmd->add_option("--groups", data.groups, "Two-group design KA,KB instead of --design");
    cmd->add_option("--contrast", data.contrast, "Contrast NAME=w1,w2,... over design columns");
    cmd->add_option("--side", data.side, "intensity | manorm | column:NAME")->capture_default_str();
  };
  auto add_threads = [&](CLI::App* cmd) {
    cmd->add_option("--threads", threads, "Worker threads (0: EBTREND_THREADS or all cores)");
  };

  auto* analyze = app.add_subcommand("analyze", "Per-unit p-values and BH q-values");
  add_data(analyze, true);
  analyze->add_option("--methods", methods, "Comma-separated methods")->capture_default_str();
  analyze->add_option("--alpha", alpha, "BH level for the rejection summary")->capture_default_str();
  analyze->add_option("--seed", seed, "Accepted for symmetry; analyze draws no random numbers");
  analyze->add_option("--out", out_dir, "Output directory")->capture_default_str();
  analyze->add_flag("--allow-nonorthogonal", allow_nonorthogonal,
                    "Downgrade a failed orthogonality check to a warning");
  add_threads(analyze);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo FDR and power table");
  std::string sim_methods;
  auto* preset_opt = simulate->add_option("--preset", preset, "setting1 .. setting4")->capture_default_str();
  simulate->add_option("--config", config, "SimConfig JSON file")->excludes(preset_opt);
  simulate->add_option("--reps", reps, "Replicates (overrides the preset)");
  simulate->add_option("--n", n, "Units per replicate; the null share is kept");
  auto* seed_opt = simulate->add_option("--seed", seed, "Base seed");
  auto* alpha_opt = simulate->add_option("--alpha", alpha, "BH level");
  simulate->add_option("--methods", sim_methods, "Comma-separated methods (default: all)");
  simulate->add_option("--out", out_dir, "Output directory")->capture_default_str();
  add_threads(simulate);

  auto* check = app.add_subcommand("check-design", "Orthogonality report as JSON");
  check->add_option("--design", data.design, "Design matrix CSV");
  check->add_option("--groups", data.groups, "Two-group design KA,KB instead of --design");
  check->add_option("--contrast", data.contrast, "Contrast NAME=w1,w2,...");
  check->add_option("--side", data.side, "intensity | manorm")->capture_default_str();

  auto* diagnose = app.add_subcommand("diagnose", "Trend, prior and marginal-density tables");
  std::string diag_methods;
  add_data(diagnose, true);
  diagnose->add_option("--methods", diag_methods, "Priors to report (default: all applicable)");
  diagnose->add_option("--out", out_dir, "Output directory")->capture_default_str();
  diagnose->add_option("--seed", seed, "Accepted for symmetry; diagnose draws no random numbers");
  add_threads(diagnose);

  std::vector<std::string> argv_rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(argv_rest.begin(), argv_rest.end());
  try {
    app.parse(argv_rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kParse;
  }
  data.threads = threads;

  try {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParseError("--alpha must lie in (0, 1)");
    if (analyze->parsed())
      return cmd_analyze(data, methods, alpha, allow_nonorthogonal, out_dir, out, err);
    if (simulate->parsed()) {
      std::string all;
      for (MethodId m : kAllMethods) all += std::string(all.empty() ? "" : ",") + std::string(method_name(m));
      return cmd_simulate(preset, config, reps, n, seed, seed_opt->count() > 0, alpha,
                          alpha_opt->count() > 0, sim_methods.empty() ? all : sim_methods, threads,
                          out_dir, out, err);
    }
    if (check->parsed()) return cmd_check_design(data, out);
    if (diagnose->parsed()) return cmd_diagnose(data, diag_methods, out_dir, out, err);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kParse;
  } catch (const BinningError& e) {
    err << "error: " << e.what() << '\n';
    return kParse;
  } catch (const DesignError& e) {
    err << "error: " << e.what() << '\n';
    return kDesign;
  } catch (const ApplicabilityError& e) {
    err << "error: " << e.what() << '\n';
    return kApplicability;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kParse;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kParse;
  }
  return kParse;
}

}  // namespace ebtrend::cli
