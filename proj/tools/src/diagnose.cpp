#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "commands.hpp"
#include "ebtrend/errors.hpp"
#include "ebtrend/parallel.hpp"
#include "ebtrend/special.hpp"
#include "ebtrend/table_io.hpp"
#include "ebtrend_cli/cli.hpp"
#include "ebtrend_cli/diagnostics.hpp"

namespace ebtrend::cli {

namespace {

constexpr double kTailMass = 1e-10;
constexpr int kTrendPoints = 200;

std::vector<double> log_spaced(double lo, double hi, int points) {
  std::vector<double> x(static_cast<std::size_t>(points));
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int k = 0; k < points; ++k) x[k] = std::exp(a + (b - a) * k / (points - 1));
  x.front() = lo;
  x.back() = hi;
  return x;
}

}  // namespace

DensityCurve discrete_marginal(const DiscretePrior1D& prior, int df, int points) {
  const boost::math::chi_squared_distribution<double> chi(df);
  const double q_lo = boost::math::quantile(chi, kTailMass) / df;
  const double q_hi = boost::math::quantile(boost::math::complement(chi, kTailMass)) / df;
  const double lo = prior.support.front() * q_lo;
  const double hi = prior.support.back() * q_hi;
  DensityCurve curve;
  curve.x = log_spaced(lo, hi, points);
  for (double x : curve.x) {
    double f = 0.0;
    for (std::size_t k = 0; k < prior.support.size(); ++k)
      f += prior.weights[k] * std::exp(stats::log_scaled_chisq_density(x, df, prior.support[k]));
    curve.density.push_back(f);
  }
  return curve;
}

DensityCurve invchisq_marginal(const InvChisqPrior& prior, int df, int points) {
  if (prior.is_point_mass()) return discrete_marginal(DiscretePrior1D::point_mass(prior.s0_sq), df, points);
  // V^2 / s0^2 follows F(df, kappa0).
  const boost::math::fisher_f_distribution<double> f(df, prior.kappa0);
  const double lo = prior.s0_sq * boost::math::quantile(f, kTailMass);
  const double hi = prior.s0_sq * boost::math::quantile(boost::math::complement(f, kTailMass));
  DensityCurve curve;
  curve.x = log_spaced(lo, hi, points);
  for (double x : curve.x) curve.density.push_back(boost::math::pdf(f, x / prior.s0_sq) / prior.s0_sq);
  return curve;
}

double trapezoid(const DensityCurve& curve) {
  double total = 0.0;
  for (std::size_t k = 1; k < curve.x.size(); ++k)
    total += 0.5 * (curve.density[k] + curve.density[k - 1]) * (curve.x[k] - curve.x[k - 1]);
  return total;
}

Histogram log_histogram(std::span<const double> values, int bins) {
  double lo = stats::kInf, hi = 0.0;
  for (double v : values)
    if (v > 0.0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  Histogram h;
  if (!(lo < stats::kInf)) {
    h.edges = {0.0, 1.0};
    h.counts = {static_cast<long>(values.size())};
    return h;
  }
  if (hi <= lo) {
    lo *= 0.5;
    hi *= 2.0;
  }
  h.edges = log_spaced(lo, hi, bins + 1);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double a = std::log(lo);
  const double width = (std::log(hi) - a) / bins;
  for (double v : values) {
    int b = v > 0.0 ? static_cast<int>((std::log(v) - a) / width) : 0;
    h.counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))] += 1;
  }
  return h;
}

namespace {

struct Writer {
  std::string dir;
  std::vector<std::string> written;

  std::ofstream open(const std::string& file) {
    const auto path = (std::filesystem::path(dir) / file).string();
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    written.push_back(path);
    return out;
  }
};

void write_curve(Writer& w, const std::string& name, const DensityCurve& curve) {
  auto out = w.open("marginal_" + name + ".tsv");
  out << "x\tdensity\n";
  for (std::size_t k = 0; k < curve.x.size(); ++k)
    out << format_double(curve.x[k]) << '\t' << format_double(curve.density[k]) << '\n';
}

void write_histogram(Writer& w, const std::string& name, std::span<const double> values) {
  const auto h = log_histogram(values);
  auto out = w.open("histogram_" + name + ".tsv");
  out << "lower\tupper\tcount\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    out << format_double(h.edges[b]) << '\t' << format_double(h.edges[b + 1]) << '\t' << h.counts[b] << '\n';
}

void write_prior(Writer& w, const std::string& name, const DiscretePrior1D& prior) {
  auto out = w.open("prior_" + name + ".tsv");
  out << "tau2\tweight\n";
  for (std::size_t k = 0; k < prior.support.size(); ++k)
    out << format_double(prior.support[k]) << '\t' << format_double(prior.weights[k]) << '\n';
}

void write_invchisq(Writer& w, const std::string& name, const InvChisqPrior& prior) {
  auto out = w.open("invchisq_" + name + ".json");
  // JSON has no infinity; a point-mass prior reports kappa0 as null.
  out << "{\"kappa0\": " << (prior.is_point_mass() ? std::string("null") : format_double(prior.kappa0))
      << ", \"s0_sq\": " << format_double(prior.s0_sq) << "}\n";
}

}  // namespace

int cmd_diagnose(const DataArgs& args, const std::string& methods_csv, const std::string& out_dir,
                 std::ostream& out, std::ostream& err) {
  LoadedData data = load_data(args);
  std::vector<MethodId> methods;
  if (methods_csv.empty()) {
    methods = {MethodId::UntrendedInvChisq, MethodId::UntrendedNpmle, MethodId::RegInvChisq,
               MethodId::RegNpmle};
    if (data.input.side == SideMode::AverageIntensity) methods.push_back(MethodId::JointNpmle);
  } else {
    methods = parse_methods(methods_csv);
  }
  for (MethodId m : methods) {
    switch (m) {
      case MethodId::TTest:
      case MethodId::Map:
      case MethodId::Manorm2:
      case MethodId::Oracle:
        throw ParseError(std::string(method_name(m)) + " has no fitted prior to diagnose");
      default:
        if (auto reason = method_inapplicable(m, data.input))
          throw ApplicabilityError(std::string(method_name(m)) + ": " + *reason);
    }
  }

  AnalysisOptions options;
  options.threads = resolve_threads(args.threads);
  Analysis analysis(std::move(data.input), options);
  const auto& units = analysis.input().units;
  const int df = units.front().df;
  std::filesystem::create_directories(out_dir);
  Writer w{out_dir, {}};

  {
    const auto& trend = analysis.trend();
    double lo = stats::kInf, hi = -stats::kInf;
    for (const auto& u : units) {
      lo = std::min(lo, u.m);
      hi = std::max(hi, u.m);
    }
    auto t = w.open("trend.tsv");
    t << "m\tm_hat\txi2_hat\n";
    for (int k = 0; k < kTrendPoints; ++k) {
      const double m = k + 1 == kTrendPoints ? hi : lo + (hi - lo) * k / (kTrendPoints - 1);
      const auto v = trend.eval(m);
      t << format_double(m) << '\t' << format_double(v.m_hat) << '\t' << format_double(v.xi2_hat) << '\n';
    }
  }

  std::vector<double> s2, v2;
  for (const auto& u : units) {
    s2.push_back(u.s2);
    v2.push_back(u.s2 / analysis.trend().eval(u.m).xi2_hat);
  }

  for (MethodId m : methods) {
    const std::string name(method_name(m));
    switch (m) {
      case MethodId::UntrendedInvChisq:
      case MethodId::RegInvChisq: {
        const bool reg = m == MethodId::RegInvChisq;
        const auto& prior = reg ? analysis.reg_invchisq() : analysis.untrended_invchisq();
        write_invchisq(w, name, prior);
        write_curve(w, name, invchisq_marginal(prior, df));
        write_histogram(w, name, reg ? v2 : s2);
        break;
      }
      case MethodId::UntrendedNpmle:
      case MethodId::RegNpmle: {
        const bool reg = m == MethodId::RegNpmle;
        const auto& fit = reg ? analysis.reg_npmle() : analysis.untrended_npmle();
        write_prior(w, name, fit.prior);
        write_curve(w, name, discrete_marginal(fit.prior, df));
        write_histogram(w, name, reg ? v2 : s2);
        break;
      }
      case MethodId::JointNpmle: {
        const auto& fit = analysis.joint_npmle();
        std::map<double, double> by_sigma2;
        {
          auto p = w.open("prior_" + name + ".tsv");
          p << "mu\tsigma2\tweight\n";
          for (int b = 0; b < fit.sieve.bins(); ++b)
            for (int v = 0; v < fit.sieve.residual_points(); ++v) {
              const double wt = fit.cell_weight(b, v);
              if (wt <= 0.0) continue;
              p << format_double(fit.sieve.bin_medians[b]) << '\t' << format_double(fit.sieve.sigma2[b][v])
                << '\t' << format_double(wt) << '\n';
              by_sigma2[fit.sieve.sigma2[b][v]] += wt;
            }
        }
        DiscretePrior1D marginal;
        for (const auto& [s, wt] : by_sigma2) {
          marginal.support.push_back(s);
          marginal.weights.push_back(wt);
        }
        write_curve(w, name, discrete_marginal(marginal, df));
        write_histogram(w, name, s2);
        break;
      }
      case MethodId::DiscreteJoint: {
        const auto& set = analysis.discrete_priors();
        auto p = w.open("prior_" + name + ".tsv");
        p << "bin\tlower\tupper\ttau2\tweight\n";
        for (int b = 0; b < set.bins(); ++b)
          for (std::size_t k = 0; k < set.priors[b].support.size(); ++k)
            p << b << '\t' << format_double(set.bin_edges[b]) << '\t' << format_double(set.bin_edges[b + 1])
              << '\t' << format_double(set.priors[b].support[k]) << '\t'
              << format_double(set.priors[b].weights[k]) << '\n';
        break;
      }
      default:
        break;
    }
  }
  for (const auto& warning : analysis.warnings()) err << "warning: " << warning << '\n';
  for (const auto& path : w.written) out << path << '\n';
  return kOk;
}

}  // namespace ebtrend::cli
