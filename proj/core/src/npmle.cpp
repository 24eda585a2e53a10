#include "ebtrend/npmle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ebtrend/errors.hpp"
#include "ebtrend/parallel.hpp"

namespace ebtrend {
namespace {

constexpr double kWeightFloor = 1e-300;
constexpr double kCurvatureCap = 1e140;
// Gradients this far above 1 mean some unit is nearly unexplained.
constexpr double kVertexTrigger = 2.0;

double sum_of(const std::vector<double>& w) {
  double total = 0.0;
  for (double v : w) total += v;
  return total;
}

void normalize(std::vector<double>& w) {
  const double total = sum_of(w);
  for (double& v : w) v /= total;
}

/// Row-major likelihood block with the two passes the EM step needs.
class Block {
 public:
  Block(const double* data, std::size_t n, std::size_t m, unsigned threads)
      : data_(data), n_(n), m_(m), threads_(threads), f_(n), inv_f_(n) {}

  std::size_t cols() const { return m_; }
  const std::vector<double>& mixture() const { return f_; }

  /// Average log mixture density plus `offset`; fills the mixture densities.
  double loglik(const std::vector<double>& w, double offset) {
    parallel_for_chunks(n_, threads_, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) f_[i] = row_dot(i, w);
    });
    double acc = 0.0;
    for (std::size_t i = 0; i < n_; ++i) acc += std::log(f_[i]);
    return acc / double(n_) + offset;
  }

  /// (1/n) sum_i L_ik / f_i for the densities left by the last loglik call,
  /// or for the supplied `f`.
  void gradient(std::vector<double>& g, const std::vector<double>* f = nullptr) {
    const auto& fv = f ? *f : f_;
    for (std::size_t i = 0; i < n_; ++i) inv_f_[i] = 1.0 / fv[i];
    g.assign(m_, 0.0);
    parallel_for_chunks(m_, threads_, [&](std::size_t begin, std::size_t end) {
      double* gk = g.data();
      for (std::size_t i = 0; i < n_; ++i) {
        const double* row = data_ + i * m_;
        const double r = inv_f_[i];
        for (std::size_t k = begin; k < end; ++k) gk[k] += row[k] * r;
      }
    });
    const double scale = 1.0 / double(n_);
    for (double& v : g) v *= scale;
  }

 private:
  double row_dot(std::size_t i, const std::vector<double>& w) const {
    const double* row = data_ + i * m_;
    const double* wp = w.data();
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t k = 0;
    for (; k + 4 <= m_; k += 4) {
      a0 += row[k] * wp[k];
      a1 += row[k + 1] * wp[k + 1];
      a2 += row[k + 2] * wp[k + 2];
      a3 += row[k + 3] * wp[k + 3];
    }
    for (; k < m_; ++k) a0 += row[k] * wp[k];
    return (a0 + a1) + (a2 + a3);
  }

  const double* data_;
  std::size_t n_;
  std::size_t m_;
  unsigned threads_;
  std::vector<double> f_;
  std::vector<double> inv_f_;
};

/// min 0.5 y'Hy - c'y over the probability simplex by a primal active-set
/// method started at the feasible point `y`.
void simplex_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& c, Eigen::VectorXd& y) {
  const Eigen::Index p = H.rows();
  // Ridge relative to each diagonal entry: curvatures can span hundreds of
  // orders of magnitude when a unit is nearly unexplained.
  Eigen::VectorXd ridge(p);
  for (Eigen::Index j = 0; j < p; ++j) ridge[j] = 1e-10 * H(j, j) + 1e-300;
  std::vector<char> free(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) free[j] = y[j] > 0.0;
  const double mu_tol = 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff());

  for (int it = 0; it < 20 * int(p) + 20; ++it) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < p; ++j)
      if (free[j]) idx.push_back(j);
    const auto q = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd Hf(q, q);
    Eigen::VectorXd cf(q);
    for (Eigen::Index a = 0; a < q; ++a) {
      cf[a] = c[idx[a]];
      for (Eigen::Index b = 0; b < q; ++b) Hf(a, b) = H(idx[a], idx[b]);
      Hf(a, a) += ridge[idx[a]];
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(Hf);
    const Eigen::VectorXd u = ldlt.solve(cf);
    const Eigen::VectorXd v = ldlt.solve(Eigen::VectorXd::Ones(q));
    const double lambda = (1.0 - u.sum()) / v.sum();
    const Eigen::VectorXd z = u + lambda * v;
    if (!z.allFinite()) return;

    double t = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index a = 0; a < q; ++a) {
      if (z[a] < 0.0) {
        const double ya = y[idx[a]];
        const double ta = ya / (ya - z[a]);
        if (ta < t) {
          t = ta;
          blocking = a;
        }
      }
    }
    for (Eigen::Index a = 0; a < q; ++a) y[idx[a]] += t * (z[a] - y[idx[a]]);
    if (blocking >= 0) {
      y[idx[blocking]] = 0.0;
      free[idx[blocking]] = 0;
      for (Eigen::Index a = 0; a < q; ++a)
        if (y[idx[a]] <= 0.0) {
          y[idx[a]] = 0.0;
          free[idx[a]] = 0;
        }
      continue;
    }
    // Stationary on the free set: release the most negative multiplier.
    const Eigen::VectorXd grad = H * y - c;
    Eigen::Index worst = -1;
    double worst_mu = -mu_tol;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (free[j]) continue;
      const double mu = grad[j] - lambda;
      if (mu < worst_mu) {
        worst_mu = mu;
        worst = j;
      }
    }
    if (worst < 0) return;
    free[worst] = 1;
  }
}

/// Move mass toward the single column with the largest gradient, choosing the
/// best step among t = 2^-1 .. 2^-50. Rescues units the mixture has all but
/// lost, which the quadratic model can only approach geometrically.
bool vertex_step(const double* data, std::size_t n, std::size_t m, std::size_t k, double offset,
                 std::vector<double>& w, std::vector<double>& f, double& ll) {
  std::vector<double> col(n);
  for (std::size_t i = 0; i < n; ++i) col[i] = data[i * m + k];
  double best_t = 0.0;
  double best_ll = ll;
  double t = 1.0;
  for (int j = 0; j < 50; ++j) {
    t *= 0.5;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::log((1.0 - t) * f[i] + t * col[i]);
    const double cand = acc / double(n) + offset;
    if (cand > best_ll) {
      best_ll = cand;
      best_t = t;
    }
  }
  if (best_t == 0.0) return false;
  for (double& v : w) v *= 1.0 - best_t;
  w[k] += best_t;
  for (std::size_t i = 0; i < n; ++i) f[i] = (1.0 - best_t) * f[i] + best_t * col[i];
  ll = best_ll;
  return true;
}

/// One projected Newton step. Returns false when no ascent was found.
bool newton_step(const double* data, std::size_t n, std::size_t m, unsigned threads,
                 const EmOptions& options, double offset, const std::vector<double>& g,
                 std::vector<double>& w, std::vector<double>& f, double& ll) {
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < m; ++k)
    if (w[k] > 0.0) order.push_back(k);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (w[a] != w[b]) return w[a] > w[b];
    return g[a] > g[b];
  });
  const std::size_t weighted_cap =
      std::size_t(std::max(1, options.max_candidates - options.max_violators));
  std::vector<char> chosen(m, 0);
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < order.size() && j < weighted_cap; ++j) {
    cols.push_back(order[j]);
    chosen[order[j]] = 1;
  }
  std::vector<std::size_t> viol;
  for (std::size_t k = 0; k < m; ++k)
    if (!chosen[k] && g[k] > 1.0) viol.push_back(k);
  std::stable_sort(viol.begin(), viol.end(), [&](std::size_t a, std::size_t b) { return g[a] > g[b]; });
  for (std::size_t j = 0; j < viol.size() && j < std::size_t(std::max(0, options.max_violators)); ++j) {
    cols.push_back(viol[j]);
    chosen[viol[j]] = 1;
  }
  double rest_mass = 0.0;
  std::vector<std::size_t> rest;
  for (std::size_t k = 0; k < m; ++k)
    if (!chosen[k] && w[k] > 0.0) {
      rest.push_back(k);
      rest_mass += w[k];
    }
  const bool has_rest = rest_mass > 0.0;
  const auto c = static_cast<Eigen::Index>(cols.size() + (has_rest ? 1 : 0));
  const auto nn = static_cast<Eigen::Index>(n);

  Eigen::MatrixXd B(nn, c);
  parallel_for_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double* row = data + i * m;
      for (std::size_t j = 0; j < cols.size(); ++j) B(Eigen::Index(i), Eigen::Index(j)) = row[cols[j]];
      if (has_rest) {
        double acc = 0.0;
        for (std::size_t k : rest) acc += w[k] * row[k];
        B(Eigen::Index(i), c - 1) = acc / rest_mass;
      }
    }
  });
  Eigen::VectorXd x(c);
  for (std::size_t j = 0; j < cols.size(); ++j) x[Eigen::Index(j)] = w[cols[j]];
  if (has_rest) x[c - 1] = rest_mass;
  x /= x.sum();

  const double root_n = std::sqrt(double(n));
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(c);
  Eigen::MatrixXd S(nn, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < nn; ++i) {
      const double r = B(i, j) / f[std::size_t(i)];
      acc += r;
      // A unit the mixture nearly misses would overflow the curvature; the
      // model only steers the line search, so its rows are capped.
      S(i, j) = std::min(r, kCurvatureCap) / root_n;
    }
    grad[j] = acc / double(n);
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(c, c);
  H.selfadjointView<Eigen::Lower>().rankUpdate(S.transpose());
  H = H.selfadjointView<Eigen::Lower>();

  Eigen::VectorXd y = x;
  simplex_qp(H, grad + H * x, y);
  const Eigen::VectorXd d = y - x;
  const double slope = grad.dot(d);
  if (!(slope > 0.0)) return false;

  std::vector<double> f_new(n);
  double alpha = 1.0;
  for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
    Eigen::VectorXd xn = (x + alpha * d).cwiseMax(0.0);
    xn /= xn.sum();
    parallel_for_chunks(n, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) f_new[i] = B.row(Eigen::Index(i)).dot(xn);
    });
    double acc = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(f_new[i] > 0.0)) {
        finite = false;
        break;
      }
      acc += std::log(f_new[i]);
    }
    if (!finite) continue;
    const double ll_new = acc / double(n) + offset;
    if (ll_new >= ll + 1e-4 * alpha * slope) {
      for (std::size_t j = 0; j < cols.size(); ++j) w[cols[j]] = xn[Eigen::Index(j)];
      if (has_rest) {
        const double scale = xn[c - 1] / rest_mass;
        for (std::size_t k : rest) w[k] *= scale;
      }
      f.swap(f_new);
      ll = ll_new;
      return true;
    }
  }
  return false;
}

}  // namespace

EmResult npmle_em(LogLikMatrix log_lik, std::span<const double> init, const EmOptions& options) {
  const auto n = static_cast<std::size_t>(log_lik.rows());
  const auto m = static_cast<std::size_t>(log_lik.cols());
  if (n == 0 || m == 0) throw InputError("likelihood matrix is empty");

  // Scale rows to max 1 so mixtures never underflow; the offset restores the objective.
  double offset_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = log_lik.data() + i * m;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      if (std::isnan(row[k]) || row[k] == std::numeric_limits<double>::infinity())
        throw InputError("likelihood row " + std::to_string(i) + " contains NaN or +inf");
      top = std::max(top, row[k]);
    }
    if (!std::isfinite(top))
      throw InputError("likelihood row " + std::to_string(i) + " has no finite entry");
    for (std::size_t k = 0; k < m; ++k) row[k] = std::exp(row[k] - top);
    offset_sum += top;
  }
  const double offset = offset_sum / double(n);

  std::vector<double> w(m, 1.0 / double(m));
  if (!init.empty()) {
    if (init.size() != m) throw InputError("initial weights do not match the support size");
    for (std::size_t k = 0; k < m; ++k) {
      if (!(init[k] >= 0.0)) throw InputError("initial weights must be non-negative");
      w[k] = std::max(init[k], kWeightFloor);
    }
    normalize(w);
  }

  const unsigned threads = resolve_threads(options.threads);
  EmResult result;
  Block full(log_lik.data(), n, m, threads);
  double ll = full.loglik(w, offset);
  std::vector<double> f = full.mixture();
  std::vector<double> g_full;
  double ll_prev = -std::numeric_limits<double>::infinity();

  while (true) {
    full.gradient(g_full, &f);
    if (options.record_trace) result.trace.push_back(ll);
    const double max_g = *std::max_element(g_full.begin(), g_full.end());
    if (std::abs(ll - ll_prev) <= options.tol * std::max(1.0, std::abs(ll)) &&
        max_g <= 1.0 + options.kkt_tol) {
      result.converged = true;
      break;
    }
    if (result.iterations >= options.max_iter) break;
    ++result.iterations;
    ll_prev = ll;

    if (options.accelerate && max_g > kVertexTrigger) {
      const auto k = static_cast<std::size_t>(
          std::max_element(g_full.begin(), g_full.end()) - g_full.begin());
      vertex_step(log_lik.data(), n, m, k, offset, w, f, ll);
    }
    if (options.accelerate &&
        newton_step(log_lik.data(), n, m, threads, options, offset, g_full, w, f, ll))
      continue;
    for (std::size_t k = 0; k < m; ++k) w[k] = std::max(w[k] * g_full[k], options.accelerate ? 0.0 : kWeightFloor);
    normalize(w);
    ll = full.loglik(w, offset);
    f = full.mixture();
  }

  result.loglik = ll;
  result.max_gradient = *std::max_element(g_full.begin(), g_full.end());
  result.gradient = std::move(g_full);
  result.weights = std::move(w);
  return result;
}

}  // namespace ebtrend
