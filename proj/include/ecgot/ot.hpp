#pragma once

// Discrete optimal transport: an exact small-instance solver (transportation
// simplex, used as the oracle everywhere), an entropic Sinkhorn solver run
// in the log domain with a marginal-restoring rounding step, and a
// fixed-support entropic barycenter of two densities on a shared grid.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgot/density.hpp"

namespace ecgot {

/// Empirical measure: probability weights attached to atom ids (indices
/// into a shared grid or a beat batch).
struct DiscreteMeasure {
  std::vector<int> atoms;
  Eigen::VectorXd weights;

  static DiscreteMeasure uniform(int n) {
    DiscreteMeasure m;
    m.atoms.resize(n);
    for (int i = 0; i < n; ++i) m.atoms[i] = i;
    m.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
    return m;
  }

  static DiscreteMeasure from_weights(Eigen::VectorXd w) {
    DiscreteMeasure m;
    m.atoms.resize(w.size());
    for (int i = 0; i < w.size(); ++i) m.atoms[i] = i;
    m.weights = std::move(w);
    return m;
  }

  int size() const { return static_cast<int>(weights.size()); }

  void validate() const {
    if (weights.size() == 0)
      throw std::invalid_argument("measure: empty support");
    if (atoms.size() != static_cast<std::size_t>(weights.size()))
      throw std::invalid_argument("measure: atoms/weights size mismatch");
    double sum = 0.0;
    for (int i = 0; i < weights.size(); ++i) {
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
        throw std::invalid_argument("measure: weights must be >= 0");
      sum += weights[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("measure: weights must sum to 1");
    auto sorted = atoms;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("measure: atoms must be distinct");
  }
};

/// Pairwise ground costs between two batches.
struct CostMatrix {
  Eigen::MatrixXd m;
  std::string metric_tag;  // "squared-grid-distance" | "beat-shape"

  void validate() const {
    if (m.rows() == 0 || m.cols() == 0)
      throw std::invalid_argument("cost: empty matrix");
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (!std::isfinite(m(i, j)) || m(i, j) < 0.0)
          throw std::invalid_argument("cost: entries must be finite and >= 0");
  }

  /// Squared distances between grid nodes i/(G-1) on [0,1].
  static CostMatrix squared_grid(int G) {
    CostMatrix c;
    c.metric_tag = "squared-grid-distance";
    c.m.resize(G, G);
    for (int i = 0; i < G; ++i)
      for (int j = 0; j < G; ++j) {
        const double d = static_cast<double>(i - j) / (G - 1);
        c.m(i, j) = d * d;
      }
    return c;
  }
};

struct TransportPlan {
  Eigen::MatrixXd m;
  Eigen::VectorXd row_marginal;
  Eigen::VectorXd col_marginal;

  /// Total L1 violation of the prescribed marginals.
  double marginal_violation() const {
    const Eigen::VectorXd r = m.rowwise().sum() - row_marginal;
    const Eigen::VectorXd c = m.colwise().sum().transpose() - col_marginal;
    return r.cwiseAbs().sum() + c.cwiseAbs().sum();
  }
};

struct SinkhornParams {
  double lambda = 0.0;  // entropic regularization (cost units); <= 0 -> auto
  double tol = 1e-6;    // L1 marginal violation threshold
  int max_iter = 10000;

  /// Auto rule: lambda = factor * max(cost). Defaults to 1e-2.
  double resolve_lambda(const CostMatrix& cost, double factor = 1e-2) const {
    if (lambda > 0.0) return lambda;
    const double cmax = cost.m.maxCoeff();
    return std::max(factor * cmax, 1e-12);
  }

  void validate() const {
    if (tol <= 0.0) throw std::invalid_argument("sinkhorn: tol must be > 0");
    if (max_iter < 1)
      throw std::invalid_argument("sinkhorn: max_iter must be >= 1");
  }
};

struct ExactOtResult {
  TransportPlan plan;
  double cost = 0.0;
  Eigen::VectorXd row_dual;  // optimality certificate: c_ij - u_i - v_j >= 0
  Eigen::VectorXd col_dual;
  int pivots = 0;
};

struct SinkhornResult {
  TransportPlan plan;
  double cost = 0.0;
  bool converged = false;
  int iterations = 0;
  double marginal_violation = 0.0;   // pre-rounding, at exit
  std::vector<double> violation_log; // checkpoint history at the target lambda
};

namespace detail {

inline void check_ot_inputs(const CostMatrix& cost, const DiscreteMeasure& a,
                            const DiscreteMeasure& b) {
  cost.validate();
  a.validate();
  b.validate();
  if (cost.m.rows() != a.size() || cost.m.cols() != b.size())
    throw std::invalid_argument("ot: cost dimensions do not match measures");
}

// Spanning-tree basis for the transportation simplex.
struct SimplexBasis {
  int n, m;
  std::vector<int> cell_row, cell_col;  // basic cells
  std::vector<double> flow;

  int size() const { return static_cast<int>(cell_row.size()); }
};

// Dual potentials from the basis tree: u_i + v_j = c_ij on basic cells.
inline void solve_duals(const SimplexBasis& basis, const Eigen::MatrixXd& c,
                        Eigen::VectorXd& u, Eigen::VectorXd& v) {
  const int n = basis.n, m = basis.m;
  u.setConstant(n, std::numeric_limits<double>::quiet_NaN());
  v.setConstant(m, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::vector<int>> row_cells(n), col_cells(m);
  for (int k = 0; k < basis.size(); ++k) {
    row_cells[basis.cell_row[k]].push_back(k);
    col_cells[basis.cell_col[k]].push_back(k);
  }
  // BFS over the bipartite tree; nodes 0..n-1 rows, n..n+m-1 cols.
  std::vector<int> queue;
  queue.reserve(n + m);
  u[0] = 0.0;
  queue.push_back(0);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int node = queue[head];
    if (node < n) {
      for (int k : row_cells[node]) {
        const int j = basis.cell_col[k];
        if (std::isnan(v[j])) {
          v[j] = c(node, j) - u[node];
          queue.push_back(n + j);
        }
      }
    } else {
      const int j = node - n;
      for (int k : col_cells[j]) {
        const int i = basis.cell_row[k];
        if (std::isnan(u[i])) {
          u[i] = c(i, j) - v[j];
          queue.push_back(i);
        }
      }
    }
  }
  if (u.hasNaN() || v.hasNaN())
    throw std::runtime_error("exact_ot: basis tree is disconnected");
}

// Unique tree path between row i0 and col j0, returned as basic-cell indices.
inline std::vector<int> tree_path(const SimplexBasis& basis, int i0, int j0) {
  const int n = basis.n, m = basis.m;
  std::vector<std::vector<std::pair<int, int>>> adj(n + m);  // (node, cell)
  for (int k = 0; k < basis.size(); ++k) {
    const int r = basis.cell_row[k];
    const int c = n + basis.cell_col[k];
    adj[r].push_back({c, k});
    adj[c].push_back({r, k});
  }
  std::vector<int> parent_node(n + m, -2), parent_cell(n + m, -1);
  std::vector<int> queue{i0};
  parent_node[i0] = -1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int node = queue[head];
    if (node == n + j0) break;
    for (auto [next, cell] : adj[node]) {
      if (parent_node[next] == -2) {
        parent_node[next] = node;
        parent_cell[next] = cell;
        queue.push_back(next);
      }
    }
  }
  std::vector<int> path;
  int node = n + j0;
  if (parent_node[node] == -2)
    throw std::runtime_error("exact_ot: no path in basis tree");
  while (node != i0) {
    path.push_back(parent_cell[node]);
    node = parent_node[node];
  }
  std::reverse(path.begin(), path.end());  // ordered from i0 to j0
  return path;
}

}  // namespace detail

/// Exact solver for the discrete transport LP (transportation simplex with
/// a northwest-corner start). Only intended as a small-instance oracle:
/// |a|*|b| must not exceed 1024.
inline ExactOtResult exact_ot(const CostMatrix& cost, const DiscreteMeasure& a,
                              const DiscreteMeasure& b) {
  detail::check_ot_inputs(cost, a, b);
  const int n = a.size(), m = b.size();
  if (static_cast<long>(n) * m > 1024)
    throw std::invalid_argument("exact_ot: instance above oracle scale (n*m > 1024)");

  // Balance the demands to the supplies exactly.
  Eigen::VectorXd s = a.weights;
  Eigen::VectorXd d = b.weights * (s.sum() / b.weights.sum());

  detail::SimplexBasis basis;
  basis.n = n;
  basis.m = m;
  {
    Eigen::VectorXd rs = s, rd = d;
    int i = 0, j = 0;
    while (true) {
      const double f = std::min(rs[i], rd[j]);
      basis.cell_row.push_back(i);
      basis.cell_col.push_back(j);
      basis.flow.push_back(f);
      rs[i] -= f;
      rd[j] -= f;
      if (i == n - 1 && j == m - 1) break;
      // Advance exactly one index per step so the start has n+m-1 cells
      // (a connected basis tree) even under float imbalance.
      if (i == n - 1)
        ++j;
      else if (j == m - 1)
        ++i;
      else if (rs[i] <= rd[j])
        ++i;
      else
        ++j;
    }
  }

  const double cmax = cost.m.maxCoeff();
  const double opt_tol = 1e-12 * (1.0 + cmax);
  Eigen::VectorXd u(n), v(m);
  std::vector<char> is_basic(static_cast<std::size_t>(n) * m, 0);
  for (int k = 0; k < basis.size(); ++k)
    is_basic[static_cast<std::size_t>(basis.cell_row[k]) * m +
             basis.cell_col[k]] = 1;

  const long max_pivots = 200L * n * m + 1000;
  long degenerate_streak = 0;
  int pivots = 0;
  for (long iter = 0; iter < max_pivots; ++iter) {
    detail::solve_duals(basis, cost.m, u, v);

    // Entering cell: most negative reduced cost; Bland (first by index)
    // when degenerate pivots stall, which guarantees termination.
    const bool bland = degenerate_streak > n + m;
    int ei = -1, ej = -1;
    double best = -opt_tol;
    for (int i = 0; i < n && (ei < 0 || !bland); ++i)
      for (int j = 0; j < m; ++j) {
        if (is_basic[static_cast<std::size_t>(i) * m + j]) continue;
        const double r = cost.m(i, j) - u[i] - v[j];
        if (r < best) {
          best = r;
          ei = i;
          ej = j;
          if (bland) break;
        }
      }
    if (ei < 0) break;  // optimal

    // Cycle: entering cell plus the tree path from row ei to col ej.
    // Path cells alternate -,+,-,... starting from the entering (+) cell.
    const auto path = detail::tree_path(basis, ei, ej);
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t t = 0; t < path.size(); t += 2) {
      const int k = path[t];
      if (basis.flow[k] < theta - 1e-18 ||
          (leaving >= 0 && basis.flow[k] <= theta &&
           (basis.cell_row[k] < basis.cell_row[leaving] ||
            (basis.cell_row[k] == basis.cell_row[leaving] &&
             basis.cell_col[k] < basis.cell_col[leaving])))) {
        theta = basis.flow[k];
        leaving = k;
      }
    }
    if (leaving < 0) throw std::runtime_error("exact_ot: unbounded pivot");
    degenerate_streak = theta <= 1e-15 ? degenerate_streak + 1 : 0;

    for (std::size_t t = 0; t < path.size(); ++t)
      basis.flow[path[t]] += (t % 2 == 0) ? -theta : theta;
    is_basic[static_cast<std::size_t>(basis.cell_row[leaving]) * m +
             basis.cell_col[leaving]] = 0;
    is_basic[static_cast<std::size_t>(ei) * m + ej] = 1;
    basis.cell_row[leaving] = ei;
    basis.cell_col[leaving] = ej;
    basis.flow[leaving] = theta;
    ++pivots;
    if (iter == max_pivots - 1)
      throw std::runtime_error("exact_ot: pivot limit exceeded");
  }

  ExactOtResult result;
  result.plan.m = Eigen::MatrixXd::Zero(n, m);
  for (int k = 0; k < basis.size(); ++k)
    result.plan.m(basis.cell_row[k], basis.cell_col[k]) +=
        std::max(basis.flow[k], 0.0);
  result.plan.row_marginal = a.weights;
  result.plan.col_marginal = b.weights;
  result.cost = (result.plan.m.array() * cost.m.array()).sum();
  result.row_dual = u;
  result.col_dual = v;
  result.pivots = pivots;
  return result;
}

namespace detail {

inline double lse_max_shift(const Eigen::ArrayXd& x) {
  const double mx = x.maxCoeff();
  if (!std::isfinite(mx)) return mx;  // all -inf
  return mx + std::log((x - mx).exp().sum());
}

// Dense plan from log-domain potentials: P_ij = exp((f_i + g_j - C_ij)/l).
inline Eigen::MatrixXd plan_from_potentials(const Eigen::MatrixXd& c,
                                            const Eigen::VectorXd& f,
                                            const Eigen::VectorXd& g,
                                            double lambda) {
  Eigen::MatrixXd p(c.rows(), c.cols());
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j)
      p(i, j) = std::exp((f[i] + g[j] - c(i, j)) / lambda);
  return p;
}

// Rounds a nearly feasible plan onto the exact marginals: scale rows and
// columns down to the targets, then patch the residual with a rank-one
// correction (Altschuler-style rounding).
inline void round_to_marginals(Eigen::MatrixXd& p, const Eigen::VectorXd& a,
                               const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double r = p.row(i).sum();
    if (r > a[i] && r > 0.0) p.row(i) *= a[i] / r;
  }
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    const double c = p.col(j).sum();
    if (c > b[j] && c > 0.0) p.col(j) *= b[j] / c;
  }
  Eigen::VectorXd ea = a - p.rowwise().sum();
  Eigen::VectorXd eb = b - p.colwise().sum().transpose();
  const double ta = ea.sum();
  if (ta > 1e-300) {
    ea = ea.cwiseMax(0.0);
    eb = eb.cwiseMax(0.0);
    p.noalias() += ea * eb.transpose() / ea.sum();
  }
}

}  // namespace detail

/// Entropic OT via log-domain Sinkhorn. Internally anneals the
/// regularization down to the target lambda (epsilon scaling), then polishes
/// at the target until the L1 marginal violation drops below params.tol. A
/// final rounding step restores the exact marginals, so the returned plan is
/// feasible regardless of convergence; `converged` and `marginal_violation`
/// report the pre-rounding state.
inline SinkhornResult sinkhorn(const CostMatrix& cost,
                               const DiscreteMeasure& a,
                               const DiscreteMeasure& b,
                               const SinkhornParams& params) {
  detail::check_ot_inputs(cost, a, b);
  params.validate();
  const double lambda = params.resolve_lambda(cost);
  const int n = a.size(), m = b.size();
  const Eigen::MatrixXd& c = cost.m;

  Eigen::ArrayXd la(n), lb(m);
  for (int i = 0; i < n; ++i) la[i] = std::log(a.weights[i]);
  for (int j = 0; j < m; ++j) lb[j] = std::log(b.weights[j]);

  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m);

  auto half_updates = [&](double lam) {
    Eigen::ArrayXd scratch_row(m), scratch_col(n);
    // f_i = lam*(log a_i - LSE_j((g_j - C_ij)/lam))
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) scratch_row[j] = (g[j] - c(i, j)) / lam;
      const double lse = detail::lse_max_shift(scratch_row);
      f[i] = std::isfinite(la[i]) ? lam * (la[i] - lse)
                                  : -std::numeric_limits<double>::infinity();
    }
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < n; ++i) scratch_col[i] = (f[i] - c(i, j)) / lam;
      const double lse = detail::lse_max_shift(scratch_col);
      g[j] = std::isfinite(lb[j]) ? lam * (lb[j] - lse)
                                  : -std::numeric_limits<double>::infinity();
    }
  };

  // Annealing stage: halve lambda from a mild start down to the target.
  const double cmax = c.maxCoeff();
  for (double lam = std::max(cmax * 0.5, lambda); lam > lambda * 1.999;
       lam = std::max(lam * 0.5, lambda)) {
    for (int it = 0; it < 50; ++it) half_updates(lam);
  }

  SinkhornResult result;
  double violation = std::numeric_limits<double>::infinity();
  constexpr int kCheckEvery = 10;
  int it = 0;
  for (; it < params.max_iter; ++it) {
    half_updates(lambda);
    if ((it + 1) % kCheckEvery == 0 || it + 1 == params.max_iter) {
      const Eigen::MatrixXd p = detail::plan_from_potentials(c, f, g, lambda);
      violation = (p.rowwise().sum() - a.weights).cwiseAbs().sum() +
                  (p.colwise().sum().transpose() - b.weights).cwiseAbs().sum();
      result.violation_log.push_back(violation);
      if (violation < params.tol) {
        result.converged = true;
        ++it;
        break;
      }
    }
  }
  result.iterations = it;
  result.marginal_violation = violation;

  Eigen::MatrixXd p = detail::plan_from_potentials(c, f, g, lambda);
  detail::round_to_marginals(p, a.weights, b.weights);
  result.plan.m = std::move(p);
  result.plan.row_marginal = a.weights;
  result.plan.col_marginal = b.weights;
  result.cost = (result.plan.m.array() * c.array()).sum();
  return result;
}

struct BarycenterOptions {
  bool debiased = true;
};

/// Fixed-support entropic barycenter of two densities on the same grid with
/// weights (1-alpha, alpha), ground cost = squared grid distance. Uses
/// iterative Bregman projections in the log domain; the default debiased
/// variant removes the entropic blur so the endpoints reproduce the inputs.
inline DensityOnGrid entropic_barycenter(const DensityOnGrid& mu,
                                         const DensityOnGrid& nu, double alpha,
                                         const SinkhornParams& params,
                                         const BarycenterOptions& opts = {}) {
  mu.validate();
  nu.validate();
  if (mu.size() != nu.size())
    throw std::invalid_argument("entropic_barycenter: grid mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("entropic_barycenter: alpha out of [0,1]");
  params.validate();

  const int G = mu.size();
  const CostMatrix cost = CostMatrix::squared_grid(G);
  const double lambda = params.resolve_lambda(cost);
  const Eigen::MatrixXd lk = -cost.m / lambda;  // symmetric log-kernel

  const double w1 = 1.0 - alpha, w2 = alpha;
  Eigen::ArrayXd la1(G), la2(G);
  for (int i = 0; i < G; ++i) {
    la1[i] = std::log(mu.mass[i]);
    la2[i] = std::log(nu.mass[i]);
  }

  auto apply_kernel = [&](const Eigen::ArrayXd& x) {
    // (Sx)_i = LSE_j(lk_ij + x_j); lk is symmetric so this serves K and K^T.
    Eigen::ArrayXd out(G);
    Eigen::ArrayXd row(G);
    for (int i = 0; i < G; ++i) {
      for (int j = 0; j < G; ++j) row[j] = lk(i, j) + x[j];
      out[i] = detail::lse_max_shift(row);
    }
    return out;
  };

  const double neg_inf = -std::numeric_limits<double>::infinity();
  Eigen::ArrayXd g1 = Eigen::ArrayXd::Zero(G), g2 = Eigen::ArrayXd::Zero(G);
  Eigen::ArrayXd d = Eigen::ArrayXd::Zero(G);
  Eigen::ArrayXd b_prev = Eigen::ArrayXd::Constant(G, 1.0 / G);

  bool converged = false;
  double tv = std::numeric_limits<double>::infinity();
  for (int it = 0; it < params.max_iter; ++it) {
    Eigen::ArrayXd lbn = opts.debiased ? d : Eigen::ArrayXd::Zero(G);
    Eigen::ArrayXd s1, s2;
    if (w1 > 0.0) {
      const Eigen::ArrayXd f1 = (la1 - apply_kernel(g1)).unaryExpr(
          [&](double x) { return std::isnan(x) ? neg_inf : x; });
      s1 = apply_kernel(f1);
      lbn += w1 * s1;
    }
    if (w2 > 0.0) {
      const Eigen::ArrayXd f2 = (la2 - apply_kernel(g2)).unaryExpr(
          [&](double x) { return std::isnan(x) ? neg_inf : x; });
      s2 = apply_kernel(f2);
      lbn += w2 * s2;
    }
    if (w1 > 0.0) g1 = lbn - s1;
    if (w2 > 0.0) g2 = lbn - s2;
    if (opts.debiased) d = 0.5 * (d + lbn - apply_kernel(d));

    Eigen::ArrayXd b = lbn.exp();
    b /= b.sum();
    tv = 0.5 * (b - b_prev).abs().sum();
    b_prev = b;
    if (tv < params.tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw std::runtime_error(
        "entropic_barycenter: no convergence within max_iter (TV change " +
        std::to_string(tv) + ")");

  DensityOnGrid out;
  out.mass.assign(b_prev.data(), b_prev.data() + G);
  out.offset = w1 * mu.offset + w2 * nu.offset;
  out.scale = w1 * mu.scale + w2 * nu.scale;
  return out;
}

}  // namespace ecgot
