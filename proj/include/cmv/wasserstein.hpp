#pragma once

// Exact 1-Wasserstein distances between small weighted point clouds: a CDF
// sweep for dimension 1, a transportation-simplex solver for the general
// case, and the pathwise coupling upper bound. The two exact routes are
// implemented independently on purpose so they can cross-check each other.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmv/measure.hpp"

namespace cmv {

namespace detail {

inline double euclid(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = a[c] - b[c];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double norm(std::span<const double> a) {
  double s = 0.0;
  for (const double v : a) s += v * v;
  return std::sqrt(s);
}

// Primal transportation simplex for min sum f_ij c_ij subject to row sums a,
// column sums b, f >= 0. Northwest-corner start, tree potentials, Dantzig
// entering rule with a Bland fallback against cycling on degenerate bases.
class TransportSimplex {
 public:
  TransportSimplex(std::size_t n, std::size_t m, std::vector<double> cost)
      : n_(n), m_(m), cost_(std::move(cost)), flow_(n_ * m_, 0.0), basic_(n_ * m_, 0) {}

  double solve(const std::vector<double>& a, const std::vector<double>& b) {
    northwest(a, b);
    double cmax = 0.0;
    for (const double c : cost_) cmax = std::max(cmax, std::abs(c));
    const double eps = 1e-12 * (1.0 + cmax);
    const std::size_t dantzig_limit = 50 * n_ * m_ + 1000;
    const std::size_t hard_limit = 200 * n_ * m_ + 10000;
    std::vector<double> u(n_), v(m_);
    for (std::size_t iter = 0;; ++iter) {
      if (iter > hard_limit)
        throw std::runtime_error("w1_exact: transport solver did not converge");
      potentials(u, v);
      const auto [bi, bj] = entering(u, v, eps, iter >= dantzig_limit);
      if (bi == npos) break;
      pivot(bi, bj);
    }
    double obj = 0.0;
    for (std::size_t idx = 0; idx < flow_.size(); ++idx)
      if (flow_[idx] > 0.0) obj += flow_[idx] * cost_[idx];
    return obj;
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t cell(std::size_t i, std::size_t j) const { return i * m_ + j; }

  // Dantzig rule (most negative reduced cost), or Bland's first-negative
  // rule once the iteration budget suggests degenerate cycling.
  std::pair<std::size_t, std::size_t> entering(const std::vector<double>& u,
                                               const std::vector<double>& v, double eps,
                                               bool bland) const {
    std::size_t bi = npos, bj = npos;
    double best = -eps;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        const std::size_t cidx = cell(i, j);
        if (basic_[cidx]) continue;
        const double rc = cost_[cidx] - u[i] - v[j];
        if (rc < best) {
          best = rc;
          bi = i;
          bj = j;
          if (bland) return {bi, bj};
        }
      }
    }
    return {bi, bj};
  }

  void northwest(const std::vector<double>& a, const std::vector<double>& b) {
    std::size_t i = 0, j = 0;
    double ra = a[0], rb = b[0];
    while (true) {
      const double q = std::min(ra, rb);
      flow_[cell(i, j)] = q;
      basic_[cell(i, j)] = 1;
      ra -= q;
      rb -= q;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (ra == 0.0 && i < n_ - 1) {
        ++i;
        ra = a[i];
      } else if (j < m_ - 1) {
        ++j;
        rb = b[j];
      } else {
        ++i;
        ra = a[i];
      }
    }
  }

  // Solves u_i + v_j = c_ij over the basis tree, u[0] = 0. The basis always
  // has n+m-1 cells and spans all nodes, so one sweep reaches everything.
  void potentials(std::vector<double>& u, std::vector<double>& v) const {
    const std::size_t nodes = n_ + m_;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(nodes);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < m_; ++j)
        if (basic_[cell(i, j)]) {
          adj[i].push_back({n_ + j, cell(i, j)});
          adj[n_ + j].push_back({i, cell(i, j)});
        }
    std::vector<char> seen(nodes, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    u[0] = 0.0;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (const auto& [other, cidx] : adj[node]) {
        if (seen[other]) continue;
        seen[other] = 1;
        if (node < n_)
          v[other - n_] = cost_[cidx] - u[node];
        else
          u[other] = cost_[cidx] - v[node - n_];
        stack.push_back(other);
      }
    }
  }

  // Path of basic cells from column node bj back to row node bi; with the
  // entering cell (bi,bj) taken as "+", even path positions are "-".
  std::vector<std::size_t> cycle_path(std::size_t bi, std::size_t bj) const {
    const std::size_t nodes = n_ + m_;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(nodes);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < m_; ++j)
        if (basic_[cell(i, j)]) {
          adj[i].push_back({n_ + j, cell(i, j)});
          adj[n_ + j].push_back({i, cell(i, j)});
        }
    std::vector<std::size_t> parent(nodes, npos), via(nodes, npos);
    std::vector<char> seen(nodes, 0);
    std::vector<std::size_t> stack{bi};
    seen[bi] = 1;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      if (node == n_ + bj) break;
      for (const auto& [other, cidx] : adj[node]) {
        if (seen[other]) continue;
        seen[other] = 1;
        parent[other] = node;
        via[other] = cidx;
        stack.push_back(other);
      }
    }
    std::vector<std::size_t> path;
    for (std::size_t node = n_ + bj; node != bi; node = parent[node]) {
      if (parent[node] == npos)
        throw std::runtime_error("w1_exact: basis tree lost connectivity");
      path.push_back(via[node]);
    }
    return path;
  }

  void pivot(std::size_t bi, std::size_t bj) {
    const auto path = cycle_path(bi, bj);
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = npos;
    for (std::size_t idx = 0; idx < path.size(); idx += 2) {
      if (flow_[path[idx]] < theta) {
        theta = flow_[path[idx]];
        leave = path[idx];
      }
    }
    for (std::size_t idx = 0; idx < path.size(); ++idx) {
      if (idx % 2 == 0)
        flow_[path[idx]] = std::max(0.0, flow_[path[idx]] - theta);
      else
        flow_[path[idx]] += theta;
    }
    flow_[cell(bi, bj)] = theta;
    basic_[cell(bi, bj)] = 1;
    flow_[leave] = 0.0;
    basic_[leave] = 0;
  }

  std::size_t n_, m_;
  std::vector<double> cost_;
  std::vector<double> flow_;
  std::vector<char> basic_;
};

}  // namespace detail

/// Exact W1 on the line via the CDF identity: integrate |F_mu - F_nu|.
/// Coincident positions are merged during the sweep, so the result does not
/// depend on atom ordering.
inline double w1_1d(const WeightedEmpiricalMeasure& mu, const WeightedEmpiricalMeasure& nu) {
  if (mu.dim() != 1 || nu.dim() != 1)
    throw std::invalid_argument("w1_1d: measures must be one-dimensional");
  std::vector<std::size_t> su(mu.size()), sv(nu.size());
  std::iota(su.begin(), su.end(), 0);
  std::iota(sv.begin(), sv.end(), 0);
  std::sort(su.begin(), su.end(),
            [&](std::size_t a, std::size_t b) { return mu.position(a)[0] < mu.position(b)[0]; });
  std::sort(sv.begin(), sv.end(),
            [&](std::size_t a, std::size_t b) { return nu.position(a)[0] < nu.position(b)[0]; });
  double dist = 0.0, diff = 0.0, prev = 0.0;
  bool have_prev = false;
  std::size_t i = 0, j = 0;
  while (i < su.size() || j < sv.size()) {
    double x = std::numeric_limits<double>::infinity();
    if (i < su.size()) x = std::min(x, mu.position(su[i])[0]);
    if (j < sv.size()) x = std::min(x, nu.position(sv[j])[0]);
    if (have_prev && x > prev) dist += std::abs(diff) * (x - prev);
    while (i < su.size() && mu.position(su[i])[0] == x) diff += mu.weight(su[i++]);
    while (j < sv.size() && nu.position(sv[j])[0] == x) diff -= nu.weight(sv[j++]);
    prev = x;
    have_prev = true;
  }
  return dist;
}

/// Exact W1 in any dimension by solving the discrete transportation problem
/// with Euclidean ground cost. max_atoms guards the dense O(n*m) tableau;
/// raise it deliberately for larger instances.
inline double w1_exact(const WeightedEmpiricalMeasure& mu, const WeightedEmpiricalMeasure& nu,
                       std::size_t max_atoms = 256) {
  if (mu.dim() != nu.dim()) throw std::invalid_argument("w1_exact: dimension mismatch");
  if (mu.size() > max_atoms || nu.size() > max_atoms)
    throw std::invalid_argument("w1_exact: atom count exceeds cap " + std::to_string(max_atoms));
  const std::size_t n = mu.size(), m = nu.size();
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      cost[i * m + j] = detail::euclid(mu.position(i), nu.position(j));
  // Rescale demands so both marginals carry the same total mass exactly
  // enough for the northwest pass; the final basic cell absorbs the rest.
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < n; ++i) sa += mu.weight(i);
  for (std::size_t j = 0; j < m; ++j) sb += nu.weight(j);
  std::vector<double> b(nu.weights());
  const double scale = sa / sb;
  for (double& w : b) w *= scale;
  detail::TransportSimplex ts(n, m, std::move(cost));
  return ts.solve(mu.weights(), b);
}

/// Pathwise upper bound on W1 between two clouds whose atoms are paired by
/// index: sum_i |w_i - wt_i| |x_i| + sum_i wt_i |x_i - xt_i|.
inline double w1_coupling_bound(const WeightedEmpiricalMeasure& mu,
                                const WeightedEmpiricalMeasure& nu) {
  if (mu.size() != nu.size())
    throw std::invalid_argument("w1_coupling_bound: atom counts differ");
  if (mu.dim() != nu.dim())
    throw std::invalid_argument("w1_coupling_bound: dimension mismatch");
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    s1 += std::abs(mu.weight(i) - nu.weight(i)) * detail::norm(mu.position(i));
    s2 += nu.weight(i) * detail::euclid(mu.position(i), nu.position(i));
  }
  return s1 + s2;
}

}  // namespace cmv
