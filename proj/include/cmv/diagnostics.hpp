#pragma once

// Computable diagnostics from the convergence analysis: the exponential
// multiplier Psi, the stopping time tau_beta, the likelihood-martingale
// sanity check, the benchmark error statistic e_N, and log-log slope fits.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmv/measure.hpp"
#include "cmv/sde.hpp"

namespace cmv {

/// A particle trajectory paired with the synchronously coupled reference
/// trajectory on the same grid.
struct CoupledRun {
  Trajectory particle;
  Trajectory reference;
  double delta = 0.0;

  std::size_t steps() const { return particle.empty() ? 0 : particle.size() - 1; }
  std::size_t N() const { return particle.empty() ? 0 : particle.front().N; }

  void validate() const {
    if (particle.size() < 1 || particle.size() != reference.size())
      throw std::invalid_argument("coupled run: trajectories must have equal nonzero length");
    if (!(delta > 0.0)) throw std::invalid_argument("coupled run: delta must be positive");
    for (std::size_t s = 0; s < particle.size(); ++s) {
      if (particle[s].N != reference[s].N || particle[s].n != reference[s].n)
        throw std::invalid_argument("coupled run: ensemble shapes differ at step " +
                                    std::to_string(s));
    }
  }
};

namespace detail {

// Left-point accumulation of N * sum_k [1/N^2 + (w_k^2 + wbar_k^2)(1+|X_k|^2)]
// over the grid; entry j is the integral up to time j*delta.
inline std::vector<double> psi_exponent_accumulation(const CoupledRun& run) {
  run.validate();
  const std::size_t steps = run.steps();
  const double N = static_cast<double>(run.N());
  std::vector<double> acc(steps + 1, 0.0);
  double a = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    const auto& pe = run.particle[s];
    const auto& re = run.reference[s];
    const auto w = normalize_log_weights(std::span<const double>(pe.z));
    const auto wbar = normalize_log_weights(std::span<const double>(re.z));
    double sum = 0.0;
    for (std::size_t i = 0; i < pe.N; ++i) {
      double xsq = 0.0;
      for (std::size_t r = 0; r < pe.n; ++r) {
        const double v = pe.X[i * pe.n + r];
        xsq += v * v;
      }
      sum += 1.0 / (N * N) + (w[i] * w[i] + wbar[i] * wbar[i]) * (1.0 + xsq);
    }
    a += run.delta * N * sum;
    acc[s + 1] = a;
  }
  return acc;
}

}  // namespace detail

/// Psi_t = exp(-alpha * A_t) on the grid, A the left-point accumulation
/// above. Psi_0 = 1, and Psi is non-increasing since the integrand is
/// nonnegative.
inline std::vector<double> multiplier_psi(const CoupledRun& run, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("multiplier_psi: alpha must be positive");
  const auto acc = detail::psi_exponent_accumulation(run);
  std::vector<double> psi(acc.size());
  for (std::size_t j = 0; j < acc.size(); ++j) psi[j] = std::exp(-alpha * acc[j]);
  return psi;
}

/// First grid time at which the accumulated integrand reaches beta, or
/// nullopt if that never happens on [0, T].
inline std::optional<double> tau_beta(const CoupledRun& run, double beta) {
  if (beta < 0.0) throw std::invalid_argument("tau_beta: beta must be nonnegative");
  const auto acc = detail::psi_exponent_accumulation(run);
  for (std::size_t j = 0; j < acc.size(); ++j)
    if (acc[j] >= beta) return static_cast<double>(j) * run.delta;
  return std::nullopt;
}

struct LikelihoodCheck {
  double mean = 0.0;
  double stderr_mean = 0.0;
  double zscore = 0.0;
  bool pass = false;
};

/// Monte Carlo check of E[L_T] = 1 from independent samples of the final
/// log-likelihood. Passes when |mean - 1| <= z * stderr.
inline LikelihoodCheck likelihood_mean_check(std::span<const double> logliks, double zscore) {
  if (logliks.size() < 2)
    throw std::invalid_argument("likelihood_mean_check: needs at least 2 samples");
  const double n = static_cast<double>(logliks.size());
  double mean = 0.0;
  for (const double l : logliks) mean += std::exp(l);
  mean /= n;
  double ss = 0.0;
  for (const double l : logliks) {
    const double d = std::exp(l) - mean;
    ss += d * d;
  }
  const double se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  LikelihoodCheck out;
  out.mean = mean;
  out.stderr_mean = se;
  out.zscore = zscore;
  out.pass = std::abs(mean - 1.0) <= zscore * se;
  return out;
}

/// Reads the final-snapshot log-likelihoods out of a trajectory.
inline LikelihoodCheck likelihood_mean_check(const Trajectory& traj, double zscore) {
  if (traj.empty()) throw std::invalid_argument("likelihood_mean_check: empty trajectory");
  return likelihood_mean_check(std::span<const double>(traj.back().loglik), zscore);
}

/// e_N = (1/N) max_n sum_i |X_i(n) - Xbar_i(n)|^2 over grid points.
inline double error_eN(const CoupledRun& run) {
  run.validate();
  double worst = 0.0;
  for (std::size_t s = 0; s < run.particle.size(); ++s) {
    const auto& pe = run.particle[s];
    const auto& re = run.reference[s];
    double sum = 0.0;
    for (std::size_t i = 0; i < pe.N; ++i) {
      double dsq = 0.0;
      for (std::size_t r = 0; r < pe.n; ++r) {
        const double d = pe.X[i * pe.n + r] - re.X[i * pe.n + r];
        dsq += d * d;
      }
      sum += dsq;
    }
    worst = std::max(worst, sum / static_cast<double>(pe.N));
  }
  return worst;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least-squares line through (ln N, ln error). Requires two distinct N and
/// strictly positive values. Constant data fits a horizontal line (r2 = 1).
inline SlopeFit fit_slope(std::span<const double> Ns, std::span<const double> errors) {
  if (Ns.size() != errors.size())
    throw std::invalid_argument("fit_slope: mismatched input lengths");
  if (Ns.size() < 2) throw std::invalid_argument("fit_slope: needs at least 2 points");
  std::vector<double> x(Ns.size()), y(Ns.size());
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    if (!(Ns[i] > 0.0)) throw std::invalid_argument("fit_slope: N values must be positive");
    if (!(errors[i] > 0.0)) throw std::invalid_argument("fit_slope: errors must be positive");
    x[i] = std::log(Ns[i]);
    y[i] = std::log(errors[i]);
  }
  const double n = static_cast<double>(x.size());
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= n;
  ym /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * (y[i] - ym);
    syy += (y[i] - ym) * (y[i] - ym);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_slope: needs at least 2 distinct N");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ym - fit.slope * xm;
  if (syy == 0.0) {
    fit.r2 = 1.0;
  } else {
    double ssres = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double resid = y[i] - (fit.intercept + fit.slope * x[i]);
      ssres += resid * resid;
    }
    fit.r2 = 1.0 - ssres / syy;
  }
  return fit;
}

struct DiagnosticsReport {
  double psi_min = 1.0;
  std::optional<double> tau = std::nullopt;  // absent = never exceeded beta
  double eN = 0.0;
  double likelihood_mean = 1.0;
  std::optional<double> slope = std::nullopt;
};

inline nlohmann::json to_json(const DiagnosticsReport& rep) {
  nlohmann::json j;
  j["psi_min"] = rep.psi_min;
  if (rep.tau)
    j["tau_beta"] = *rep.tau;
  else
    j["tau_beta"] = nullptr;
  j["eN"] = rep.eN;
  j["likelihood_mean"] = rep.likelihood_mean;
  if (rep.slope)
    j["slope"] = *rep.slope;
  else
    j["slope"] = nullptr;
  return j;
}

}  // namespace cmv
