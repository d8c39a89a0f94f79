#pragma once

// Brownian path bundles and the explicit Euler-Maruyama discretization of
// the coupled (positions, log-weights) particle system under the reference
// measure, plus the synchronously-coupled exact benchmark trajectories.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmv/measure.hpp"
#include "cmv/model.hpp"
#include "cmv/rng.hpp"

namespace cmv {

struct SeedRecord {
  rng::u64 seed = 0;
  std::size_t N = 0, m = 0, k = 0, steps = 0;
  double delta = 0.0;

  bool operator==(const SeedRecord&) const = default;
};

/// Pre-generated increments on a uniform grid. dW is laid out step-major:
/// particle i's component c at step s sits at dW[(s*N + i)*m + c], so one
/// step's slice for all particles is contiguous. dY is steps x k.
/// Stream assignment: particle i draws from stream(seed, i) in (step,
/// component) order; the observation path draws from stream(seed, N).
struct PathBundle {
  double delta = 0.0;
  std::size_t steps = 0, N = 0, m = 0, k = 0;
  std::vector<double> dW;
  std::vector<double> dY;
  SeedRecord seed_record;

  std::span<const double> dw_step(std::size_t s) const { return {dW.data() + s * N * m, N * m}; }
  std::span<const double> dw(std::size_t s, std::size_t i) const {
    return {dW.data() + (s * N + i) * m, m};
  }
  std::span<const double> dy(std::size_t s) const { return {dY.data() + s * k, k}; }
};

struct SimulationConfig {
  std::size_t N = 10;
  double delta = 1e-4;
  double T = 0.1;
  bool renormalize_each_step = true;
  rng::u64 seed = 0;
  std::vector<double> x;  // initial state, one copy per particle

  std::size_t steps() const {
    if (!(delta > 0.0) || !(T > 0.0))
      throw std::invalid_argument("simulation config: delta and T must be positive");
    const auto s = static_cast<long long>(std::llround(T / delta));
    if (s < 1) throw std::invalid_argument("simulation config: steps = round(T/delta) must be >= 1");
    return static_cast<std::size_t>(s);
  }

  void validate() const {
    if (N < 1) throw std::invalid_argument("simulation config: N must be >= 1");
    if (x.empty()) throw std::invalid_argument("simulation config: initial state is empty");
    steps();
  }
};

/// One Euler state: positions, log-weights, running log-likelihoods (the
/// h-integral reconstruction of ln L), and path functionals at time t.
struct ParticleEnsemble {
  double t = 0.0;
  std::size_t step = 0;
  std::size_t N = 0;
  std::size_t n = 1;
  std::vector<double> X;       // N*n, row-major
  std::vector<double> z;       // N
  std::vector<double> loglik;  // N
  AuxState aux;

  std::span<const double> x_row(std::size_t i) const { return {X.data() + i * n, n}; }
};

using Trajectory = std::vector<ParticleEnsemble>;

inline PathBundle generate_paths(const SimulationConfig& cfg, std::size_t m, std::size_t k) {
  cfg.validate();
  if (m < 1 || k < 1) throw std::invalid_argument("generate_paths: dims must be >= 1");
  PathBundle pb;
  pb.delta = cfg.delta;
  pb.steps = cfg.steps();
  pb.N = cfg.N;
  pb.m = m;
  pb.k = k;
  pb.dW.resize(pb.steps * pb.N * m);
  pb.dY.resize(pb.steps * k);
  const double sd = std::sqrt(cfg.delta);
  for (std::size_t i = 0; i < pb.N; ++i) {
    rng::NormalStream stream(cfg.seed, i);
    for (std::size_t s = 0; s < pb.steps; ++s)
      for (std::size_t c = 0; c < m; ++c) pb.dW[(s * pb.N + i) * m + c] = sd * stream.next();
  }
  rng::NormalStream ystream(cfg.seed, pb.N);
  for (std::size_t s = 0; s < pb.steps; ++s)
    for (std::size_t c = 0; c < k; ++c) pb.dY[s * k + c] = sd * ystream.next();
  pb.seed_record = {cfg.seed, pb.N, m, k, pb.steps, cfg.delta};
  return pb;
}

/// Rebuilds a bundle bit-exactly from its seed record.
inline PathBundle regenerate_paths(const SeedRecord& rec) {
  SimulationConfig cfg;
  cfg.N = rec.N;
  cfg.delta = rec.delta;
  cfg.T = rec.delta * static_cast<double>(rec.steps);
  cfg.seed = rec.seed;
  cfg.x = {0.0};
  PathBundle pb = generate_paths(cfg, rec.m, rec.k);
  pb.steps = rec.steps;  // guard against T/delta re-rounding
  return pb;
}

namespace detail {

// One explicit step of the log-weight and log-likelihood dynamics:
//   z_i += R(x_i, mu) dt + M(x_i, mu) . dY,  ll_i += h_i . dY - |h_i|^2 dt/2,
// with every h evaluated at the left grid point. Positions are read through
// mu; callers mutate X afterwards.
inline void advance_log_weights(const ModelSpec& spec, double t,
                                const WeightedEmpiricalMeasure& mu, const AuxState& aux,
                                std::vector<double>& z, std::vector<double>& loglik,
                                std::span<const double> dY, double delta) {
  if (!spec.obs) return;  // h == 0: weights and likelihoods are frozen
  const std::size_t N = mu.size(), k = spec.k;
  std::vector<double> h_atoms(N * k);
  for (std::size_t j = 0; j < N; ++j) {
    const auto hj = eval_coefficient(spec.obs, "obs", k, t, mu.position(j), mu, aux.shared,
                                     particle_aux_of(aux, j));
    for (std::size_t c = 0; c < k; ++c) h_atoms[j * k + c] = hj[c];
  }
  const auto& w = mu.weights();
  for (std::size_t i = 0; i < N; ++i) {
    const std::span<const double> hx{h_atoms.data() + i * k, k};
    const auto wt = weight_terms_from_values(hx, h_atoms, w, k);
    double mdy = 0.0, hdy = 0.0, hsq = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      mdy += wt.M[c] * dY[c];
      hdy += hx[c] * dY[c];
      hsq += hx[c] * hx[c];
    }
    z[i] += wt.R * delta + mdy;
    loglik[i] += hdy - 0.5 * hsq * delta;
  }
}

inline void check_finite(const ParticleEnsemble& ens) {
  for (std::size_t i = 0; i < ens.N; ++i) {
    bool ok = std::isfinite(ens.z[i]);
    for (std::size_t r = 0; ok && r < ens.n; ++r) ok = std::isfinite(ens.X[i * ens.n + r]);
    if (!ok)
      throw std::runtime_error("euler_step: non-finite state for particle " + std::to_string(i) +
                               " at step " + std::to_string(ens.step));
  }
}

inline void advance_aux(const ModelSpec& spec, double t, AuxState& aux,
                        std::span<const double> dY, std::span<const double> dW_flat,
                        std::size_t N, std::size_t m, double delta) {
  if (spec.shared_aux_update) spec.shared_aux_update(t, std::span<double>(aux.shared), dY, delta);
  if (spec.particle_aux_update) {
    for (std::size_t i = 0; i < N; ++i)
      spec.particle_aux_update(t, std::span<double>(aux.per_particle[i]),
                               dW_flat.subspan(i * m, m), delta);
  }
}

}  // namespace detail

/// One explicit Euler-Maruyama step of the coupled system. Coefficients are
/// frozen at the current grid point; aux functionals advance by one
/// left-point increment; if renormalize is set, z is shifted so that
/// logsumexp(z) = 0.
inline ParticleEnsemble euler_step(const ParticleEnsemble& in, const ModelSpec& spec,
                                   std::span<const double> dW, std::span<const double> dY,
                                   double delta, bool renormalize) {
  if (spec.form != MeasureForm::Q)
    throw std::invalid_argument("euler_step: model must be in Q form (apply to_q_form first)");
  const std::size_t N = in.N, n = spec.n, m = spec.m, k = spec.k;
  if (in.n != n) throw std::invalid_argument("euler_step: state dimension mismatch");
  if (dW.size() != N * m) throw std::invalid_argument("euler_step: dW slice has wrong size");
  if (dY.size() != k) throw std::invalid_argument("euler_step: dY slice has wrong size");

  ParticleEnsemble out = in;
  const double t = in.t;
  const auto w = normalize_log_weights(std::span<const double>(in.z));
  const WeightedEmpiricalMeasure mu(n, in.X, w);

  detail::advance_log_weights(spec, t, mu, in.aux, out.z, out.loglik, dY, delta);

  // State update; all coefficient evaluations read the pre-step positions.
  std::vector<double> xnew(N * n);
  for (std::size_t i = 0; i < N; ++i) {
    const auto xi = in.x_row(i);
    const auto pa = detail::particle_aux_of(in.aux, i);
    const auto b = detail::eval_coefficient(spec.drift, "drift", n, t, xi, mu, in.aux.shared, pa);
    const auto s1 = spec.diffusion1 ? detail::eval_coefficient(spec.diffusion1, "diffusion1",
                                                               n * m, t, xi, mu, in.aux.shared, pa)
                                    : std::vector<double>();
    const auto s2 = spec.diffusion2 ? detail::eval_coefficient(spec.diffusion2, "diffusion2",
                                                               n * k, t, xi, mu, in.aux.shared, pa)
                                    : std::vector<double>();
    for (std::size_t r = 0; r < n; ++r) {
      double acc = xi[r] + b[r] * delta;
      if (!s1.empty())
        for (std::size_t c = 0; c < m; ++c) acc += s1[r * m + c] * dW[i * m + c];
      if (!s2.empty())
        for (std::size_t c = 0; c < k; ++c) acc += s2[r * k + c] * dY[c];
      xnew[i * n + r] = acc;
    }
  }
  out.X = std::move(xnew);

  detail::advance_aux(spec, t, out.aux, dY, dW, N, m, delta);
  out.step = in.step + 1;
  out.t = static_cast<double>(out.step) * delta;
  detail::check_finite(out);
  if (renormalize) {
    const double lse = logsumexp(std::span<const double>(out.z));
    for (double& v : out.z) v -= lse;
  }
  return out;
}

/// Runs the full particle system. Snapshot 0 has every particle at cfg.x
/// and z = ln(1/N); snapshot s+1 is euler_step applied to snapshot s.
inline Trajectory simulate_particle_system(const SimulationConfig& cfg, const ModelSpec& spec_in,
                                           const PathBundle& pb) {
  cfg.validate();
  const ModelSpec spec = to_q_form(spec_in);
  if (cfg.x.size() != spec.n)
    throw std::invalid_argument("simulate: initial state dimension does not match model");
  if (pb.N != cfg.N || pb.m != spec.m || pb.k != spec.k || pb.steps != cfg.steps() ||
      pb.delta != cfg.delta)
    throw std::invalid_argument("simulate: path bundle does not match config/model dims");

  ParticleEnsemble ens;
  ens.N = cfg.N;
  ens.n = spec.n;
  ens.X.resize(cfg.N * spec.n);
  for (std::size_t i = 0; i < cfg.N; ++i)
    for (std::size_t r = 0; r < spec.n; ++r) ens.X[i * spec.n + r] = cfg.x[r];
  ens.z.assign(cfg.N, std::log(1.0 / static_cast<double>(cfg.N)));
  ens.loglik.assign(cfg.N, 0.0);
  if (spec.shared_aux_dim > 0) ens.aux.shared = spec.shared_aux_init;
  if (spec.particle_aux_dim > 0)
    ens.aux.per_particle.assign(cfg.N, spec.particle_aux_init);

  Trajectory traj;
  traj.reserve(pb.steps + 1);
  traj.push_back(ens);
  for (std::size_t s = 0; s < pb.steps; ++s) {
    ens = euler_step(ens, spec, pb.dw_step(s), pb.dy(s), cfg.delta, cfg.renormalize_each_step);
    traj.push_back(ens);
  }
  return traj;
}

/// Benchmark closed form evaluated on the whole grid for one particle, with
/// W and I accumulated from the same increments (and in the same order) the
/// particle system consumes.
inline std::vector<double> exact_solution(const BenchmarkParams& p, const PathBundle& pb,
                                          std::size_t particle_index) {
  validate(p);
  if (pb.m != 1 || pb.k != 1)
    throw std::invalid_argument("exact_solution: benchmark paths must be scalar (m = k = 1)");
  if (particle_index >= pb.N) throw std::invalid_argument("exact_solution: particle index out of range");
  std::vector<double> out(pb.steps + 1);
  double W = 0.0, I = 0.0;
  out[0] = exact_solution_value(p, 0.0, W, I);
  for (std::size_t s = 0; s < pb.steps; ++s) {
    const double ts = static_cast<double>(s) * pb.delta;
    I += std::exp(p.b0 * ts) * pb.dY[s];
    W += pb.dW[(s * pb.N + particle_index)];
    out[s + 1] = exact_solution_value(p, static_cast<double>(s + 1) * pb.delta, W, I);
  }
  return out;
}

/// Synchronously coupled reference ensemble: exact trajectories driven by
/// the SAME increments as the particle system, with reference log-weights
/// reconstructed by integrating the identical log-weight dynamics along the
/// exact positions.
inline Trajectory simulate_reference(const BenchmarkParams& p, const PathBundle& pb,
                                     bool renormalize = true) {
  validate(p);
  if (pb.m != 1 || pb.k != 1)
    throw std::invalid_argument("simulate_reference: benchmark paths must be scalar");
  const ModelSpec spec = benchmark_model(p);
  const std::size_t N = pb.N;

  std::vector<std::vector<double>> exact(N);
  for (std::size_t i = 0; i < N; ++i) exact[i] = exact_solution(p, pb, i);

  ParticleEnsemble ens;
  ens.N = N;
  ens.n = 1;
  ens.X.resize(N);
  for (std::size_t i = 0; i < N; ++i) ens.X[i] = exact[i][0];
  ens.z.assign(N, std::log(1.0 / static_cast<double>(N)));
  ens.loglik.assign(N, 0.0);
  ens.aux.shared = spec.shared_aux_init;
  ens.aux.per_particle.assign(N, spec.particle_aux_init);

  Trajectory traj;
  traj.reserve(pb.steps + 1);
  traj.push_back(ens);
  for (std::size_t s = 0; s < pb.steps; ++s) {
    const double t = ens.t;
    const auto w = normalize_log_weights(std::span<const double>(ens.z));
    const WeightedEmpiricalMeasure mu(1, ens.X, w);
    detail::advance_log_weights(spec, t, mu, ens.aux, ens.z, ens.loglik, pb.dy(s), pb.delta);
    detail::advance_aux(spec, t, ens.aux, pb.dy(s), pb.dw_step(s), N, 1, pb.delta);
    for (std::size_t i = 0; i < N; ++i) ens.X[i] = exact[i][s + 1];
    ens.step = s + 1;
    ens.t = static_cast<double>(s + 1) * pb.delta;
    detail::check_finite(ens);
    if (renormalize) {
      const double lse = logsumexp(std::span<const double>(ens.z));
      for (double& v : ens.z) v -= lse;
    }
    traj.push_back(ens);
  }
  return traj;
}

}  // namespace cmv
