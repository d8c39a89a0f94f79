#pragma once

// Coefficient bundles for conditional McKean-Vlasov dynamics, the weight
// functionals M, H, R, the P-to-Q drift correction, and the closed-form
// scalar benchmark family.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmv/measure.hpp"

namespace cmv {

enum class MeasureForm { P, Q };

/// Path functionals the coefficients may read: `shared` is built from the
/// observation path and is identical for all particles; `per_particle[i]`
/// is built from particle i's own driving path.
struct AuxState {
  std::vector<double> shared;
  std::vector<std::vector<double>> per_particle;
};

/// Coefficient evaluator. Returns a flat vector: length n for the drift,
/// n*m (row-major) for diffusion1, n*k for diffusion2, k for the
/// observation function. A default-constructed (empty) std::function is
/// treated as identically zero.
using Coefficient = std::function<std::vector<double>(
    double t, std::span<const double> x, const WeightedEmpiricalMeasure& mu,
    std::span<const double> shared_aux, std::span<const double> particle_aux)>;

struct ModelSpec {
  std::size_t n = 1;  // state dimension
  std::size_t m = 1;  // driving-noise dimension
  std::size_t k = 1;  // observation dimension
  Coefficient drift;
  Coefficient diffusion1;
  Coefficient diffusion2;
  Coefficient obs;
  MeasureForm form = MeasureForm::Q;
  double bound = 0.0;  // declared growth/Lipschitz constant, metadata only

  std::size_t shared_aux_dim = 0;
  std::size_t particle_aux_dim = 0;
  std::vector<double> shared_aux_init;
  std::vector<double> particle_aux_init;
  // Left-point updates: called with the grid time at the start of the step.
  std::function<void(double t, std::span<double> shared, std::span<const double> dY, double dt)>
      shared_aux_update;
  std::function<void(double t, std::span<double> pp, std::span<const double> dW, double dt)>
      particle_aux_update;
};

namespace detail {

inline std::vector<double> eval_coefficient(const Coefficient& f, const char* what,
                                            std::size_t want, double t,
                                            std::span<const double> x,
                                            const WeightedEmpiricalMeasure& mu,
                                            std::span<const double> shared_aux,
                                            std::span<const double> particle_aux) {
  if (!f) return std::vector<double>(want, 0.0);
  auto out = f(t, x, mu, shared_aux, particle_aux);
  if (out.size() != want)
    throw std::runtime_error(std::string(what) + ": evaluator returned length " +
                             std::to_string(out.size()) + ", expected " + std::to_string(want));
  return out;
}

inline std::span<const double> particle_aux_of(const AuxState& aux, std::size_t i) {
  if (aux.per_particle.empty()) return {};
  return {aux.per_particle[i].data(), aux.per_particle[i].size()};
}

// M, H, R for one probe point from already-evaluated observation values.
// h_atoms is mu.size() rows of length k; hx is h at the probe. M is
// accumulated in difference form sum_j w_j (h(x) - h(X_j)) so that a
// constant h yields literal zeros, and H as -hbar.M so H inherits them.
struct WeightTerms {
  std::vector<double> M;
  std::vector<double> hbar;
  double H = 0.0;
  double R = 0.0;
};

inline WeightTerms weight_terms_from_values(std::span<const double> hx,
                                            std::span<const double> h_atoms,
                                            std::span<const double> w, std::size_t k) {
  WeightTerms out;
  out.M.assign(k, 0.0);
  out.hbar.assign(k, 0.0);
  for (std::size_t j = 0; j < w.size(); ++j) {
    for (std::size_t c = 0; c < k; ++c) {
      const double hj = h_atoms[j * k + c];
      out.M[c] += w[j] * (hx[c] - hj);
      out.hbar[c] += w[j] * hj;
    }
  }
  double hm = 0.0, msq = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    hm += out.hbar[c] * out.M[c];
    msq += out.M[c] * out.M[c];
  }
  out.H = -hm;
  out.R = out.H - 0.5 * msq;
  return out;
}

inline WeightTerms weight_terms(const ModelSpec& spec, double t, std::span<const double> x,
                                std::span<const double> x_aux,
                                const WeightedEmpiricalMeasure& mu, const AuxState& aux) {
  if (!aux.per_particle.empty() && aux.per_particle.size() != mu.size())
    throw std::invalid_argument("weight terms: per-particle aux count does not match atoms");
  const auto hx = eval_coefficient(spec.obs, "obs", spec.k, t, x, mu, aux.shared, x_aux);
  std::vector<double> h_atoms(mu.size() * spec.k);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const auto hj = eval_coefficient(spec.obs, "obs", spec.k, t, mu.position(j), mu, aux.shared,
                                     particle_aux_of(aux, j));
    for (std::size_t c = 0; c < spec.k; ++c) h_atoms[j * spec.k + c] = hj[c];
  }
  return weight_terms_from_values(hx, h_atoms, mu.weights(), spec.k);
}

}  // namespace detail

/// M(x, mu) = h(x, mu) - integral of h over mu's atoms.
inline std::vector<double> compute_M(const ModelSpec& spec, double t, std::span<const double> x,
                                     std::span<const double> x_aux,
                                     const WeightedEmpiricalMeasure& mu, const AuxState& aux) {
  return detail::weight_terms(spec, t, x, x_aux, mu, aux).M;
}

/// H(x, mu) = |hbar|^2 - h(x, mu)^T hbar with hbar the mu-average of h.
inline double compute_H(const ModelSpec& spec, double t, std::span<const double> x,
                        std::span<const double> x_aux, const WeightedEmpiricalMeasure& mu,
                        const AuxState& aux) {
  return detail::weight_terms(spec, t, x, x_aux, mu, aux).H;
}

/// R = H - |M|^2 / 2, the drift of the log-weight dynamics.
inline double compute_R(const ModelSpec& spec, double t, std::span<const double> x,
                        std::span<const double> x_aux, const WeightedEmpiricalMeasure& mu,
                        const AuxState& aux) {
  return detail::weight_terms(spec, t, x, x_aux, mu, aux).R;
}

/// Rewrites a physical-measure (P-form) model as reference-measure dynamics
/// by replacing the drift with b - diffusion2 * h. Q-form input passes
/// through unchanged, so the map is idempotent.
inline ModelSpec to_q_form(const ModelSpec& spec) {
  if (spec.form == MeasureForm::Q) return spec;
  ModelSpec out = spec;
  out.form = MeasureForm::Q;
  if (!spec.diffusion2) return out;  // zero correction
  out.drift = [b = spec.drift, s2 = spec.diffusion2, h = spec.obs, n = spec.n, k = spec.k](
                  double t, std::span<const double> x, const WeightedEmpiricalMeasure& mu,
                  std::span<const double> sa, std::span<const double> pa) {
    auto d = detail::eval_coefficient(b, "drift", n, t, x, mu, sa, pa);
    const auto S2 = detail::eval_coefficient(s2, "diffusion2", n * k, t, x, mu, sa, pa);
    const auto hv = detail::eval_coefficient(h, "obs", k, t, x, mu, sa, pa);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < k; ++c) d[r] -= S2[r * k + c] * hv[c];
    return d;
  };
  return out;
}

/// Scalar benchmark family. The state starts at 2*x0; the closed form
/// divides by b0, hence the restriction.
struct BenchmarkParams {
  double b0 = 1.0;
  double c0 = 1.0;
  double d0 = 1.0;
  double x0 = 1.0;

  bool operator==(const BenchmarkParams&) const = default;
};

inline void validate(const BenchmarkParams& p) {
  if (p.b0 == 0.0) throw std::invalid_argument("benchmark: b0 must be nonzero");
}

/// Closed-form solution at time t given the particle's Brownian value W_t
/// and the observation functional I_t = int_0^t e^{b0 r} dY_r.
inline double exact_solution_value(const BenchmarkParams& p, double t, double W, double I) {
  validate(p);
  const double cx = p.c0 * p.x0;
  const double part1 = p.x0 * std::exp((p.b0 - 0.5 * p.d0 * p.d0) * t + p.d0 * W);
  const double part2 =
      p.x0 * std::exp(cx * I - cx * cx / (4.0 * p.b0) * std::expm1(2.0 * p.b0 * t) + p.b0 * t);
  return part1 + part2;
}

/// Q-form scalar model (n = m = k = 1) whose coefficients implement
///   b  = b0 (x + mu(L) - R_t),   sigma1 = d0 (x + mu(L) - S_t),
///   s2 = c0 x0 e^{b0 t} (x - T_t),   h = c0 (x + mu(L) - U_t),
/// with R_t = x0 e^{b0 t}(1 + E_t), S_t = x0 e^{b0 t}(1 + 2 E_t),
/// T_t = x0 exp((b0 - d0^2/2) t + d0 W_t), U_t = 2 x0 e^{b0 t} E_t + T_t and
/// E_t = exp(c0 x0 I_t - (c0 x0)^2 (e^{2 b0 t} - 1) / (4 b0)). The shared
/// aux carries I_t (left-point sums of e^{b0 s} dY); the per-particle aux
/// carries that particle's own W_t.
inline ModelSpec benchmark_model(const BenchmarkParams& p) {
  validate(p);
  const double b0 = p.b0, c0 = p.c0, d0 = p.d0, x0 = p.x0;

  ModelSpec spec;
  spec.n = spec.m = spec.k = 1;
  spec.form = MeasureForm::Q;
  spec.bound = std::max({std::abs(b0), std::abs(c0), std::abs(d0)});
  spec.shared_aux_dim = 1;
  spec.particle_aux_dim = 1;
  spec.shared_aux_init = {0.0};
  spec.particle_aux_init = {0.0};
  spec.shared_aux_update = [b0](double t, std::span<double> sh, std::span<const double> dY,
                                double) { sh[0] += std::exp(b0 * t) * dY[0]; };
  spec.particle_aux_update = [](double, std::span<double> pp, std::span<const double> dW,
                                double) { pp[0] += dW[0]; };

  const auto efac = [b0, c0, x0](double t, double I) {
    const double cx = c0 * x0;
    return std::exp(cx * I - cx * cx / (4.0 * b0) * std::expm1(2.0 * b0 * t));
  };
  const auto t_proc = [b0, d0, x0](double t, double W) {
    return x0 * std::exp((b0 - 0.5 * d0 * d0) * t + d0 * W);
  };

  spec.drift = [b0, x0, efac](double t, std::span<const double> x,
                              const WeightedEmpiricalMeasure& mu, std::span<const double> sh,
                              std::span<const double>) {
    const double mean = integrate_linear(mu)[0];
    const double r_proc = x0 * std::exp(b0 * t) * (1.0 + efac(t, sh[0]));
    return std::vector<double>{b0 * (x[0] + mean - r_proc)};
  };
  spec.diffusion1 = [d0, b0, x0, efac](double t, std::span<const double> x,
                                       const WeightedEmpiricalMeasure& mu,
                                       std::span<const double> sh, std::span<const double>) {
    const double mean = integrate_linear(mu)[0];
    const double s_proc = x0 * std::exp(b0 * t) * (1.0 + 2.0 * efac(t, sh[0]));
    return std::vector<double>{d0 * (x[0] + mean - s_proc)};
  };
  spec.diffusion2 = [b0, c0, x0, t_proc](double t, std::span<const double> x,
                                         const WeightedEmpiricalMeasure&,
                                         std::span<const double>, std::span<const double> pp) {
    return std::vector<double>{c0 * x0 * std::exp(b0 * t) * (x[0] - t_proc(t, pp[0]))};
  };
  spec.obs = [b0, c0, x0, efac, t_proc](double t, std::span<const double> x,
                                        const WeightedEmpiricalMeasure& mu,
                                        std::span<const double> sh, std::span<const double> pp) {
    const double mean = integrate_linear(mu)[0];
    const double u_proc = 2.0 * x0 * std::exp(b0 * t) * efac(t, sh[0]) + t_proc(t, pp[0]);
    return std::vector<double>{c0 * (x[0] + mean - u_proc)};
  };
  return spec;
}

}  // namespace cmv
