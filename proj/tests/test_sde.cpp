#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "cmv/model.hpp"
#include "cmv/sde.hpp"

namespace {

using cmv::MeasureForm;
using cmv::ModelSpec;
using cmv::ParticleEnsemble;
using cmv::PathBundle;
using cmv::SimulationConfig;
using cmv::WeightedEmpiricalMeasure;

cmv::Coefficient constant(double value, std::size_t len) {
  return [value, len](double, std::span<const double>, const WeightedEmpiricalMeasure&,
                      std::span<const double>, std::span<const double>) {
    return std::vector<double>(len, value);
  };
}

SimulationConfig scalar_config(std::size_t N, double delta, double T, cmv::rng::u64 seed) {
  SimulationConfig cfg;
  cfg.N = N;
  cfg.delta = delta;
  cfg.T = T;
  cfg.seed = seed;
  cfg.x = {1.0};
  return cfg;
}

ParticleEnsemble make_ensemble(const ModelSpec& spec, std::vector<double> X,
                               std::vector<double> z) {
  ParticleEnsemble ens;
  ens.N = z.size();
  ens.n = spec.n;
  ens.X = std::move(X);
  ens.z = std::move(z);
  ens.loglik.assign(ens.N, 0.0);
  if (spec.shared_aux_dim > 0) ens.aux.shared = spec.shared_aux_init;
  if (spec.particle_aux_dim > 0) ens.aux.per_particle.assign(ens.N, spec.particle_aux_init);
  return ens;
}

PathBundle manual_bundle(std::size_t steps, std::size_t N, std::vector<double> dW,
                         std::vector<double> dY, double delta) {
  PathBundle pb;
  pb.delta = delta;
  pb.steps = steps;
  pb.N = N;
  pb.m = 1;
  pb.k = 1;
  pb.dW = std::move(dW);
  pb.dY = std::move(dY);
  return pb;
}

}  // namespace

TEST_CASE("generate_paths shapes and grid arithmetic") {
  const auto cfg = scalar_config(3, 0.1, 0.1, 7);
  const PathBundle pb = cmv::generate_paths(cfg, 2, 1);
  CHECK(pb.steps == 1);
  CHECK(pb.dW.size() == 1 * 3 * 2);
  CHECK(pb.dY.size() == 1);
  CHECK(pb.seed_record.seed == 7);

  auto bad = scalar_config(3, 0.1, 0.04, 7);
  CHECK_THROWS_AS(cmv::generate_paths(bad, 1, 1), std::invalid_argument);
}

TEST_CASE("generate_paths matches the documented stream layout") {
  const auto cfg = scalar_config(4, 0.01, 0.05, 99);
  const PathBundle pb = cmv::generate_paths(cfg, 2, 3);
  const double sd = std::sqrt(cfg.delta);

  for (std::size_t i = 0; i < pb.N; ++i) {
    cmv::rng::NormalStream stream(cfg.seed, i);
    for (std::size_t s = 0; s < pb.steps; ++s)
      for (std::size_t c = 0; c < 2; ++c) CHECK(pb.dw(s, i)[c] == sd * stream.next());
  }
  cmv::rng::NormalStream ystream(cfg.seed, pb.N);
  for (std::size_t s = 0; s < pb.steps; ++s)
    for (std::size_t c = 0; c < 3; ++c) CHECK(pb.dy(s)[c] == sd * ystream.next());
}

TEST_CASE("path increments have variance delta") {
  const auto cfg = scalar_config(100, 1e-3, 1.0, 123);
  const PathBundle pb = cmv::generate_paths(cfg, 1, 1);
  REQUIRE(pb.dW.size() >= 100000);
  double sum = 0.0;
  double sumsq = 0.0;
  for (const double v : pb.dW) {
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(pb.dW.size());
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(var - cfg.delta) < 0.05 * cfg.delta);
}

TEST_CASE("regenerate_paths reproduces a bundle bit-exactly") {
  const auto cfg = scalar_config(5, 0.02, 0.1, 2024);
  const PathBundle pb = cmv::generate_paths(cfg, 1, 1);
  const PathBundle again = cmv::regenerate_paths(pb.seed_record);
  CHECK(again.dW == pb.dW);
  CHECK(again.dY == pb.dY);
  CHECK(again.seed_record == pb.seed_record);
}

TEST_CASE("euler_step requires Q form and matching slice sizes") {
  ModelSpec spec;
  spec.form = MeasureForm::P;
  auto ens = make_ensemble(spec, {1.0}, {0.0});
  const std::vector<double> dw{0.0};
  const std::vector<double> dy{0.0};
  CHECK_THROWS_WITH(cmv::euler_step(ens, spec, dw, dy, 0.1, true),
                    Catch::Matchers::ContainsSubstring("to_q_form"));

  spec.form = MeasureForm::Q;
  const std::vector<double> wrong{0.0, 0.0};
  CHECK_THROWS_AS(cmv::euler_step(ens, spec, wrong, dy, 0.1, true), std::invalid_argument);
  CHECK_THROWS_AS(cmv::euler_step(ens, spec, dw, wrong, 0.1, true), std::invalid_argument);
}

TEST_CASE("euler_step with zero coefficients freezes the state") {
  ModelSpec spec;  // every coefficient null, i.e. identically zero
  const std::size_t N = 4;
  auto ens = make_ensemble(spec, {1.0, -2.0, 0.5, 3.0},
                           std::vector<double>(N, std::log(1.0 / N)));
  const std::vector<double> dw(N, 0.37);
  const std::vector<double> dy{-0.8};

  auto out = cmv::euler_step(ens, spec, dw, dy, 0.1, false);
  CHECK(out.X == ens.X);
  CHECK(out.z == ens.z);
  CHECK(out.loglik == ens.loglik);
  CHECK(out.step == 1);
  CHECK(out.t == 0.1);

  // N a power of two keeps the renormalization shift exactly zero as well.
  auto out_renorm = cmv::euler_step(ens, spec, dw, dy, 0.1, true);
  CHECK(out_renorm.z == ens.z);
}

TEST_CASE("euler_step applies a pure drift exactly") {
  ModelSpec spec;
  spec.drift = constant(1.0, 1);
  auto ens = make_ensemble(spec, {2.0, -1.0}, {std::log(0.5), std::log(0.5)});
  const std::vector<double> dw{0.9, -0.4};
  const std::vector<double> dy{0.3};
  const auto out = cmv::euler_step(ens, spec, dw, dy, 0.1, true);
  CHECK(out.X[0] == 2.1);
  CHECK(out.X[1] == -0.9);
}

TEST_CASE("constant observation keeps weights at exactly 1/N") {
  ModelSpec spec;
  spec.drift = constant(0.5, 1);
  spec.diffusion1 = constant(0.2, 1);
  spec.obs = constant(3.0, 1);

  for (const bool renorm : {true, false}) {
    auto cfg = scalar_config(5, 0.01, 0.1, 11);
    cfg.renormalize_each_step = renorm;
    const PathBundle pb = cmv::generate_paths(cfg, 1, 1);
    const auto traj = cmv::simulate_particle_system(cfg, spec, pb);
    REQUIRE(traj.size() == pb.steps + 1);
    for (const auto& snap : traj) {
      const auto w = cmv::normalize_log_weights(std::span<const double>(snap.z));
      for (const double v : w) CHECK(v == 1.0 / 5.0);
    }
  }
}

TEST_CASE("simulate_particle_system snapshot zero and composition") {
  cmv::BenchmarkParams p;
  p.b0 = 0.8;
  p.c0 = 0.3;
  p.d0 = 0.4;
  p.x0 = 1.0;
  const ModelSpec spec = cmv::benchmark_model(p);

  auto cfg = scalar_config(3, 0.1, 0.1, 5);
  cfg.x = {2.0 * p.x0};
  const PathBundle pb = cmv::generate_paths(cfg, 1, 1);
  REQUIRE(pb.steps == 1);

  const auto traj = cmv::simulate_particle_system(cfg, spec, pb);
  REQUIRE(traj.size() == 2);
  CHECK(traj[0].t == 0.0);
  CHECK(traj[0].step == 0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(traj[0].X[i] == 2.0 * p.x0);
    CHECK(traj[0].z[i] == std::log(1.0 / 3.0));
    CHECK(traj[0].loglik[i] == 0.0);
  }

  // One step of the trajectory is literally one euler_step.
  const auto manual =
      cmv::euler_step(traj[0], spec, pb.dw_step(0), pb.dy(0), cfg.delta, true);
  CHECK(manual.X == traj[1].X);
  CHECK(manual.z == traj[1].z);
  CHECK(manual.loglik == traj[1].loglik);
}

TEST_CASE("simulate_particle_system validates the path bundle") {
  cmv::BenchmarkParams p;
  const ModelSpec spec = cmv::benchmark_model(p);
  auto cfg = scalar_config(3, 0.01, 0.1, 5);
  cfg.x = {2.0};
  PathBundle pb = cmv::generate_paths(cfg, 1, 1);
  pb.delta = 0.02;
  CHECK_THROWS_AS(cmv::simulate_particle_system(cfg, spec, pb), std::invalid_argument);
}

TEST_CASE("simulation is deterministic given config and paths") {
  cmv::BenchmarkParams p;
  p.b0 = 1.0;
  p.c0 = 0.5;
  p.d0 = 0.3;
  p.x0 = 1.0;
  const ModelSpec spec = cmv::benchmark_model(p);
  auto cfg = scalar_config(8, 1e-3, 0.05, 314);
  cfg.x = {2.0 * p.x0};
  const PathBundle pb = cmv::generate_paths(cfg, 1, 1);

  const auto a = cmv::simulate_particle_system(cfg, spec, pb);
  const auto b = cmv::simulate_particle_system(cfg, spec, pb);
  REQUIRE(a.size() == b.size());
  for (std::size_t s = 0; s < a.size(); ++s) {
    CHECK(a[s].X == b[s].X);
    CHECK(a[s].z == b[s].z);
    CHECK(a[s].loglik == b[s].loglik);
  }

  // Renormalized log-weights satisfy logsumexp(z) = 0 after every step.
  for (std::size_t s = 1; s < a.size(); ++s)
    CHECK(std::abs(cmv::logsumexp(std::span<const double>(a[s].z))) <= 1e-12);
}

TEST_CASE("log-weight update matches the M and R functionals bitwise") {
  cmv::BenchmarkParams p;
  p.b0 = 0.7;
  p.c0 = 0.4;
  p.d0 = 0.5;
  p.x0 = 1.2;
  const ModelSpec spec = cmv::benchmark_model(p);

  auto ens = make_ensemble(spec, {2.4, 2.0, 2.9}, {std::log(0.2), std::log(0.5), std::log(0.3)});
  ens.aux.shared = {0.15};
  ens.aux.per_particle = {{0.1}, {-0.2}, {0.05}};
  ens.t = 0.02;
  ens.step = 2;

  const std::vector<double> dw{0.01, -0.02, 0.03};
  const std::vector<double> dy{0.04};
  const double delta = 0.01;

  const auto w = cmv::normalize_log_weights(std::span<const double>(ens.z));
  const WeightedEmpiricalMeasure mu(1, ens.X, w);
  std::vector<double> expected(3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto M = cmv::compute_M(spec, ens.t, ens.x_row(i),
                                  std::span<const double>(ens.aux.per_particle[i]), mu, ens.aux);
    const double R = cmv::compute_R(spec, ens.t, ens.x_row(i),
                                    std::span<const double>(ens.aux.per_particle[i]), mu, ens.aux);
    expected[i] = ens.z[i] + (R * delta + M[0] * dy[0]);
  }

  const auto out = cmv::euler_step(ens, spec, dw, dy, delta, false);
  CHECK(out.z == expected);
}

TEST_CASE("unweighted system reduces to independent Euler schemes") {
  // No observation: h = 0, so each particle follows a plain scalar Euler
  // recursion x += b(x) dt + s(x) dW with no interaction.
  ModelSpec spec;
  spec.drift = [](double, std::span<const double> x, const WeightedEmpiricalMeasure&,
                  std::span<const double>, std::span<const double>) {
    return std::vector<double>{0.5 * x[0]};
  };
  spec.diffusion1 = [](double, std::span<const double> x, const WeightedEmpiricalMeasure&,
                       std::span<const double>, std::span<const double>) {
    return std::vector<double>{0.3 * x[0]};
  };

  auto cfg = scalar_config(6, 1e-3, 0.05, 77);
  const PathBundle pb = cmv::generate_paths(cfg, 1, 1);
  const auto traj = cmv::simulate_particle_system(cfg, spec, pb);

  for (std::size_t i = 0; i < cfg.N; ++i) {
    double x = cfg.x[0];
    for (std::size_t s = 0; s < pb.steps; ++s) {
      x = x + 0.5 * x * cfg.delta + 0.3 * x * pb.dw(s, i)[0];
      CHECK(traj[s + 1].X[i] == Catch::Approx(x).margin(1e-12));
    }
  }
}

TEST_CASE("non-finite states are reported with particle and step") {
  ModelSpec spec;
  spec.drift = constant(std::numeric_limits<double>::infinity(), 1);
  auto ens = make_ensemble(spec, {1.0, 1.0}, {std::log(0.5), std::log(0.5)});
  const std::vector<double> dw{0.0, 0.0};
  const std::vector<double> dy{0.0};
  CHECK_THROWS_WITH(cmv::euler_step(ens, spec, dw, dy, 0.1, true),
                    Catch::Matchers::ContainsSubstring("non-finite") &&
                        Catch::Matchers::ContainsSubstring("particle 0") &&
                        Catch::Matchers::ContainsSubstring("step 1"));
}

TEST_CASE("exact_solution walks the grid from 2 x0") {
  cmv::BenchmarkParams p;
  p.b0 = 0.9;
  p.c0 = 0.2;
  p.d0 = 0.6;
  p.x0 = 1.1;
  auto cfg = scalar_config(3, 0.01, 0.05, 21);
  const PathBundle pb = cmv::generate_paths(cfg, 1, 1);

  const auto path = cmv::exact_solution(p, pb, 1);
  REQUIRE(path.size() == pb.steps + 1);
  CHECK(path[0] == 2.0 * p.x0);
  for (const double v : path) CHECK(std::isfinite(v));
  CHECK_THROWS_AS(cmv::exact_solution(p, pb, 3), std::invalid_argument);
}

TEST_CASE("simulate_reference starts exactly and collapses when d0 = c0 = 0") {
  cmv::BenchmarkParams p;
  p.b0 = 1.0;
  p.c0 = 0.0;
  p.d0 = 0.0;
  p.x0 = 1.0;
  auto cfg = scalar_config(4, 0.01, 0.05, 13);
  const PathBundle pb = cmv::generate_paths(cfg, 1, 1);

  const auto ref = cmv::simulate_reference(p, pb);
  REQUIRE(ref.size() == pb.steps + 1);
  for (std::size_t i = 0; i < cfg.N; ++i) CHECK(ref[0].X[i] == 2.0 * p.x0);

  // Deterministic closed form 2 x0 e^{b0 t} independent of every path.
  for (std::size_t s = 0; s <= pb.steps; ++s) {
    const double t = static_cast<double>(s) * cfg.delta;
    for (std::size_t i = 0; i < cfg.N; ++i)
      CHECK(ref[s].X[i] == Catch::Approx(2.0 * std::exp(t)).epsilon(1e-14));
  }
}

TEST_CASE("reference positions depend only on the particle's own noise") {
  cmv::BenchmarkParams p;
  p.b0 = 0.8;
  p.c0 = 0.4;
  p.d0 = 0.7;
  p.x0 = 1.0;
  auto cfg = scalar_config(3, 0.01, 0.04, 55);
  const PathBundle pb = cmv::generate_paths(cfg, 1, 1);

  PathBundle tweaked = pb;
  for (std::size_t s = 0; s < pb.steps; ++s) tweaked.dW[s * pb.N + 1] += 0.5;  // particle 1 only

  const auto a = cmv::simulate_reference(p, pb);
  const auto b = cmv::simulate_reference(p, tweaked);
  for (std::size_t s = 0; s <= pb.steps; ++s) {
    CHECK(a[s].X[0] == b[s].X[0]);
    CHECK(a[s].X[2] == b[s].X[2]);
  }
  CHECK(a.back().X[1] != b.back().X[1]);
}
