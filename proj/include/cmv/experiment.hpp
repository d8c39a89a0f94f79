#pragma once

// Sweep orchestration for the benchmark convergence experiment: seeded
// independent trials over an N-grid, a bounded worker pool, deterministic
// aggregation, and CSV/JSON persistence.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cmv/diagnostics.hpp"
#include "cmv/model.hpp"
#include "cmv/rng.hpp"
#include "cmv/sde.hpp"
#include "cmv/version.hpp"

namespace cmv {

struct ExperimentConfig {
  std::string model = "benchmark";
  BenchmarkParams params;
  double T = 0.1;
  double delta = 1e-4;
  std::vector<int> N_list = {5, 15, 25, 35, 45, 55, 65, 75, 85, 95};
  int trials = 20;
  rng::u64 seed = 42;
  double alpha = 1.0;
  double beta = 10.0;
  bool renormalize = true;
  std::string out_prefix = "experiment";
  int workers = 0;  // 0 = all hardware threads, still capped by MPL_WORKERS

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const {
    if (model != "benchmark")
      throw std::invalid_argument("config: model must be 'benchmark', got '" + model + "'");
    if (params.b0 == 0.0) throw std::invalid_argument("config: b0 must be nonzero");
    if (!(T > 0.0)) throw std::invalid_argument("config: T must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("config: delta must be positive");
    if (delta >= T) throw std::invalid_argument("config: delta must be smaller than T");
    if (N_list.empty()) throw std::invalid_argument("config: N_list must be nonempty");
    for (std::size_t i = 0; i < N_list.size(); ++i) {
      if (N_list[i] < 1) throw std::invalid_argument("config: N_list entries must be >= 1");
      if (i > 0 && N_list[i] <= N_list[i - 1])
        throw std::invalid_argument("config: N_list must be strictly increasing");
    }
    if (trials < 1) throw std::invalid_argument("config: trials must be >= 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("config: alpha must be positive");
    if (beta < 0.0) throw std::invalid_argument("config: beta must be nonnegative");
    if (workers < 0) throw std::invalid_argument("config: workers must be nonnegative");
    if (out_prefix.empty()) throw std::invalid_argument("config: out_prefix must be nonempty");
  }
};

struct TrialRecord {
  int N = 0;
  int trial = 0;
  rng::u64 seed = 0;
  double e_N = 0.0;
  double psi_min = 1.0;
  std::optional<double> tau = std::nullopt;
  double likelihood_mean = 1.0;

  bool tau_exceeded_horizon() const { return !tau.has_value(); }

  DiagnosticsReport report() const {
    DiagnosticsReport rep;
    rep.psi_min = psi_min;
    rep.tau = tau;
    rep.eN = e_N;
    rep.likelihood_mean = likelihood_mean;
    return rep;
  }
};

struct SummaryRow {
  int N = 0;
  double mean_eN = 0.0;
  double stderr_eN = 0.0;
  int trials = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<TrialRecord> raw;       // sorted by (N, trial)
  std::vector<SummaryRow> summary;    // sorted by N
  std::optional<SlopeFit> fit;        // present when >= 2 distinct N
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// One seeded benchmark trial: paths, particle system, coupled reference,
/// diagnostics. Fully determined by (cfg, N, trial_index).
inline TrialRecord run_trial(const ExperimentConfig& cfg, int N, int trial_index) {
  cfg.validate();
  if (N < 1) throw std::invalid_argument("run_trial: N must be >= 1");
  try {
    const rng::u64 seed = rng::trial_seed(cfg.seed, static_cast<rng::u64>(N),
                                          static_cast<rng::u64>(trial_index));
    SimulationConfig sim;
    sim.N = static_cast<std::size_t>(N);
    sim.delta = cfg.delta;
    sim.T = cfg.T;
    sim.renormalize_each_step = cfg.renormalize;
    sim.seed = seed;
    sim.x = {2.0 * cfg.params.x0};

    const ModelSpec spec = benchmark_model(cfg.params);
    const PathBundle pb = generate_paths(sim, spec.m, spec.k);
    CoupledRun run;
    run.particle = simulate_particle_system(sim, spec, pb);
    run.reference = simulate_reference(cfg.params, pb, cfg.renormalize);
    run.delta = cfg.delta;

    TrialRecord rec;
    rec.N = N;
    rec.trial = trial_index;
    rec.seed = seed;
    rec.e_N = error_eN(run);
    const auto psi = multiplier_psi(run, cfg.alpha);
    rec.psi_min = *std::min_element(psi.begin(), psi.end());
    rec.tau = tau_beta(run, cfg.beta);
    double lmean = 0.0;
    for (const double l : run.particle.back().loglik) lmean += std::exp(l);
    rec.likelihood_mean = lmean / static_cast<double>(N);
    return rec;
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error("trial failed (N=" + std::to_string(N) +
                             ", trial=" + std::to_string(trial_index) + "): " + e.what());
  }
}

/// Deterministic fold of trial records into per-N aggregates and the fitted
/// log-log slope (absent when fewer than 2 distinct N).
inline ExperimentResult aggregate_results(const ExperimentConfig& cfg,
                                          std::vector<TrialRecord> records) {
  std::sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return a.N != b.N ? a.N < b.N : a.trial < b.trial;
  });
  ExperimentResult res;
  res.config = cfg;
  res.raw = std::move(records);

  for (std::size_t i = 0; i < res.raw.size();) {
    std::size_t j = i;
    double mean = 0.0;
    while (j < res.raw.size() && res.raw[j].N == res.raw[i].N) {
      mean += res.raw[j].e_N;
      ++j;
    }
    const double cnt = static_cast<double>(j - i);
    mean /= cnt;
    double ss = 0.0;
    for (std::size_t r = i; r < j; ++r) {
      const double d = res.raw[r].e_N - mean;
      ss += d * d;
    }
    SummaryRow row;
    row.N = res.raw[i].N;
    row.mean_eN = mean;
    row.stderr_eN = cnt > 1.0 ? std::sqrt(ss / (cnt - 1.0)) / std::sqrt(cnt) : 0.0;
    row.trials = static_cast<int>(j - i);
    res.summary.push_back(row);
    i = j;
  }

  bool fittable = res.summary.size() >= 2;
  for (const auto& row : res.summary)
    if (!(row.mean_eN > 0.0)) fittable = false;
  if (fittable) {
    std::vector<double> ns, es;
    for (const auto& row : res.summary) {
      ns.push_back(static_cast<double>(row.N));
      es.push_back(row.mean_eN);
    }
    res.fit = fit_slope(ns, es);
  }
  return res;
}

/// Writes <prefix>_raw.csv, <prefix>_summary.csv, <prefix>_meta.json.
/// Re-running on the same result overwrites byte-identically.
inline void write_results(const ExperimentResult& res, const std::string& prefix) {
  if (res.raw.empty()) throw std::invalid_argument("write_results: no trial records");

  const std::string raw_path = prefix + "_raw.csv";
  {
    std::ofstream f(raw_path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_results: cannot open " + raw_path);
    f << "N,trial,seed,e_N,psi_min,tau_beta_exceeded\n";
    for (const auto& r : res.raw) {
      f << r.N << ',' << r.trial << ',' << r.seed << ',' << detail::format_double(r.e_N) << ','
        << detail::format_double(r.psi_min) << ',' << (r.tau_exceeded_horizon() ? 1 : 0) << '\n';
    }
    if (!f) throw std::runtime_error("write_results: failed writing " + raw_path);
  }

  const std::string summary_path = prefix + "_summary.csv";
  {
    std::ofstream f(summary_path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_results: cannot open " + summary_path);
    f << "N,mean_eN,stderr_eN,trials\n";
    for (const auto& row : res.summary) {
      f << row.N << ',' << detail::format_double(row.mean_eN) << ','
        << detail::format_double(row.stderr_eN) << ',' << row.trials << '\n';
    }
    if (!f) throw std::runtime_error("write_results: failed writing " + summary_path);
  }

  const std::string meta_path = prefix + "_meta.json";
  {
    nlohmann::json cfg;
    cfg["model"] = res.config.model;
    cfg["b0"] = res.config.params.b0;
    cfg["c0"] = res.config.params.c0;
    cfg["d0"] = res.config.params.d0;
    cfg["x0"] = res.config.params.x0;
    cfg["T"] = res.config.T;
    cfg["delta"] = res.config.delta;
    cfg["N_list"] = res.config.N_list;
    cfg["trials"] = res.config.trials;
    cfg["seed"] = res.config.seed;
    cfg["alpha"] = res.config.alpha;
    cfg["beta"] = res.config.beta;
    cfg["renormalize"] = res.config.renormalize;
    cfg["out_prefix"] = res.config.out_prefix;
    cfg["workers"] = res.config.workers;

    nlohmann::json j;
    j["config"] = cfg;
    if (res.fit) {
      j["fit"] = {{"slope", res.fit->slope},
                  {"intercept", res.fit->intercept},
                  {"r2", res.fit->r2}};
    } else {
      j["fit"] = nullptr;
    }
    j["format_version"] = kResultFormatVersion;
    j["library_version"] = kVersion;

    std::ofstream f(meta_path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_results: cannot open " + meta_path);
    f << j.dump(2) << '\n';
    if (!f) throw std::runtime_error("write_results: failed writing " + meta_path);
  }
}

/// Worker count: explicit request, else hardware concurrency; both capped
/// by the MPL_WORKERS environment variable when set.
inline int resolve_workers(int requested) {
  int w = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (w < 1) w = 1;
  if (const char* env = std::getenv("MPL_WORKERS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) w = std::min(w, static_cast<int>(cap));
  }
  return w;
}

using TrialRunner = std::function<TrialRecord(const ExperimentConfig&, int, int)>;

/// Runs trials x |N_list| independent trials on a bounded worker pool. The
/// result is a deterministic fold over (N, trial) regardless of worker
/// count. Any trial failure aborts the sweep after dumping the completed
/// records to <out_prefix>_partial_*.
inline ExperimentResult run_sweep(const ExperimentConfig& cfg, const TrialRunner& runner) {
  cfg.validate();
  struct Task {
    int N;
    int trial;
  };
  std::vector<Task> tasks;
  for (const int N : cfg.N_list)
    for (int t = 0; t < cfg.trials; ++t) tasks.push_back({N, t});

  std::vector<std::optional<TrialRecord>> slots(tasks.size());
  std::vector<std::string> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto work = [&]() {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= tasks.size()) break;
      try {
        slots[idx] = runner(cfg, tasks[idx].N, tasks[idx].trial);
      } catch (const std::exception& e) {
        errors[idx] = e.what();
        failed = true;
      }
    }
  };

  const int nw = std::min(resolve_workers(cfg.workers), static_cast<int>(tasks.size()));
  if (nw <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (int i = 0; i < nw; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  if (failed) {
    std::string first;
    for (const auto& e : errors)
      if (!e.empty()) {
        first = e;
        break;
      }
    std::vector<TrialRecord> done;
    for (const auto& s : slots)
      if (s) done.push_back(*s);
    std::string note;
    if (!done.empty()) {
      try {
        write_results(aggregate_results(cfg, std::move(done)), cfg.out_prefix + "_partial");
        note = " (partial results written to " + cfg.out_prefix + "_partial_*)";
      } catch (const std::exception& dump_err) {
        note = std::string(" (partial dump failed: ") + dump_err.what() + ")";
      }
    }
    throw std::runtime_error(first + note);
  }

  std::vector<TrialRecord> records;
  records.reserve(slots.size());
  for (auto& s : slots) records.push_back(std::move(*s));
  return aggregate_results(cfg, std::move(records));
}

inline ExperimentResult run_sweep(const ExperimentConfig& cfg) {
  return run_sweep(cfg, [](const ExperimentConfig& c, int N, int t) { return run_trial(c, N, t); });
}

}  // namespace cmv
