#pragma once

// Experiment protocols over synthetic scenes: stability, noise sensitivity,
// yaw drift and solver timing. Records are plain structs; serialization lives
// in io.hpp.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "gravhom/core_geometry.hpp"
#include "gravhom/ransac.hpp"
#include "gravhom/solvers.hpp"
#include "gravhom/synth.hpp"

namespace gravhom {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// log10 with a floor so exact results stay finite.
inline double log10_error(double e) {
  if (std::isnan(e)) return kNaN;
  return std::log10(std::max(e, 1e-20));
}

/// Linear-interpolation quantile of `v` (the common "type 7" definition).
/// `v` must be sorted ascending and non-empty.
inline double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return kNaN;
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Quantiles {
  double min = kNaN, q25 = kNaN, median = kNaN, q75 = kNaN, max = kNaN;
  int count = 0;
};

/// Quantiles over the non-NaN entries of `values`.
inline Quantiles summarize(std::vector<double> values) {
  std::erase_if(values, [](double x) { return std::isnan(x); });
  std::sort(values.begin(), values.end());
  Quantiles q;
  q.count = static_cast<int>(values.size());
  if (values.empty()) return q;
  q.min = values.front();
  q.q25 = quantile_sorted(values, 0.25);
  q.median = quantile_sorted(values, 0.5);
  q.q75 = quantile_sorted(values, 0.75);
  q.max = values.back();
  return q;
}

/// Worker count for experiment loops: hardware concurrency, capped by the
/// GRAVHOM_THREADS environment variable when set.
inline int experiment_threads() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("GRAVHOM_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

/// Evaluates fn(i) for i in [0, n) into a vector; results do not depend on
/// the thread count.
template <typename Fn>
auto parallel_map(int n, Fn fn, int threads = experiment_threads()) {
  using T = decltype(fn(0));
  std::vector<T> out(static_cast<std::size_t>(std::max(n, 0)));
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < n; i += threads) out[i] = fn(i);
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

/// Scene defaults per solver: the focal-only and calibrated solvers see
/// undistorted cameras.
inline SceneConfig default_scene(SolverKind kind) {
  SceneConfig cfg;
  cfg.num_points = minimal_sample_size(kind);
  if (kind != SolverKind::kFrhfr) cfg.lambda = 0.0;
  return cfg;
}

// ---------------------------------------------------------------------------
// Per-solution evaluation

struct SolutionErrors {
  double homography = kNaN;
  double rotation = kNaN;
  double translation = kNaN;
  double focal = kNaN;   // NaN when the solver does not estimate f
  double lambda = kNaN;  // NaN when the solver does not estimate lambda
};

/// Errors of `sol` against the instance ground truth. The estimate uses the
/// rotations the solver saw (possibly drifted).
inline SolutionErrors evaluate_solution(const SolverSolution& sol,
                                        const SyntheticInstance& inst) {
  SolutionErrors e;
  const Intrinsics intr = resolve_intrinsics(sol, inst.intrinsics);
  const GravityRotation& r1 = inst.correspondences.front().r1;
  const GravityRotation& r2 = inst.correspondences.front().r2;
  try {
    e.homography =
        homography_error(compose_homography(sol.hy, r1, r2, intr), inst.homography());
  } catch (const Error&) {
    e.homography = std::numeric_limits<double>::infinity();
  }
  const RelativePose gt = inst.pose();
  e.rotation = rotation_error(gt.rotation, r2.matrix() * r1.matrix().transpose());
  const Eigen::Vector3d t = sol.hy.translation();
  e.translation = t.norm() < 1e-12
                      ? std::numbers::pi / 2
                      : translation_error(gt.translation_dir, r2.matrix() * t);
  if (sol.focal) e.focal = relative_error(*sol.focal, inst.intrinsics.focal);
  if (sol.lambda) e.lambda = relative_error(*sol.lambda, inst.intrinsics.lambda);
  return e;
}

/// Index of the solution closest to the ground truth (homography error, then
/// focal error).
inline int best_solution_index(const std::vector<SolverSolution>& sols,
                               const SyntheticInstance& inst) {
  int best = -1;
  SolutionErrors be;
  for (int i = 0; i < static_cast<int>(sols.size()); ++i) {
    const SolutionErrors e = evaluate_solution(sols[i], inst);
    const double fe = std::isnan(e.focal) ? 0.0 : e.focal;
    const double bfe = std::isnan(be.focal) ? 0.0 : be.focal;
    if (best < 0 || e.homography < be.homography ||
        (e.homography == be.homography && fe < bfe)) {
      best = i;
      be = e;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Stability

struct StabilityRecord {
  int index = 0;
  std::uint64_t seed = 0;
  SolverKind solver = SolverKind::kCalibrated;
  std::string status;  // "ok" or the failure category
  int num_solutions = 0;
  int spurious_filtered = 0;
  double err_h = kNaN;
  double err_f = kNaN;
  double err_lambda = kNaN;
};

inline StabilityRecord stability_trial(SolverKind kind, std::uint64_t base_seed,
                                       int index) {
  StabilityRecord rec;
  rec.index = index;
  rec.seed = mix_seed(base_seed, static_cast<std::uint64_t>(index));
  rec.solver = kind;
  SyntheticInstance inst;
  try {
    inst = generate(default_scene(kind), rec.seed);
  } catch (const Error& e) {
    rec.status = std::string(to_string(e.code()));
    return rec;
  }
  const SolverResult res = run_solver(kind, inst.correspondences, inst.intrinsics);
  rec.status = std::string(to_string(res.status));
  rec.num_solutions = static_cast<int>(res.solutions.size());
  rec.spurious_filtered = res.diagnostics.spurious_filtered;
  if (!res.ok()) return rec;
  const int b = best_solution_index(res.solutions, inst);
  const SolutionErrors e = evaluate_solution(res.solutions[b], inst);
  rec.err_h = e.homography;
  rec.err_f = e.focal;
  rec.err_lambda = e.lambda;
  return rec;
}

inline std::vector<StabilityRecord> stability_experiment(SolverKind kind,
                                                         int n_instances,
                                                         std::uint64_t seed) {
  return parallel_map(n_instances,
                      [&](int i) { return stability_trial(kind, seed, i); });
}

// ---------------------------------------------------------------------------
// Noise sensitivity

struct NoiseRecord {
  int index = 0;
  std::uint64_t seed = 0;
  SolverKind solver = SolverKind::kCalibrated;
  double sigma_px = 0.0;
  std::string status;
  int num_solutions = 0;
  SolutionErrors errors;
};

/// Each instance index keeps its geometry across noise levels; only the noise
/// magnitude changes.
inline std::vector<NoiseRecord> noise_experiment(SolverKind kind,
                                                 const std::vector<double>& sigmas,
                                                 int n_per_level,
                                                 std::uint64_t seed) {
  std::vector<NoiseRecord> out;
  for (double sigma : sigmas) {
    auto level = parallel_map(n_per_level, [&](int i) {
      NoiseRecord rec;
      rec.index = i;
      rec.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
      rec.solver = kind;
      rec.sigma_px = sigma;
      SceneConfig cfg = default_scene(kind);
      cfg.noise_px = sigma;
      SyntheticInstance inst;
      try {
        inst = generate(cfg, rec.seed);
      } catch (const Error& e) {
        rec.status = std::string(to_string(e.code()));
        return rec;
      }
      const SolverResult res =
          run_solver(kind, inst.correspondences, inst.intrinsics);
      rec.status = std::string(to_string(res.status));
      rec.num_solutions = static_cast<int>(res.solutions.size());
      if (!res.ok()) return rec;
      rec.errors =
          evaluate_solution(res.solutions[best_solution_index(res.solutions, inst)], inst);
      return rec;
    });
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

struct NoiseSummary {
  double sigma_px = 0.0;
  int instances = 0;
  int failures = 0;
  Quantiles rotation, translation, focal, lambda, homography;
};

inline std::vector<NoiseSummary> summarize_noise(const std::vector<NoiseRecord>& recs,
                                                 const std::vector<double>& sigmas) {
  std::vector<NoiseSummary> out;
  for (double sigma : sigmas) {
    NoiseSummary s;
    s.sigma_px = sigma;
    std::vector<double> r, t, f, l, h;
    for (const auto& rec : recs) {
      if (rec.sigma_px != sigma) continue;
      ++s.instances;
      if (rec.status != "ok") {
        ++s.failures;
        continue;
      }
      r.push_back(rec.errors.rotation);
      t.push_back(rec.errors.translation);
      f.push_back(rec.errors.focal);
      l.push_back(rec.errors.lambda);
      h.push_back(rec.errors.homography);
    }
    s.rotation = summarize(r);
    s.translation = summarize(t);
    s.focal = summarize(f);
    s.lambda = summarize(l);
    s.homography = summarize(h);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Yaw drift

struct DriftConfig {
  double sigma_px = 0.5;
  int num_points = 50;  // all inliers; the first minimal sample seeds the solver
  int lo_max_steps = 30;
};

struct DriftRecord {
  int index = 0;
  std::uint64_t seed = 0;
  SolverKind solver = SolverKind::kCalibrated;
  double drift_deg = 0.0;
  double sigma_px = 0.0;
  std::string status;
  SolutionErrors solver_only;
  SolutionErrors refined;
  double cost_solver = kNaN;
  double cost_refined = kNaN;
};

inline std::vector<DriftRecord> drift_experiment(SolverKind kind,
                                                 const std::vector<double>& drifts_deg,
                                                 int n_per_level, std::uint64_t seed,
                                                 const DriftConfig& dc = {}) {
  std::vector<DriftRecord> out;
  for (double drift : drifts_deg) {
    auto level = parallel_map(n_per_level, [&](int i) {
      DriftRecord rec;
      rec.index = i;
      rec.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
      rec.solver = kind;
      rec.drift_deg = drift;
      rec.sigma_px = dc.sigma_px;
      SceneConfig cfg = default_scene(kind);
      cfg.num_points = std::max(dc.num_points, minimal_sample_size(kind) + 4);
      cfg.noise_px = dc.sigma_px;
      cfg.yaw_drift_deg = drift;
      SyntheticInstance inst;
      try {
        inst = generate(cfg, rec.seed);
      } catch (const Error& e) {
        rec.status = std::string(to_string(e.code()));
        return rec;
      }
      const std::span<const Correspondence> all(inst.correspondences);
      const SolverResult res = run_solver(
          kind, all.first(minimal_sample_size(kind)), inst.intrinsics);
      rec.status = std::string(to_string(res.status));
      if (!res.ok()) return rec;
      const SolverSolution& sol = res.solutions[best_solution_index(res.solutions, inst)];
      rec.solver_only = evaluate_solution(sol, inst);
      LoOptions lo;
      lo.max_steps = dc.lo_max_steps;
      lo.frame = cfg.frame;
      rec.cost_solver = lo_cost(all, sol, inst.intrinsics, lo);
      const SolverSolution refined = lo_refine(sol, all, inst.intrinsics, lo);
      rec.cost_refined = lo_cost(all, refined, inst.intrinsics, lo);
      rec.refined = evaluate_solution(refined, inst);
      return rec;
    });
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Timing

struct TimingRow {
  SolverKind solver = SolverKind::kCalibrated;
  int instances = 0;
  int warmup = 0;
  int batch_size = 0;
  double mean_us = kNaN;
  double median_batch_us = kNaN;  // median of per-batch means
  long long budget_iterations = 0;  // floor(33333 / mean_us)
};

/// Mean wall time per solve over `n_instances` calls, cycling through a pool
/// of pre-generated scenes. Run single-threaded.
inline TimingRow timing_experiment(SolverKind kind, int n_instances,
                                   std::uint64_t seed, int warmup = 1000,
                                   int batch_size = 1000, int pool_size = 10000) {
  TimingRow row;
  row.solver = kind;
  row.instances = n_instances;
  row.warmup = warmup;
  row.batch_size = batch_size;
  if (n_instances <= 0) return row;
  pool_size = std::max(1, std::min(pool_size, n_instances));
  std::vector<SyntheticInstance> pool;
  pool.reserve(pool_size);
  for (int i = 0; i < pool_size; ++i) {
    pool.push_back(generate(default_scene(kind), mix_seed(seed, i)));
  }
  std::size_t sink = 0;
  for (int i = 0; i < warmup; ++i) {
    const auto& inst = pool[i % pool_size];
    sink += run_solver(kind, inst.correspondences, inst.intrinsics).solutions.size();
  }
  using Clock = std::chrono::steady_clock;
  std::vector<double> batch_means;
  double total_us = 0.0;
  for (int done = 0; done < n_instances;) {
    const int b = std::min(batch_size, n_instances - done);
    const auto t0 = Clock::now();
    for (int k = 0; k < b; ++k) {
      const auto& inst = pool[(done + k) % pool_size];
      sink += run_solver(kind, inst.correspondences, inst.intrinsics).solutions.size();
    }
    const double us =
        std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
    total_us += us;
    batch_means.push_back(us / b);
    done += b;
  }
  // Keeps the solve calls observable to the optimizer.
  if (sink == std::numeric_limits<std::size_t>::max()) row.warmup = -1;
  row.mean_us = total_us / n_instances;
  std::sort(batch_means.begin(), batch_means.end());
  row.median_batch_us = quantile_sorted(batch_means, 0.5);
  row.budget_iterations = static_cast<long long>(std::floor(33333.0 / row.mean_us));
  return row;
}

// ---------------------------------------------------------------------------
// RANSAC over contaminated scenes

struct RansacSceneConfig {
  int num_points = 200;
  double inlier_fraction = 0.7;
  double noise_px = 1.0;
  double focal = 1.0;
  double lambda = -0.3;
};

struct RansacRunRecord {
  int repeat = 0;
  std::uint64_t seed = 0;
  int true_inliers = 0;
  int found_inliers = 0;
  int true_positives = 0;
  double precision = kNaN;
  double recall = kNaN;
  int iterations = 0;
  double elapsed_ms = 0.0;
  SolutionErrors errors;
  std::vector<TracePoint> trace;
};

inline RansacRunRecord ransac_trial(SolverKind kind, const RansacSceneConfig& sc,
                                    RansacConfig rc, std::uint64_t base_seed,
                                    int repeat) {
  RansacRunRecord rec;
  rec.repeat = repeat;
  rec.seed = mix_seed(base_seed, static_cast<std::uint64_t>(repeat));
  SceneConfig cfg;
  cfg.num_points = sc.num_points;
  cfg.inlier_fraction = sc.inlier_fraction;
  cfg.noise_px = sc.noise_px;
  cfg.frame = rc.frame;
  cfg.focal = sc.focal;
  cfg.lambda = kind == SolverKind::kFrhfr ? sc.lambda : 0.0;
  const SyntheticInstance inst = generate(cfg, rec.seed);
  rc.seed = mix_seed(rec.seed, 0x72616e736163ULL);
  rc.known = inst.intrinsics;
  const RansacReport rep = run_ransac(inst.correspondences, kind, rc);
  for (std::size_t i = 0; i < inst.inlier_mask.size(); ++i) {
    rec.true_inliers += inst.inlier_mask[i];
    rec.true_positives += inst.inlier_mask[i] && rep.inlier_mask[i];
  }
  rec.found_inliers = rep.num_inliers;
  rec.precision = rec.found_inliers > 0
                      ? static_cast<double>(rec.true_positives) / rec.found_inliers
                      : 0.0;
  rec.recall = rec.true_inliers > 0
                   ? static_cast<double>(rec.true_positives) / rec.true_inliers
                   : 1.0;
  rec.iterations = rep.iterations;
  rec.elapsed_ms = rep.elapsed_ms;
  rec.errors = evaluate_solution(rep.best, inst);
  rec.trace = rep.trace;
  return rec;
}

/// Runs are sequential: each one owns the wall-clock budget.
inline std::vector<RansacRunRecord> ransac_experiment(SolverKind kind,
                                                      const RansacSceneConfig& sc,
                                                      const RansacConfig& rc,
                                                      int repeats,
                                                      std::uint64_t seed) {
  std::vector<RansacRunRecord> out;
  for (int r = 0; r < repeats; ++r) out.push_back(ransac_trial(kind, sc, rc, seed, r));
  return out;
}

/// Best-so-far inlier count averaged over runs on a regular time grid.
struct AveragedTrace {
  std::vector<double> time_ms;
  std::vector<double> mean_inliers;
};

inline AveragedTrace average_traces(const std::vector<RansacRunRecord>& runs,
                                    double horizon_ms, int samples = 100) {
  AveragedTrace out;
  if (runs.empty() || samples < 2) return out;
  for (int s = 0; s < samples; ++s) {
    const double t = horizon_ms * s / (samples - 1);
    double sum = 0.0;
    for (const auto& run : runs) {
      int v = 0;
      for (const auto& tp : run.trace) {
        if (tp.elapsed_ms <= t) v = tp.best_inliers;
        else break;
      }
      // A run that finished early keeps its final count.
      if (!run.trace.empty() && run.trace.back().elapsed_ms <= t) {
        v = run.trace.back().best_inliers;
      }
      sum += v;
    }
    out.time_ms.push_back(t);
    out.mean_inliers.push_back(sum / runs.size());
  }
  return out;
}

}  // namespace gravhom
