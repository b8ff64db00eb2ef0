// gravhom: experiment driver and batch solver front end.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gravhom/gravhom.hpp"
#include "gravhom/io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace gravhom;

namespace {

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw 0;
    } catch (...) {
      throw Error(ErrorCode::kUsage, flag + ": not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::kUsage, flag + " must not be empty");
  return out;
}

std::vector<SolverKind> parse_solvers(const std::vector<std::string>& names) {
  std::vector<SolverKind> out;
  for (const auto& n : names) out.push_back(parse_solver_kind(n));
  if (out.empty()) {
    out = {SolverKind::kCalibrated, SolverKind::kFhf, SolverKind::kFrhfr};
  }
  return out;
}

/// Writes one output table, as CSV or as a JSON array of row objects.
class OutputDir {
 public:
  OutputDir(std::string dir, std::string format)
      : dir_(std::move(dir)), format_(std::move(format)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir_ + "': " + ec.message());
  }

  template <typename WriteFn>
  void table(const std::string& stem, WriteFn write) {
    std::ostringstream csv;
    write(csv);
    if (format_ == "json") {
      std::istringstream in(csv.str());
      std::string line;
      std::getline(in, line);
      const auto header = split_csv_line(line);
      json rows = json::array();
      while (std::getline(in, line)) {
        const auto cells = split_csv_line(line);
        json row;
        for (std::size_t i = 0; i < header.size(); ++i) {
          const std::string& c = cells[i];
          char* end = nullptr;
          const double v = std::strtod(c.c_str(), &end);
          if (c == "nan" || c == "inf" || c == "-inf") {
            row[header[i]] = nullptr;
          } else if (!c.empty() && end == c.c_str() + c.size()) {
            row[header[i]] = v;
          } else {
            row[header[i]] = c;
          }
        }
        rows.push_back(row);
      }
      save(stem + ".json", rows.dump(2) + "\n");
    } else {
      save(stem + ".csv", csv.str());
    }
  }

  void json_file(const std::string& name, const json& j) { save(name, j.dump(2) + "\n"); }

  void save(const std::string& name, const std::string& content) {
    const fs::path p = fs::path(dir_) / name;
    std::ofstream out(p);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + p.string() + "'");
    out << content;
    outputs_.push_back(p.string());
  }

  void manifest(const std::string& sub, json config, std::uint64_t seed,
                const std::string& started) {
    json m;
    m["subcommand"] = sub;
    m["version"] = kVersion;
    m["schema_version"] = kSchemaVersion;
    m["seed"] = seed;
    m["config"] = std::move(config);
    m["started"] = started;
    m["finished"] = iso_now();
    m["outputs"] = outputs_;
    const fs::path p = fs::path(dir_) / "manifest.json";
    std::ofstream out(p);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + p.string() + "'");
    out << m.dump(2) << "\n";
  }

 private:
  std::string dir_;
  std::string format_;
  std::vector<std::string> outputs_;
};

json quantiles_json(const Quantiles& q) {
  auto num = [](double x) { return std::isnan(x) ? json() : json(x); };
  return {{"count", q.count}, {"min", num(q.min)},       {"q25", num(q.q25)},
          {"median", num(q.median)}, {"q75", num(q.q75)}, {"max", num(q.max)}};
}

json nullable(double x) { return std::isfinite(x) ? json(x) : json(); }

struct Common {
  std::vector<std::string> solvers;
  int instances = -1;
  std::uint64_t seed = 1;
  std::string output = "out";
  std::string format = "csv";
};

void add_common(CLI::App* app, Common& c, bool multi_solver) {
  if (multi_solver) {
    app->add_option("--solver", c.solvers, "Solver(s): calib, fhf, frhfr (repeatable; default all)")
        ->check(CLI::IsMember({"calib", "fhf", "frhfr"}));
  } else {
    app->add_option("--solver", c.solvers, "Solver: calib, fhf or frhfr")
        ->check(CLI::IsMember({"calib", "fhf", "frhfr"}))
        ->expected(1);
  }
  app->add_option("--seed", c.seed, "Base random seed");
  app->add_option("--output", c.output, "Output directory");
  app->add_option("--format", c.format, "Table format")
      ->check(CLI::IsMember({"csv", "json"}));
}

SolverKind single_solver(const Common& c, SolverKind fallback) {
  if (c.solvers.empty()) return fallback;
  return parse_solver_kind(c.solvers.front());
}

// ---------------------------------------------------------------------------

void cmd_stability(const Common& c) {
  const std::string started = iso_now();
  const int n = c.instances < 0 ? 10000 : c.instances;
  OutputDir out(c.output, c.format);
  json summary;
  for (SolverKind k : parse_solvers(c.solvers)) {
    const auto recs = stability_experiment(k, n, c.seed);
    out.table("stability_" + std::string(to_string(k)),
              [&](std::ostream& os) { write_stability_csv(os, recs); });
    summary[std::string(to_string(k))] = stability_summary(recs);
    const auto& s = summary[std::string(to_string(k))];
    std::printf("%-6s instances=%d median_log10_err_h=%s max_solutions=%d\n",
                std::string(to_string(k)).c_str(), n,
                s["log10_err_h"]["median"].dump().c_str(),
                s["max_solutions"].get<int>());
  }
  out.json_file("stability_summary.json", summary);
  out.manifest("stability", {{"solvers", c.solvers}, {"instances", n}, {"format", c.format}},
               c.seed, started);
}

void cmd_noise(const Common& c, const std::string& sigma_text) {
  const std::string started = iso_now();
  const auto sigmas = parse_list(sigma_text, "--noise-sigma");
  const int n = c.instances < 0 ? 1000 : c.instances;
  OutputDir out(c.output, c.format);
  json summary;
  for (SolverKind k : parse_solvers(c.solvers)) {
    const std::string name(to_string(k));
    const auto recs = noise_experiment(k, sigmas, n, c.seed);
    const auto sums = summarize_noise(recs, sigmas);
    out.table("noise_" + name, [&](std::ostream& os) { write_noise_csv(os, recs); });
    out.table("noise_summary_" + name,
              [&](std::ostream& os) { write_noise_summary_csv(os, k, sums); });
    json levels = json::array();
    for (const auto& s : sums) {
      levels.push_back({{"sigma_px", s.sigma_px},
                        {"instances", s.instances},
                        {"failures", s.failures},
                        {"err_rot", quantiles_json(s.rotation)},
                        {"err_trans", quantiles_json(s.translation)},
                        {"err_f", quantiles_json(s.focal)},
                        {"err_lambda", quantiles_json(s.lambda)},
                        {"err_h", quantiles_json(s.homography)}});
      std::printf("%-6s sigma=%-4g failures=%-4d median err_h=%.3g err_f=%.3g\n",
                  name.c_str(), s.sigma_px, s.failures, s.homography.median,
                  s.focal.median);
    }
    summary[name] = levels;
  }
  out.json_file("noise_summary.json", summary);
  out.manifest("noise",
               {{"solvers", c.solvers}, {"instances_per_level", n}, {"sigmas_px", sigmas},
                {"format", c.format}},
               c.seed, started);
}

void cmd_drift(const Common& c, const std::string& drift_text, double sigma, int points) {
  const std::string started = iso_now();
  const auto drifts = parse_list(drift_text, "--drift-deg");
  const int n = c.instances < 0 ? 1000 : c.instances;
  OutputDir out(c.output, c.format);
  DriftConfig dc;
  dc.sigma_px = sigma;
  dc.num_points = points;
  json summary;
  for (SolverKind k : parse_solvers(c.solvers)) {
    const std::string name(to_string(k));
    const auto recs = drift_experiment(k, drifts, n, c.seed, dc);
    out.table("drift_" + name, [&](std::ostream& os) { write_drift_csv(os, recs); });
    json levels = json::array();
    for (double d : drifts) {
      std::vector<double> so, lo;
      int failures = 0;
      for (const auto& r : recs) {
        if (r.drift_deg != d) continue;
        if (r.status != "ok") {
          ++failures;
          continue;
        }
        so.push_back(r.solver_only.homography);
        lo.push_back(r.refined.homography);
      }
      levels.push_back({{"drift_deg", d},
                        {"failures", failures},
                        {"err_h_solver", quantiles_json(summarize(so))},
                        {"err_h_lo", quantiles_json(summarize(lo))}});
      std::printf("%-6s drift=%-5g median err_h solver=%.3g lo=%.3g\n", name.c_str(), d,
                  summarize(so).median, summarize(lo).median);
    }
    summary[name] = levels;
  }
  out.json_file("drift_summary.json", summary);
  out.manifest("drift",
               {{"solvers", c.solvers}, {"instances_per_level", n}, {"drifts_deg", drifts},
                {"sigma_px", sigma}, {"points", points}, {"format", c.format}},
               c.seed, started);
}

void cmd_timing(const Common& c, int warmup) {
  const std::string started = iso_now();
  const int n = c.instances < 0 ? 100000 : c.instances;
  OutputDir out(c.output, c.format);
  std::vector<TimingRow> rows;
  for (SolverKind k : parse_solvers(c.solvers)) {
    rows.push_back(timing_experiment(k, n, c.seed, warmup));
  }
  out.table("timing", [&](std::ostream& os) { write_timing_csv(os, rows); });
  json j = json::array();
  std::printf("%-8s %10s %12s %16s %14s\n", "solver", "instances", "mean_us",
              "median_batch_us", "iters@30fps");
  for (const auto& r : rows) {
    j.push_back({{"solver", to_string(r.solver)},
                 {"instances", r.instances},
                 {"warmup", r.warmup},
                 {"mean_us", nullable(r.mean_us)},
                 {"median_batch_us", nullable(r.median_batch_us)},
                 {"budget_iterations", r.budget_iterations}});
    std::printf("%-8s %10d %12.3f %16.3f %14lld\n", std::string(to_string(r.solver)).c_str(),
                r.instances, r.mean_us, r.median_batch_us, r.budget_iterations);
  }
  out.json_file("timing.json", j);
  out.manifest("timing", {{"solvers", c.solvers}, {"instances", n}, {"warmup", warmup},
                          {"format", c.format}},
               c.seed, started);
}

struct RansacFlags {
  double inlier_fraction = 0.7;
  double noise = 1.0;
  int points = 200;
  double threshold = 5.0;
  double budget_ms = 33.3;
  int iterations = 10000;
  int repeats = 100;
  double focal = 1.0;
  double lambda = -0.3;
};

void add_ransac_flags(CLI::App* app, RansacFlags& f) {
  app->add_option("--threshold-px", f.threshold, "Inlier threshold in pixels")
      ->check(CLI::PositiveNumber);
  app->add_option("--time-budget-ms", f.budget_ms,
                  "Wall-clock budget per run in ms (0 = iteration cap only)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--iterations", f.iterations, "Iteration cap per run")
      ->check(CLI::PositiveNumber);
}

void cmd_ransac(const Common& c, const RansacFlags& f) {
  const std::string started = iso_now();
  const SolverKind k = single_solver(c, SolverKind::kFrhfr);
  RansacSceneConfig sc;
  sc.num_points = f.points;
  sc.inlier_fraction = f.inlier_fraction;
  sc.noise_px = f.noise;
  sc.focal = f.focal;
  sc.lambda = f.lambda;
  RansacConfig rc;
  rc.threshold_px = f.threshold;
  rc.time_budget_ms = f.budget_ms;
  rc.max_iterations = f.iterations;
  const auto runs = ransac_experiment(k, sc, rc, f.repeats, c.seed);

  OutputDir out(c.output, c.format);
  out.table("ransac_runs", [&](std::ostream& os) { write_ransac_runs_csv(os, runs); });
  out.table("ransac_trace", [&](std::ostream& os) { write_ransac_trace_csv(os, runs); });
  double horizon = f.budget_ms;
  for (const auto& r : runs) horizon = std::max(horizon, r.elapsed_ms);
  const AveragedTrace avg = average_traces(runs, horizon);
  out.table("ransac_trace_mean", [&](std::ostream& os) { write_trace_mean_csv(os, avg); });

  double found = 0, truth = 0, prec = 0, rec = 0;
  for (const auto& r : runs) {
    found += r.found_inliers;
    truth += r.true_inliers;
    prec += r.precision;
    rec += r.recall;
  }
  const double n = std::max<std::size_t>(runs.size(), 1);
  json s{{"solver", to_string(k)},
         {"repeats", runs.size()},
         {"mean_found_inliers", found / n},
         {"mean_true_inliers", truth / n},
         {"mean_precision", prec / n},
         {"mean_recall", rec / n}};
  out.json_file("ransac_summary.json", s);
  std::printf("%s repeats=%zu mean inliers %.2f (true %.2f) precision %.4f recall %.4f\n",
              std::string(to_string(k)).c_str(), runs.size(), found / n, truth / n,
              prec / n, rec / n);
  out.manifest("ransac",
               {{"solver", to_string(k)}, {"points", f.points},
                {"inlier_fraction", f.inlier_fraction}, {"noise_sigma_px", f.noise},
                {"threshold_px", f.threshold}, {"time_budget_ms", f.budget_ms},
                {"iterations", f.iterations}, {"repeats", f.repeats},
                {"focal", f.focal}, {"lambda", f.lambda}, {"format", c.format}},
               c.seed, started);
}

void cmd_synth(const Common& c, const RansacFlags& f, double width, double height) {
  const std::string started = iso_now();
  const SolverKind k = single_solver(c, SolverKind::kFrhfr);
  SceneConfig cfg;
  cfg.num_points = f.points;
  cfg.inlier_fraction = f.inlier_fraction;
  cfg.noise_px = f.noise;
  cfg.frame = {width, height};
  cfg.focal = f.focal;
  cfg.lambda = k == SolverKind::kFrhfr ? f.lambda : 0.0;
  const SyntheticInstance inst = generate(cfg, c.seed);
  OutputDir out(c.output, "csv");
  std::ostringstream csv;
  write_correspondences_csv(csv, inst.correspondences, cfg.frame);
  out.save("correspondences.csv", csv.str());
  out.json_file("correspondences.json", {{"width", width}, {"height", height}});
  out.json_file("ground_truth.json", ground_truth_json(inst));
  out.manifest("synth",
               {{"solver", to_string(k)}, {"points", f.points},
                {"inlier_fraction", f.inlier_fraction}, {"noise_sigma_px", f.noise},
                {"focal", f.focal}, {"lambda", cfg.lambda.value()}, {"width", width},
                {"height", height}},
               c.seed, started);
}

void cmd_solve(const Common& c, const RansacFlags& f, const std::string& input,
               std::string sidecar, bool use_ransac, double focal, double lambda) {
  const std::string started = iso_now();
  const SolverKind k = single_solver(c, SolverKind::kFrhfr);
  if (sidecar.empty()) sidecar = fs::path(input).replace_extension(".json").string();
  const CorrespondenceSet set = read_correspondences(input, sidecar);
  const Intrinsics known{focal, lambda};
  const auto& corrs = set.correspondences;
  const GravityRotation r1 = corrs.empty() ? GravityRotation() : corrs.front().r1;
  const GravityRotation r2 = corrs.empty() ? GravityRotation() : corrs.front().r2;

  json result;
  result["solver"] = to_string(k);
  result["correspondences"] = corrs.size();
  if (use_ransac) {
    RansacConfig rc;
    rc.threshold_px = f.threshold;
    rc.time_budget_ms = f.budget_ms;
    rc.max_iterations = f.iterations;
    rc.seed = c.seed;
    rc.frame = set.frame;
    rc.known = known;
    const RansacReport rep = run_ransac(corrs, k, rc);
    result["mode"] = "ransac";
    result["solutions"] = json::array({solution_json(rep.best, r1, r2, known)});
    std::vector<int> mask(rep.inlier_mask.begin(), rep.inlier_mask.end());
    result["num_inliers"] = rep.num_inliers;
    result["inlier_mask"] = mask;
    result["iterations"] = rep.iterations;
    result["elapsed_ms"] = rep.elapsed_ms;
  } else {
    const std::size_t m = static_cast<std::size_t>(minimal_sample_size(k));
    if (corrs.size() < m) {
      throw Error(ErrorCode::kInsufficientData,
                  std::string(to_string(k)) + " needs " + std::to_string(m) +
                      " correspondences, file has " + std::to_string(corrs.size()));
    }
    const SolverResult res =
        run_solver(k, std::span<const Correspondence>(corrs).first(m), known);
    result["mode"] = "minimal";
    result["status"] = to_string(res.status);
    json sols = json::array();
    for (const auto& s : res.solutions) sols.push_back(solution_json(s, r1, r2, known));
    result["solutions"] = sols;
  }
  OutputDir out(c.output, "csv");
  out.json_file("solutions.json", result);
  std::printf("%s: %zu solution(s)\n", std::string(to_string(k)).c_str(),
              result["solutions"].size());
  out.manifest("solve",
               {{"solver", to_string(k)}, {"input", input}, {"sidecar", sidecar},
                {"ransac", use_ransac}, {"focal", focal}, {"lambda", lambda}},
               c.seed, started);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gravity-aligned homography solvers: experiments and batch solving"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Common stab, noise, drift, timing, ransac, synth, solve;
  std::string sigma_text = "0,0.1,0.5,1,2";
  std::string drift_text = "0,0.1,0.5,1,2,5,10,45";
  double drift_sigma = 0.5;
  int drift_points = 50;
  int warmup = 1000;
  RansacFlags rf, sf, solve_f;
  sf.noise = 0.0;
  sf.inlier_fraction = 1.0;
  double width = 640, height = 480;
  std::string input, sidecar;
  bool use_ransac = false;
  double known_focal = 1.0, known_lambda = 0.0;

  auto* s = app.add_subcommand("stability", "Noise-free solver accuracy per instance");
  add_common(s, stab, true);
  s->add_option("--instances", stab.instances, "Instances per solver (default 10000)")
      ->check(CLI::NonNegativeNumber);

  auto* nz = app.add_subcommand("noise", "Error quantiles versus pixel noise");
  add_common(nz, noise, true);
  nz->add_option("--instances", noise.instances, "Instances per noise level (default 1000)")
      ->check(CLI::NonNegativeNumber);
  nz->add_option("--noise-sigma", sigma_text, "Comma-separated noise levels in pixels");

  auto* dr = app.add_subcommand("drift", "Error versus IMU yaw drift, with and without refinement");
  add_common(dr, drift, true);
  dr->add_option("--instances", drift.instances, "Instances per drift level (default 1000)")
      ->check(CLI::NonNegativeNumber);
  dr->add_option("--drift-deg", drift_text, "Comma-separated yaw drifts in degrees");
  dr->add_option("--noise-sigma", drift_sigma, "Pixel noise")->check(CLI::NonNegativeNumber);
  dr->add_option("--points", drift_points, "Points per scene used by the refinement")
      ->check(CLI::Range(8, 100000));

  auto* tm = app.add_subcommand("timing", "Mean solver execution time");
  add_common(tm, timing, true);
  tm->add_option("--instances", timing.instances, "Timed calls per solver (default 100000)")
      ->check(CLI::PositiveNumber);
  tm->add_option("--warmup", warmup, "Untimed warmup calls")->check(CLI::NonNegativeNumber);

  auto* rs = app.add_subcommand("ransac", "LO-RANSAC on contaminated synthetic scenes");
  add_common(rs, ransac, false);
  add_ransac_flags(rs, rf);
  rs->add_option("--inlier-fraction", rf.inlier_fraction, "Fraction of inliers")
      ->check(CLI::Range(0.0, 1.0));
  rs->add_option("--noise-sigma", rf.noise, "Pixel noise")->check(CLI::NonNegativeNumber);
  rs->add_option("--points", rf.points, "Correspondences per scene")->check(CLI::PositiveNumber);
  rs->add_option("--repeats", rf.repeats, "Number of runs")->check(CLI::PositiveNumber);

  auto* sy = app.add_subcommand("synth", "Export a synthetic scene as a correspondence file");
  add_common(sy, synth, false);
  sy->add_option("--points", sf.points, "Correspondences")->check(CLI::PositiveNumber);
  sy->add_option("--inlier-fraction", sf.inlier_fraction, "Fraction of inliers")
      ->check(CLI::Range(0.0, 1.0));
  sy->add_option("--noise-sigma", sf.noise, "Pixel noise")->check(CLI::NonNegativeNumber);
  sy->add_option("--focal", sf.focal, "Focal length (normalized units)")
      ->check(CLI::PositiveNumber);
  sy->add_option("--lambda", sf.lambda, "Division-model coefficient");
  sy->add_option("--width", width, "Image width in pixels")->check(CLI::PositiveNumber);
  sy->add_option("--height", height, "Image height in pixels")->check(CLI::PositiveNumber);

  auto* so = app.add_subcommand("solve", "Run a solver on a correspondence file");
  add_common(so, solve, false);
  add_ransac_flags(so, solve_f);
  so->add_option("--input", input, "Correspondence CSV")->required();
  so->add_option("--sidecar", sidecar, "Sidecar JSON with width/height (default: input with .json)");
  so->add_flag("--ransac", use_ransac, "Use all correspondences with LO-RANSAC");
  so->add_option("--focal", known_focal, "Known focal length (calib solver)")
      ->check(CLI::PositiveNumber);
  so->add_option("--lambda", known_lambda, "Known distortion (calib and fhf solvers)");

  auto* sc = app.add_subcommand("schema", "Print the versioned column manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::fprintf(stderr, "error: UsageError: %s\n", msg.c_str());
    return 2;
  }

  try {
    if (*s) cmd_stability(stab);
    else if (*nz) cmd_noise(noise, sigma_text);
    else if (*dr) cmd_drift(drift, drift_text, drift_sigma, drift_points);
    else if (*tm) cmd_timing(timing, warmup);
    else if (*rs) cmd_ransac(ransac, rf);
    else if (*sy) cmd_synth(synth, sf, width, height);
    else if (*so) cmd_solve(solve, solve_f, input, sidecar, use_ransac, known_focal, known_lambda);
    else if (*sc) std::cout << schema_manifest().dump(2) << "\n";
  } catch (const Error& e) {
    std::string msg = e.what();
    for (char& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.code())).c_str(),
                 msg.c_str());
    return e.code() == ErrorCode::kUsage ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
