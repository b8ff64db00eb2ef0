#pragma once

// CSV/JSON serialization of experiment outputs and correspondence files.
// Every table has a versioned column schema; readers reject mismatches.

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gravhom/core_geometry.hpp"
#include "gravhom/error.hpp"
#include "gravhom/experiments.hpp"

namespace gravhom {

inline constexpr int kSchemaVersion = 1;

struct TableSchema {
  std::string name;
  std::vector<std::string> columns;
  // Wall-clock columns; excluded when comparing reruns.
  std::vector<std::string> timing_columns;
};

inline const std::vector<TableSchema>& table_schemas() {
  static const std::vector<TableSchema> schemas = {
      {"stability",
       {"index", "seed", "solver", "status", "num_solutions", "spurious_filtered",
        "err_h", "err_f", "err_lambda", "log10_err_h", "log10_err_f",
        "log10_err_lambda"},
       {}},
      {"noise",
       {"index", "seed", "solver", "sigma_px", "status", "num_solutions",
        "err_rot", "err_trans", "err_f", "err_lambda", "err_h"},
       {}},
      {"noise_summary",
       {"solver", "sigma_px", "metric", "count", "failures", "min", "q25",
        "median", "q75", "max"},
       {}},
      {"drift",
       {"index", "seed", "solver", "drift_deg", "sigma_px", "status",
        "err_h_solver", "err_rot_solver", "err_trans_solver", "err_f_solver",
        "err_lambda_solver", "err_h_lo", "err_rot_lo", "err_trans_lo",
        "err_f_lo", "err_lambda_lo", "cost_solver", "cost_lo"},
       {}},
      {"timing",
       {"solver", "instances", "warmup", "batch_size", "mean_us",
        "median_batch_us", "budget_iterations"},
       {"mean_us", "median_batch_us", "budget_iterations"}},
      {"ransac_runs",
       {"repeat", "seed", "true_inliers", "found_inliers", "true_positives",
        "precision", "recall", "iterations", "elapsed_ms", "err_h", "err_f",
        "err_lambda"},
       {"elapsed_ms"}},
      {"ransac_trace",
       {"repeat", "iteration", "elapsed_ms", "best_inliers"},
       {"elapsed_ms"}},
      {"ransac_trace_mean", {"time_ms", "mean_inliers"}, {"mean_inliers"}},
      {"correspondences",
       {"x1", "y1", "x2", "y2", "qw1", "qx1", "qy1", "qz1", "qw2", "qx2", "qy2",
        "qz2"},
       {}},
  };
  return schemas;
}

inline const TableSchema& table_schema(const std::string& name) {
  for (const auto& s : table_schemas()) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::kSchema, "unknown table '" + name + "'");
}

/// Machine-readable column manifest (the content of docs/schemas.json).
inline nlohmann::ordered_json schema_manifest() {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  nlohmann::ordered_json tables = nlohmann::ordered_json::object();
  for (const auto& s : table_schemas()) {
    tables[s.name] = {{"columns", s.columns}, {"timing_columns", s.timing_columns}};
  }
  j["tables"] = tables;
  return j;
}

// ---------------------------------------------------------------------------
// Low-level CSV

/// Shortest round-trip representation; NaN and infinities as nan/inf/-inf.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const TableSchema& schema)
      : os_(os), width_(schema.columns.size()) {
    write_row(schema.columns);
  }

  template <typename... Ts>
  void row(const Ts&... cells) {
    std::vector<std::string> out;
    (out.push_back(cell(cells)), ...);
    if (out.size() != width_) {
      throw Error(ErrorCode::kSchema, "row width does not match schema");
    }
    write_row(out);
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long long v) { return std::to_string(v); }
  static std::string cell(std::uint64_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(std::string_view v) { return std::string(v); }
  static std::string cell(const char* v) { return v; }

  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << cells[i];
    }
    os_ << '\n';
  }

  std::ostream& os_;
  std::size_t width_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> row_numbers;  // 1-based data-row number of each entry

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(ErrorCode::kSchema, "missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

/// Reads a CSV whose header must equal `schema`'s columns. Row numbers in
/// error messages count data rows from 1 (the header is line 1).
inline CsvTable read_csv(std::istream& is, const TableSchema& schema) {
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) {
    throw Error(ErrorCode::kSchema, schema.name + ": missing header");
  }
  t.header = split_csv_line(line);
  if (t.header != schema.columns) {
    throw Error(ErrorCode::kSchema,
                schema.name + ": header does not match schema version " +
                    std::to_string(kSchemaVersion));
  }
  int row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw Error(ErrorCode::kParse,
                  schema.name + ": row " + std::to_string(row) + " (line " +
                      std::to_string(row + 1) + "): expected " +
                      std::to_string(t.header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.row_numbers.push_back(row);
  }
  return t;
}

inline double parse_double(const std::string& s, int row, const std::string& col) {
  if (s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != last) {
    throw Error(ErrorCode::kParse, "row " + std::to_string(row) + ", column '" +
                                       col + "': not a number: '" + s + "'");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Experiment tables

inline void write_stability_csv(std::ostream& os,
                                const std::vector<StabilityRecord>& recs) {
  CsvWriter w(os, table_schema("stability"));
  for (const auto& r : recs) {
    w.row(r.index, r.seed, to_string(r.solver), r.status, r.num_solutions,
          r.spurious_filtered, r.err_h, r.err_f, r.err_lambda,
          log10_error(r.err_h), log10_error(r.err_f), log10_error(r.err_lambda));
  }
}

inline void write_noise_csv(std::ostream& os, const std::vector<NoiseRecord>& recs) {
  CsvWriter w(os, table_schema("noise"));
  for (const auto& r : recs) {
    w.row(r.index, r.seed, to_string(r.solver), r.sigma_px, r.status,
          r.num_solutions, r.errors.rotation, r.errors.translation, r.errors.focal,
          r.errors.lambda, r.errors.homography);
  }
}

inline void write_noise_summary_csv(std::ostream& os, SolverKind kind,
                                    const std::vector<NoiseSummary>& sums) {
  CsvWriter w(os, table_schema("noise_summary"));
  for (const auto& s : sums) {
    const std::pair<const char*, const Quantiles*> metrics[] = {
        {"err_rot", &s.rotation},   {"err_trans", &s.translation},
        {"err_f", &s.focal},        {"err_lambda", &s.lambda},
        {"err_h", &s.homography}};
    for (const auto& [name, q] : metrics) {
      w.row(to_string(kind), s.sigma_px, name, q->count, s.failures, q->min,
            q->q25, q->median, q->q75, q->max);
    }
  }
}

inline void write_drift_csv(std::ostream& os, const std::vector<DriftRecord>& recs) {
  CsvWriter w(os, table_schema("drift"));
  for (const auto& r : recs) {
    w.row(r.index, r.seed, to_string(r.solver), r.drift_deg, r.sigma_px, r.status,
          r.solver_only.homography, r.solver_only.rotation,
          r.solver_only.translation, r.solver_only.focal, r.solver_only.lambda,
          r.refined.homography, r.refined.rotation, r.refined.translation,
          r.refined.focal, r.refined.lambda, r.cost_solver, r.cost_refined);
  }
}

inline void write_timing_csv(std::ostream& os, const std::vector<TimingRow>& rows) {
  CsvWriter w(os, table_schema("timing"));
  for (const auto& r : rows) {
    w.row(to_string(r.solver), r.instances, r.warmup, r.batch_size, r.mean_us,
          r.median_batch_us, r.budget_iterations);
  }
}

inline void write_ransac_runs_csv(std::ostream& os,
                                  const std::vector<RansacRunRecord>& runs) {
  CsvWriter w(os, table_schema("ransac_runs"));
  for (const auto& r : runs) {
    w.row(r.repeat, r.seed, r.true_inliers, r.found_inliers, r.true_positives,
          r.precision, r.recall, r.iterations, r.elapsed_ms, r.errors.homography,
          r.errors.focal, r.errors.lambda);
  }
}

inline void write_ransac_trace_csv(std::ostream& os,
                                   const std::vector<RansacRunRecord>& runs) {
  CsvWriter w(os, table_schema("ransac_trace"));
  for (const auto& r : runs) {
    for (const auto& tp : r.trace) {
      w.row(r.repeat, tp.iteration, tp.elapsed_ms, tp.best_inliers);
    }
  }
}

inline void write_trace_mean_csv(std::ostream& os, const AveragedTrace& tr) {
  CsvWriter w(os, table_schema("ransac_trace_mean"));
  for (std::size_t i = 0; i < tr.time_ms.size(); ++i) {
    w.row(tr.time_ms[i], tr.mean_inliers[i]);
  }
}

/// Summary of a stability run: failure counts and log10 error quantiles.
inline nlohmann::ordered_json stability_summary(const std::vector<StabilityRecord>& recs) {
  nlohmann::ordered_json j;
  j["instances"] = recs.size();
  std::map<std::string, int> status;
  std::vector<double> lh, lf, ll;
  int max_solutions = 0;
  int within_h = 0, within_f = 0, within_l = 0;
  for (const auto& r : recs) {
    ++status[r.status];
    max_solutions = std::max(max_solutions, r.num_solutions);
    if (r.status != "ok") continue;
    lh.push_back(log10_error(r.err_h));
    lf.push_back(log10_error(r.err_f));
    ll.push_back(log10_error(r.err_lambda));
    within_h += log10_error(r.err_h) <= -6.0;
    within_f += std::isnan(r.err_f) || log10_error(r.err_f) <= -6.0;
    within_l += std::isnan(r.err_lambda) || log10_error(r.err_lambda) <= -6.0;
  }
  j["status_counts"] = status;
  j["max_solutions"] = max_solutions;
  const double n = recs.empty() ? 1.0 : static_cast<double>(recs.size());
  j["fraction_log10_err_h_le_-6"] = within_h / n;
  j["fraction_log10_err_f_le_-6"] = within_f / n;
  j["fraction_log10_err_lambda_le_-6"] = within_l / n;
  auto q = [](const std::vector<double>& v) {
    const Quantiles s = summarize(v);
    nlohmann::ordered_json o;
    o["count"] = s.count;
    auto num = [](double x) { return std::isnan(x) ? nlohmann::ordered_json() : nlohmann::ordered_json(x); };
    o["min"] = num(s.min);
    o["q25"] = num(s.q25);
    o["median"] = num(s.median);
    o["q75"] = num(s.q75);
    o["max"] = num(s.max);
    return o;
  };
  j["log10_err_h"] = q(lh);
  j["log10_err_f"] = q(lf);
  j["log10_err_lambda"] = q(ll);
  return j;
}

// ---------------------------------------------------------------------------
// Correspondence files

struct CorrespondenceSet {
  ImageFrame frame;
  std::vector<Correspondence> correspondences;  // normalized coordinates
};

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

inline ImageFrame frame_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("width") || !j.contains("height") ||
      !j["width"].is_number() || !j["height"].is_number()) {
    throw Error(ErrorCode::kValidation, "sidecar needs numeric width and height");
  }
  ImageFrame f{j["width"].get<double>(), j["height"].get<double>()};
  if (!(f.width > 0.0 && f.height > 0.0)) {
    throw Error(ErrorCode::kValidation, "image size must be positive");
  }
  return f;
}

/// Parses correspondences given in distortion-centered pixels with Hamilton
/// world-to-camera quaternions. Quaternions must be unit within `quat_tol`.
inline std::vector<Correspondence> read_correspondences_csv(std::istream& is,
                                                            const ImageFrame& frame,
                                                            double quat_tol = 1e-6) {
  const TableSchema& schema = table_schema("correspondences");
  const CsvTable t = read_csv(is, schema);
  std::vector<Correspondence> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    const int row = t.row_numbers[r];
    double v[12];
    for (int k = 0; k < 12; ++k) v[k] = parse_double(cells[k], row, schema.columns[k]);
    for (int k = 0; k < 12; ++k) {
      if (!std::isfinite(v[k])) {
        throw Error(ErrorCode::kParse, "row " + std::to_string(row) + ", column '" +
                                           schema.columns[k] + "': not finite");
      }
    }
    Correspondence c;
    c.p1 = frame.to_normalized({v[0], v[1]});
    c.p2 = frame.to_normalized({v[2], v[3]});
    try {
      c.r1 = GravityRotation::from_quaternion({v[4], v[5], v[6], v[7]}, quat_tol);
      c.r2 = GravityRotation::from_quaternion({v[8], v[9], v[10], v[11]}, quat_tol);
    } catch (const Error& e) {
      throw Error(ErrorCode::kValidation, "row " + std::to_string(row) + ": " + e.what());
    }
    out.push_back(c);
  }
  return out;
}

inline CorrespondenceSet read_correspondences(const std::string& csv_path,
                                              const std::string& sidecar_path) {
  CorrespondenceSet set;
  set.frame = frame_from_json(read_json_file(sidecar_path));
  std::ifstream in(csv_path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + csv_path + "'");
  try {
    set.correspondences = read_correspondences_csv(in, set.frame);
  } catch (const Error& e) {
    throw Error(e.code(), csv_path + ": " + e.what());
  }
  return set;
}

inline void write_correspondences_csv(std::ostream& os,
                                      const std::vector<Correspondence>& corrs,
                                      const ImageFrame& frame) {
  CsvWriter w(os, table_schema("correspondences"));
  for (const auto& c : corrs) {
    const ImagePoint a = frame.to_pixels(c.p1);
    const ImagePoint b = frame.to_pixels(c.p2);
    Eigen::Quaterniond q1 = c.r1.quaternion();
    Eigen::Quaterniond q2 = c.r2.quaternion();
    w.row(a.x(), a.y(), b.x(), b.y(), q1.w(), q1.x(), q1.y(), q1.z(), q2.w(),
          q2.x(), q2.y(), q2.z());
  }
}

inline nlohmann::ordered_json quaternion_json(const GravityRotation& r) {
  const Eigen::Quaterniond q = r.quaternion();
  return {q.w(), q.x(), q.y(), q.z()};
}

/// Ground truth of a synthetic instance (normalized units).
inline nlohmann::ordered_json ground_truth_json(const SyntheticInstance& inst) {
  nlohmann::ordered_json j;
  j["focal"] = inst.intrinsics.focal;
  j["lambda"] = inst.intrinsics.lambda;
  j["h"] = {inst.hy.h1, inst.hy.h2, inst.hy.h3};
  j["translation"] = {inst.translation.x(), inst.translation.y(), inst.translation.z()};
  j["r1"] = quaternion_json(inst.r1);
  j["r2"] = quaternion_json(inst.r2);
  std::vector<int> mask(inst.inlier_mask.begin(), inst.inlier_mask.end());
  j["inlier_mask"] = mask;
  return j;
}

inline nlohmann::ordered_json solution_json(const SolverSolution& s,
                                            const GravityRotation& r1,
                                            const GravityRotation& r2,
                                            const Intrinsics& known) {
  nlohmann::ordered_json j;
  j["solver"] = to_string(s.tag);
  j["h"] = {s.hy.h1, s.hy.h2, s.hy.h3};
  const Intrinsics intr = resolve_intrinsics(s, known);
  j["focal"] = intr.focal;
  j["lambda"] = intr.lambda;
  j["focal_estimated"] = s.focal.has_value();
  j["lambda_estimated"] = s.lambda.has_value();
  j["residual"] = s.residual;
  try {
    const RelativePose pose = extract_pose(s.hy, r1, r2);
    nlohmann::ordered_json rot = nlohmann::ordered_json::array();
    for (int r = 0; r < 3; ++r) {
      rot.push_back({pose.rotation(r, 0), pose.rotation(r, 1), pose.rotation(r, 2)});
    }
    j["relative_rotation"] = rot;
    j["translation_dir"] = {pose.translation_dir.x(), pose.translation_dir.y(),
                            pose.translation_dir.z()};
  } catch (const Error& e) {
    j["pose_error"] = std::string(to_string(e.code()));
  }
  try {
    const Eigen::Matrix3d h = compose_homography(s.hy, r1, r2, intr);
    nlohmann::ordered_json hm = nlohmann::ordered_json::array();
    for (int r = 0; r < 3; ++r) hm.push_back({h(r, 0), h(r, 1), h(r, 2)});
    j["homography_normalized"] = hm;
  } catch (const Error&) {
  }
  return j;
}

}  // namespace gravhom
