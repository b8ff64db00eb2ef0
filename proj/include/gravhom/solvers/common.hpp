#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gravhom/core_geometry.hpp"
#include "gravhom/error.hpp"

namespace gravhom {

enum class SolverKind { kCalibrated, kFhf, kFrhfr };

constexpr std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::kCalibrated: return "calib";
    case SolverKind::kFhf: return "fhf";
    case SolverKind::kFrhfr: return "frhfr";
  }
  return "unknown";
}

inline SolverKind parse_solver_kind(std::string_view name) {
  if (name == "calib") return SolverKind::kCalibrated;
  if (name == "fhf") return SolverKind::kFhf;
  if (name == "frhfr") return SolverKind::kFrhfr;
  throw Error(ErrorCode::kUsage, "unknown solver '" + std::string(name) +
                                     "' (expected calib, fhf or frhfr)");
}

/// Correspondences consumed by one call of the minimal solver.
constexpr int minimal_sample_size(SolverKind kind) {
  return kind == SolverKind::kFrhfr ? 3 : 2;
}

constexpr bool estimates_focal(SolverKind kind) {
  return kind != SolverKind::kCalibrated;
}

constexpr bool estimates_distortion(SolverKind kind) {
  return kind == SolverKind::kFrhfr;
}

/// One hypothesis. `focal` / `lambda` are empty when the solver takes them as
/// known inputs rather than estimating them.
struct SolverSolution {
  MotionHomography hy;
  std::optional<double> focal;
  std::optional<double> lambda;
  double residual = 0.0;  // held-out DLT equation, unit-vector scale
  SolverKind tag = SolverKind::kCalibrated;
};

inline Intrinsics resolve_intrinsics(const SolverSolution& sol,
                                     const Intrinsics& known) {
  return {sol.focal.value_or(known.focal), sol.lambda.value_or(known.lambda)};
}

enum class SolverStatus {
  kOk,
  kNoSolution,
  kDegenerateConfiguration,
  kEliminationFailure,
};

constexpr std::string_view to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::kOk: return "ok";
    case SolverStatus::kNoSolution: return "NoSolution";
    case SolverStatus::kDegenerateConfiguration: return "DegenerateConfiguration";
    case SolverStatus::kEliminationFailure: return "EliminationFailure";
  }
  return "unknown";
}

struct SolverDiagnostics {
  int candidates = 0;            // real roots examined
  int spurious_filtered = 0;     // null vector at infinity
  int nonpositive_filtered = 0;  // focal <= 0
  int rejected = 0;              // failed the defining-equation check
};

struct SolverResult {
  SolverStatus status = SolverStatus::kOk;
  std::vector<SolverSolution> solutions;
  SolverDiagnostics diagnostics;

  bool ok() const { return status == SolverStatus::kOk; }
};

/// Drops solutions whose held-out residual exceeds `tau`.
inline std::vector<SolverSolution> filter_by_unused_equation(
    std::vector<SolverSolution> sols, double tau = 1e-6) {
  std::erase_if(sols, [tau](const SolverSolution& s) {
    return !(std::abs(s.residual) <= tau);
  });
  return sols;
}

namespace detail {

/// Index of the cross-product row left out for a frame-2 ray: the dominant
/// world component of the second camera's optical axis. The two remaining
/// rows stay independent whenever that component of the ray is nonzero.
inline int dropped_row(const GravityRotation& r2) {
  Eigen::Index k = 0;
  r2.matrix().row(2).cwiseAbs().maxCoeff(&k);
  return static_cast<int>(k);
}

inline std::array<int, 2> kept_rows(int dropped) {
  switch (dropped) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
  }
}

/// Row k of the aligned constraint y2 x (H_y y1) = 0 written as
/// coeffs . [h1, h2, h3, 1]. With H_y y1 = c + y1_y h, where c = [y1_x, 0, y1_z].
template <typename T>
std::array<T, 4> aligned_dlt_row(int k, const std::array<T, 3>& y1,
                                 const std::array<T, 3>& y2) {
  const T& s = y1[1];
  // c = [y1[0], 0, y1[2]]
  switch (k) {
    case 0:
      return {T(), -(s * y2[2]), s * y2[1], y2[1] * y1[2]};
    case 1:
      return {s * y2[2], T(), -(s * y2[0]), y2[2] * y1[0] - y2[0] * y1[2]};
    default:
      return {-(s * y2[1]), s * y2[0], T(), -(y2[1] * y1[0])};
  }
}

/// Component k of the unit-vector constraint residual for the aligned model.
inline double aligned_residual(int k, const Eigen::Vector3d& y1,
                               const Eigen::Vector3d& y2,
                               const MotionHomography& hy) {
  const Eigen::Vector3d mapped = hy.matrix() * y1;
  return y2.normalized().cross(mapped.normalized())(k);
}

inline void require_sample(std::span<const Correspondence> corrs,
                           std::size_t n, std::string_view who) {
  if (corrs.size() < n) {
    throw Error(ErrorCode::kInsufficientData,
                std::string(who) + " needs " + std::to_string(n) +
                    " correspondences");
  }
}

}  // namespace detail
}  // namespace gravhom
