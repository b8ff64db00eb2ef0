#pragma once

// Two-point solver for the translation of a calibrated, gravity-aligned camera
// pair. Three of the four available scalar constraints determine h; the fourth
// is kept back to validate the answer.

#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "gravhom/core_geometry.hpp"
#include "gravhom/solvers/common.hpp"

namespace gravhom {

inline SolverResult solve_calibrated(std::span<const Correspondence> corrs,
                                     const Intrinsics& intr) {
  detail::require_sample(corrs, 2, "calibrated solver");
  SolverResult result;

  const int dropped = detail::dropped_row(corrs[1].r2);
  const auto kept = detail::kept_rows(dropped);

  std::array<std::array<double, 3>, 2> y1{};
  std::array<std::array<double, 3>, 2> y2{};
  std::array<Eigen::Vector3d, 2> v1;
  std::array<Eigen::Vector3d, 2> v2;
  for (int i = 0; i < 2; ++i) {
    v1[i] = align_point(undistort_div(corrs[i].p1, intr.lambda), corrs[i].r1,
                        intr.focal);
    v2[i] = align_point(undistort_div(corrs[i].p2, intr.lambda), corrs[i].r2,
                        intr.focal);
    for (int k = 0; k < 3; ++k) {
      y1[i][k] = v1[i](k);
      y2[i][k] = v2[i](k);
    }
  }

  Eigen::Matrix3d a;
  Eigen::Vector3d b;
  const std::array<std::pair<int, int>, 3> rows = {
      {{0, kept[0]}, {0, kept[1]}, {1, kept[0]}}};
  for (int r = 0; r < 3; ++r) {
    const auto [pt, k] = rows[r];
    const auto row = detail::aligned_dlt_row(k, y1[pt], y2[pt]);
    a.row(r) << row[0], row[1], row[2];
    b(r) = -row[3];
  }

  result.diagnostics.candidates = 1;
  const double norm = a.norm();
  if (!(std::abs(a.determinant()) >= 1e-12 * norm * norm * norm)) {
    result.status = SolverStatus::kDegenerateConfiguration;
    return result;
  }
  const Eigen::Vector3d h = a.partialPivLu().solve(b);

  SolverSolution sol;
  sol.hy = {h(0), h(1), h(2)};
  sol.tag = SolverKind::kCalibrated;
  sol.residual = detail::aligned_residual(kept[1], v1[1], v2[1], sol.hy);
  if (!sol.hy.finite()) {
    result.status = SolverStatus::kNoSolution;
    return result;
  }
  result.solutions.push_back(sol);
  return result;
}

}  // namespace gravhom
