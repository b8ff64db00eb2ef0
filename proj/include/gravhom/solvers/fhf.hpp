#pragma once

// Two-point solver for gravity-aligned motion with an unknown shared focal
// length. Two constraint rows per point give a 4x4 polynomial matrix in the
// focal length w whose null vector is [h1, h2, h3, 1].

#include <algorithm>
#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "gravhom/core_geometry.hpp"
#include "gravhom/poly.hpp"
#include "gravhom/solvers/common.hpp"

namespace gravhom {

struct FhfSystem {
  PolyMatrix matrix{4, 4};
  int dropped_row = 2;
  // Aligned rays as affine functions of w: y(w) = base + w * slope.
  std::array<Eigen::Vector3d, 2> y1_base, y1_slope, y2_base, y2_slope;
};

inline FhfSystem build_fhf_system(std::span<const Correspondence> corrs,
                                  double lambda = 0.0) {
  detail::require_sample(corrs, 2, "fHf solver");
  FhfSystem sys;
  sys.dropped_row = detail::dropped_row(corrs[1].r2);
  const auto kept = detail::kept_rows(sys.dropped_row);

  for (int i = 0; i < 2; ++i) {
    // R^T [x, y, w]: the w-term is the third row of R.
    const Eigen::Vector3d u1 = undistort_div(corrs[i].p1, lambda);
    const Eigen::Vector3d u2 = undistort_div(corrs[i].p2, lambda);
    const Eigen::Matrix3d& r1 = corrs[i].r1.matrix();
    const Eigen::Matrix3d& r2 = corrs[i].r2.matrix();
    sys.y1_base[i] = r1.transpose() * Eigen::Vector3d(u1.x(), u1.y(), 0.0);
    sys.y1_slope[i] = r1.row(2).transpose() * u1.z();
    sys.y2_base[i] = r2.transpose() * Eigen::Vector3d(u2.x(), u2.y(), 0.0);
    sys.y2_slope[i] = r2.row(2).transpose() * u2.z();

    std::array<UniPoly, 3> y1;
    std::array<UniPoly, 3> y2;
    for (int k = 0; k < 3; ++k) {
      y1[k] = UniPoly::linear(sys.y1_base[i](k), sys.y1_slope[i](k));
      y2[k] = UniPoly::linear(sys.y2_base[i](k), sys.y2_slope[i](k));
    }
    for (int j = 0; j < 2; ++j) {
      const auto row = detail::aligned_dlt_row(kept[j], y1, y2);
      for (int c = 0; c < 4; ++c) sys.matrix(2 * i + j, c) = row[c];
    }
  }
  return sys;
}

/// Determinant of the system matrix. The w^8 and w^7 coefficients cancel
/// identically (both points share the leading coefficient matrices), so the
/// result is truncated to degree six.
inline UniPoly fhf_determinant(const FhfSystem& sys) {
  return det_polymatrix(sys.matrix).truncated(6);
}

inline SolverResult solve_fhf(std::span<const Correspondence> corrs,
                              double lambda = 0.0) {
  const FhfSystem sys = build_fhf_system(corrs, lambda);
  SolverResult result;

  const UniPoly det = fhf_determinant(sys);
  double scale = 1.0;
  for (int r = 0; r < 4; ++r) {
    double row_max = 0.0;
    for (int c = 0; c < 4; ++c) {
      row_max = std::max(row_max, sys.matrix(r, c).max_abs_coeff());
    }
    scale *= row_max;
  }
  if (!(det.max_abs_coeff() > 1e-12 * scale)) {
    result.status = SolverStatus::kDegenerateConfiguration;
    return result;
  }

  std::vector<double> roots;
  try {
    roots = real_roots(det);
  } catch (const Error&) {
    result.status = SolverStatus::kDegenerateConfiguration;
    return result;
  }

  for (double w : roots) {
    ++result.diagnostics.candidates;
    const Eigen::Matrix4d m = sys.matrix.evaluate(w);
    const Nullspace ns = nullspace_min(m);
    const Eigen::Vector4d v = ns.vector;
    if (std::abs(v(3)) < 1e-8) {
      ++result.diagnostics.spurious_filtered;
      continue;
    }
    if (!(w > 0.0)) {
      ++result.diagnostics.nonpositive_filtered;
      continue;
    }
    SolverSolution sol;
    sol.hy = {v(0) / v(3), v(1) / v(3), v(2) / v(3)};
    sol.focal = w;
    sol.tag = SolverKind::kFhf;
    double res = 0.0;
    for (int i = 0; i < 2; ++i) {
      const Eigen::Vector3d y1 = sys.y1_base[i] + w * sys.y1_slope[i];
      const Eigen::Vector3d y2 = sys.y2_base[i] + w * sys.y2_slope[i];
      const double r = detail::aligned_residual(sys.dropped_row, y1, y2, sol.hy);
      if (std::abs(r) > std::abs(res)) res = r;
    }
    sol.residual = res;
    if (!sol.hy.finite()) {
      ++result.diagnostics.rejected;
      continue;
    }
    result.solutions.push_back(sol);
  }

  // Roots introduced by dropping a row satisfy the kept rows but not the
  // dropped one; the held-out residual separates them.
  const std::size_t before = result.solutions.size();
  result.solutions = filter_by_unused_equation(std::move(result.solutions));
  result.diagnostics.rejected +=
      static_cast<int>(before - result.solutions.size());
  std::sort(result.solutions.begin(), result.solutions.end(),
            [](const SolverSolution& a, const SolverSolution& b) {
              return std::abs(a.residual) < std::abs(b.residual);
            });
  if (result.solutions.size() > 4) result.solutions.resize(4);
  if (result.solutions.empty()) result.status = SolverStatus::kNoSolution;
  return result;
}

}  // namespace gravhom
