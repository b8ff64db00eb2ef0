#pragma once

#include <span>

#include "gravhom/solvers/calibrated.hpp"
#include "gravhom/solvers/common.hpp"
#include "gravhom/solvers/fhf.hpp"
#include "gravhom/solvers/frhfr.hpp"

namespace gravhom {

/// Runs the minimal solver selected by `kind` on the first
/// minimal_sample_size(kind) correspondences. `known` supplies the intrinsics
/// the solver does not estimate.
inline SolverResult run_solver(SolverKind kind,
                               std::span<const Correspondence> sample,
                               const Intrinsics& known = {}) {
  switch (kind) {
    case SolverKind::kCalibrated: return solve_calibrated(sample, known);
    case SolverKind::kFhf: return solve_fhf(sample, known.lambda);
    case SolverKind::kFrhfr: return solve_frhfr(sample);
  }
  return {};
}

}  // namespace gravhom
