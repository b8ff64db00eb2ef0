#pragma once

#include "gravhom/core_geometry.hpp"
#include "gravhom/error.hpp"
#include "gravhom/experiments.hpp"
#include "gravhom/poly.hpp"
#include "gravhom/ransac.hpp"
#include "gravhom/solvers.hpp"
#include "gravhom/synth.hpp"

namespace gravhom {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gravhom
