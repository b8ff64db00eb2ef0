#pragma once

// LO-RANSAC over the minimal solvers. Hypotheses are scored by reprojection
// error measured in the distorted image, in pixels.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gravhom/core_geometry.hpp"
#include "gravhom/error.hpp"
#include "gravhom/solvers.hpp"

namespace gravhom {

struct RansacConfig {
  double threshold_px = 5.0;
  int max_iterations = 10000;
  double time_budget_ms = 0.0;  // 0 disables the wall-clock limit
  int lo_max_steps = 20;
  bool lo_on_new_best = true;
  bool final_lo = true;
  std::uint64_t seed = 1;
  double confidence = 0.99;  // early exit; >= 1 disables it
  bool symmetric = false;
  ImageFrame frame;
  Intrinsics known;  // used for whatever the solver does not estimate
  // Held-out equation filter; unset means 10 * threshold / frame scale.
  std::optional<double> filter_tau;
};

struct TracePoint {
  int iteration = 0;
  double elapsed_ms = 0.0;
  int best_inliers = 0;
};

struct RansacReport {
  SolverSolution best;
  std::vector<bool> inlier_mask;
  int num_inliers = 0;
  int best_pre_lo_inliers = 0;
  int iterations = 0;
  int hypotheses = 0;
  int lo_runs = 0;
  double elapsed_ms = 0.0;
  std::vector<TracePoint> trace;
};

// ---------------------------------------------------------------------------
// Scoring

namespace detail {

/// Maps a distorted normalized point of one frame into the other through the
/// aligned homography `m` (H_y or its inverse). nullopt if unscoreable.
inline std::optional<ImagePoint> transfer_distorted(const ImagePoint& p,
                                                    const GravityRotation& from,
                                                    const GravityRotation& to,
                                                    const Eigen::Matrix3d& m,
                                                    const Intrinsics& intr) {
  const Eigen::Vector3d u = undistort_div(p, intr.lambda);
  if (!(u.z() > 0.0) || !(intr.focal > 0.0)) return std::nullopt;
  const Eigen::Vector3d y = align_point(u, from, intr.focal);
  const Eigen::Vector3d c = to.matrix() * (m * y);
  if (!(c.z() > 1e-12)) return std::nullopt;
  const ImagePoint proj(intr.focal * c.x() / c.z(), intr.focal * c.y() / c.z());
  return redistort(proj, intr.lambda);
}

}  // namespace detail

/// Distance in pixels between the measured second point and the first point
/// transferred into the second image. The symmetric variant averages both
/// directions. Returns +inf when the model cannot map the point.
inline double reprojection_error(const Correspondence& c,
                                 const MotionHomography& hy,
                                 const Intrinsics& intr, const ImageFrame& frame,
                                 bool symmetric = false) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto fwd = detail::transfer_distorted(c.p1, c.r1, c.r2, hy.matrix(), intr);
  if (!fwd) return kInf;
  const double e1 = (*fwd - c.p2).norm() * frame.scale();
  if (!symmetric) return std::isfinite(e1) ? e1 : kInf;
  if (std::abs(hy.h2) < 1e-12) return kInf;
  const Eigen::Matrix3d inv = hy.matrix().inverse();
  const auto bwd = detail::transfer_distorted(c.p2, c.r2, c.r1, inv, intr);
  if (!bwd) return kInf;
  const double e = 0.5 * (e1 + (*bwd - c.p1).norm() * frame.scale());
  return std::isfinite(e) ? e : kInf;
}

inline double reprojection_error(const Correspondence& c,
                                 const SolverSolution& sol,
                                 const Intrinsics& known, const ImageFrame& frame,
                                 bool symmetric = false) {
  return reprojection_error(c, sol.hy, resolve_intrinsics(sol, known), frame,
                            symmetric);
}

struct Score {
  int inliers = 0;
  double inlier_sq = 0.0;  // sum of squared errors over inliers

  bool better_than(const Score& o) const {
    return inliers > o.inliers ||
           (inliers == o.inliers && inlier_sq < o.inlier_sq);
  }
};

inline Score score_model(std::span<const Correspondence> corrs,
                         const SolverSolution& sol, const RansacConfig& cfg,
                         std::vector<bool>* mask = nullptr) {
  Score s;
  if (mask) mask->assign(corrs.size(), false);
  const Intrinsics intr = resolve_intrinsics(sol, cfg.known);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double e =
        reprojection_error(corrs[i], sol.hy, intr, cfg.frame, cfg.symmetric);
    if (e <= cfg.threshold_px) {
      ++s.inliers;
      s.inlier_sq += e * e;
      if (mask) (*mask)[i] = true;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Local optimization

struct LoOptions {
  int max_steps = 20;
  double initial_damping = 1e-3;
  bool symmetric = false;
  ImageFrame frame;
  // Residual used for points the model cannot map, so the cost stays finite.
  double unscoreable_px = 1e3;
};

namespace detail {

inline Eigen::VectorXd pack(const SolverSolution& s) {
  Eigen::VectorXd x(3 + (s.focal ? 1 : 0) + (s.lambda ? 1 : 0));
  x(0) = s.hy.h1;
  x(1) = s.hy.h2;
  x(2) = s.hy.h3;
  int k = 3;
  if (s.focal) x(k++) = *s.focal;
  if (s.lambda) x(k++) = *s.lambda;
  return x;
}

inline SolverSolution unpack(const SolverSolution& tmpl, const Eigen::VectorXd& x) {
  SolverSolution s = tmpl;
  s.hy = {x(0), x(1), x(2)};
  int k = 3;
  if (s.focal) s.focal = x(k++);
  if (s.lambda) s.lambda = x(k++);
  return s;
}

inline Eigen::VectorXd lo_residuals(std::span<const Correspondence> pts,
                                    const SolverSolution& s,
                                    const Intrinsics& known,
                                    const LoOptions& opt) {
  Eigen::VectorXd r(2 * pts.size());
  const Intrinsics intr = resolve_intrinsics(s, known);
  const double scale = opt.frame.scale();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Correspondence& c = pts[i];
    std::optional<ImagePoint> fwd;
    if (intr.focal > 0.0) {
      fwd = transfer_distorted(c.p1, c.r1, c.r2, s.hy.matrix(), intr);
    }
    if (fwd && fwd->allFinite()) {
      r.segment<2>(2 * i) = (*fwd - c.p2) * scale;
    } else {
      r.segment<2>(2 * i).setConstant(opt.unscoreable_px);
    }
  }
  if (opt.symmetric) {
    Eigen::VectorXd both(4 * pts.size());
    both.head(r.size()) = r;
    const Eigen::Matrix3d inv =
        std::abs(s.hy.h2) > 1e-12 ? Eigen::Matrix3d(s.hy.matrix().inverse())
                                  : Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Correspondence& c = pts[i];
      std::optional<ImagePoint> bwd;
      if (intr.focal > 0.0 && std::abs(s.hy.h2) > 1e-12) {
        bwd = transfer_distorted(c.p2, c.r2, c.r1, inv, intr);
      }
      if (bwd && bwd->allFinite()) {
        both.segment<2>(r.size() + 2 * i) = (*bwd - c.p1) * scale;
      } else {
        both.segment<2>(r.size() + 2 * i).setConstant(opt.unscoreable_px);
      }
    }
    return both;
  }
  return r;
}

}  // namespace detail

/// Sum of squared reprojection residuals minimized by lo_refine.
inline double lo_cost(std::span<const Correspondence> pts, const SolverSolution& s,
                      const Intrinsics& known, const LoOptions& opt) {
  return detail::lo_residuals(pts, s, known, opt).squaredNorm();
}

/// Levenberg-Marquardt on (h1, h2, h3) plus whichever of f and lambda the
/// solution carries, with rotations held fixed. The returned cost never
/// exceeds the input cost.
inline SolverSolution lo_refine(const SolverSolution& sol,
                                std::span<const Correspondence> inliers,
                                const Intrinsics& known, const LoOptions& opt = {}) {
  if (inliers.size() < 4) {
    throw Error(ErrorCode::kPrecondition, "local optimization needs >= 4 inliers");
  }
  Eigen::VectorXd x = detail::pack(sol);
  const Eigen::Index n = x.size();
  auto residuals = [&](const Eigen::VectorXd& v) {
    return detail::lo_residuals(inliers, detail::unpack(sol, v), known, opt);
  };
  Eigen::VectorXd r = residuals(x);
  double cost = r.squaredNorm();
  double mu = opt.initial_damping;

  for (int step = 0; step < opt.max_steps && cost > 0.0; ++step) {
    Eigen::MatrixXd j(r.size(), n);
    for (Eigen::Index k = 0; k < n; ++k) {
      Eigen::VectorXd xp = x;
      const double h = 1e-6 * (1.0 + std::abs(x(k)));
      xp(k) += h;
      j.col(k) = (residuals(xp) - r) / h;
    }
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    if (g.norm() <= 1e-15 * (1.0 + cost)) break;

    bool improved = false;
    while (mu < 1e12) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += mu * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd dx = a.ldlt().solve(-g);
      if (!dx.allFinite()) {
        mu *= 10.0;
        continue;
      }
      const Eigen::VectorXd xn = x + dx;
      const Eigen::VectorXd rn = residuals(xn);
      const double cn = rn.squaredNorm();
      if (std::isfinite(cn) && cn < cost) {
        const double rel = (cost - cn) / cost;
        x = xn;
        r = rn;
        cost = cn;
        mu = std::max(mu / 10.0, 1e-12);
        improved = true;
        if (rel < 1e-12) step = opt.max_steps;
        break;
      }
      mu *= 10.0;
    }
    if (!improved) break;
  }
  SolverSolution out = detail::unpack(sol, x);
  if (out.focal && !(*out.focal > 0.0)) return sol;
  return out;
}

// ---------------------------------------------------------------------------
// Main loop

namespace detail {

inline int required_iterations(int inliers, int n, int m, double confidence) {
  if (!(confidence < 1.0) || n == 0) return std::numeric_limits<int>::max();
  const double w = static_cast<double>(inliers) / n;
  const double wm = std::pow(w, m);
  if (wm >= 1.0) return 1;
  if (wm <= 0.0) return std::numeric_limits<int>::max();
  const double k = std::log(1.0 - confidence) / std::log(1.0 - wm);
  return k > 1e9 ? std::numeric_limits<int>::max()
                 : static_cast<int>(std::ceil(k));
}

inline std::vector<Correspondence> select(std::span<const Correspondence> corrs,
                                          const std::vector<bool>& mask) {
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (mask[i]) out.push_back(corrs[i]);
  }
  return out;
}

}  // namespace detail

inline RansacReport run_ransac(std::span<const Correspondence> corrs,
                               SolverKind kind, const RansacConfig& cfg) {
  if (!(cfg.threshold_px > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "threshold must be positive");
  }
  if (cfg.max_iterations <= 0 && !(cfg.time_budget_ms > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "need an iteration cap or a time budget");
  }
  const int m = minimal_sample_size(kind);
  const int n = static_cast<int>(corrs.size());
  if (n < m) {
    throw Error(ErrorCode::kInsufficientData,
                std::string(to_string(kind)) + " needs at least " +
                    std::to_string(m) + " correspondences, got " +
                    std::to_string(n));
  }

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };

  const double tau = cfg.filter_tau.value_or(10.0 * cfg.threshold_px / cfg.frame.scale());
  LoOptions lo;
  lo.max_steps = cfg.lo_max_steps;
  lo.symmetric = cfg.symmetric;
  lo.frame = cfg.frame;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<Correspondence> sample(m);
  std::array<int, 3> idx{};

  RansacReport rep;
  bool have_best = false;
  Score best;
  std::vector<bool> best_mask;
  int needed = std::numeric_limits<int>::max();
  const int cap = cfg.max_iterations > 0 ? cfg.max_iterations
                                         : std::numeric_limits<int>::max();

  // Refines `sol` on its consensus set while that keeps improving the score.
  auto local_opt = [&](SolverSolution sol, Score score, std::vector<bool> mask) {
    for (int round = 0; round < 3; ++round) {
      if (score.inliers < 4) break;
      ++rep.lo_runs;
      const std::vector<Correspondence> in = detail::select(corrs, mask);
      SolverSolution refined = lo_refine(sol, in, cfg.known, lo);
      std::vector<bool> rmask;
      const Score rs = score_model(corrs, refined, cfg, &rmask);
      if (rs.inliers < score.inliers ||
          (rs.inliers == score.inliers && !(rs.inlier_sq < score.inlier_sq))) {
        break;
      }
      const bool grew = rs.inliers > score.inliers;
      sol = refined;
      score = rs;
      mask = std::move(rmask);
      if (!grew) break;
    }
    return std::make_tuple(sol, score, mask);
  };

  int it = 0;
  for (; it < cap && it < needed; ++it) {
    if (cfg.time_budget_ms > 0.0 && elapsed_ms() >= cfg.time_budget_ms) break;

    for (int k = 0; k < m; ++k) {
      int v;
      do {
        v = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + k, v) != idx.begin() + k);
      idx[k] = v;
      sample[k] = corrs[v];
    }

    SolverResult res;
    try {
      res = run_solver(kind, sample, cfg.known);
    } catch (const Error&) {
      res.status = SolverStatus::kDegenerateConfiguration;
    }
    if (res.ok()) {
      for (const SolverSolution& hyp : filter_by_unused_equation(res.solutions, tau)) {
        ++rep.hypotheses;
        std::vector<bool> mask;
        const Score s = score_model(corrs, hyp, cfg, &mask);
        rep.best_pre_lo_inliers = std::max(rep.best_pre_lo_inliers, s.inliers);
        if (have_best && !s.better_than(best)) continue;
        SolverSolution cand = hyp;
        Score cs = s;
        if (cfg.lo_on_new_best && s.inliers >= 4) {
          std::tie(cand, cs, mask) = local_opt(hyp, s, std::move(mask));
        }
        rep.best = cand;
        best = cs;
        best_mask = std::move(mask);
        have_best = true;
        needed = detail::required_iterations(best.inliers, n, m, cfg.confidence);
      }
    }
    rep.trace.push_back({it + 1, elapsed_ms(), have_best ? best.inliers : 0});
  }
  rep.iterations = it;

  if (!have_best) {
    throw Error(ErrorCode::kNoModelFound,
                "no hypothesis produced a solution in " + std::to_string(it) +
                    " iterations");
  }
  if (cfg.final_lo && best.inliers >= 4) {
    std::tie(rep.best, best, best_mask) = local_opt(rep.best, best, best_mask);
  }
  rep.inlier_mask = std::move(best_mask);
  rep.num_inliers = best.inliers;
  rep.elapsed_ms = elapsed_ms();
  if (!rep.trace.empty()) {
    rep.trace.push_back({it, rep.elapsed_ms, rep.num_inliers});
  }
  return rep;
}

}  // namespace gravhom
