#pragma once

// Three-point solver for gravity-aligned motion with unknown shared focal
// length f and one-parameter division distortion lambda.
//
// Unknowns are p = f and q = f * lambda, so that the lifted point
// [x, y, p + q r^2] is affine in (p, q). Working in the frame of the second
// camera, G = R + t n^T with R = R2 R1^T, t = R2 t_world and n = R1 e_y, and
// each correspondence contributes b x (G a) = 0.
//
// The third constraint row is affine in (p, q) and linear in the translation;
// eliminating t2 from three of them leaves three consistency conditions on
// (t1, p, q). Together with two first rows this reduces to two conics in
// (p, q), solved through a quartic resultant.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "gravhom/core_geometry.hpp"
#include "gravhom/poly.hpp"
#include "gravhom/solvers/common.hpp"

namespace gravhom {

/// Constraint polynomial: rows index the multipliers [t1, t2, t3, 1], columns
/// the monomials [1, p, q, p^2, p q, q^2].
using FrhfrEquation = Eigen::Matrix<double, 4, 6>;

/// Per-correspondence data in the second camera's frame.
struct FrhfrPoint {
  Eigen::Matrix3d a;  // lifted frame-1 point, columns multiply [1, p, q]
  Eigen::Matrix3d b;  // lifted frame-2 point
};

struct EliminatedSystem {
  Eigen::Matrix3d rotation;  // R2 R1^T
  Eigen::Vector3d normal;    // R1 e_y
  std::array<FrhfrPoint, 3> points;
  // Third rows over [t1 q, t1 p, t1, t2 q, t2 p, t2, q, p, 1].
  Eigen::Matrix<double, 3, 9> third_rows;
  // After eliminating t2: row i reads  t2 * m_i + g_i = 0  with
  // m = [q, p, 1] and g_i over [t1 q, t1 p, t1, q, p, 1].
  Eigen::Matrix<double, 3, 6> g;
  std::array<double, 3> pivots{};  // relative pivot magnitudes
  std::array<FrhfrEquation, 2> first_rows;
  FrhfrEquation held_out;
};

namespace detail {

inline Eigen::Matrix<double, 6, 1> affine_product(const Eigen::Vector3d& x,
                                                  const Eigen::Vector3d& y) {
  Eigen::Matrix<double, 6, 1> out;
  out << x(0) * y(0), x(0) * y(1) + x(1) * y(0), x(0) * y(2) + x(2) * y(0),
      x(1) * y(1), x(1) * y(2) + x(2) * y(1), x(2) * y(2);
  return out;
}

inline FrhfrPoint lift_frhfr(const Correspondence& c) {
  FrhfrPoint pt;
  pt.a.setZero();
  pt.b.setZero();
  pt.a(0, 0) = c.p1.x();
  pt.a(1, 0) = c.p1.y();
  pt.a(2, 1) = 1.0;
  pt.a(2, 2) = c.p1.squaredNorm();
  pt.b(0, 0) = c.p2.x();
  pt.b(1, 0) = c.p2.y();
  pt.b(2, 1) = 1.0;
  pt.b(2, 2) = c.p2.squaredNorm();
  return pt;
}

/// Row r of b x (G a) as a constraint polynomial.
inline FrhfrEquation frhfr_row(int r, const FrhfrPoint& pt,
                               const Eigen::Matrix3d& rot,
                               const Eigen::Vector3d& normal) {
  // (G a)_k = (R a)_k + t_k (n . a); entries affine in [1, p, q].
  const Eigen::Matrix3d ra = rot * pt.a;
  const Eigen::Vector3d s = pt.a.transpose() * normal;
  const int j = (r + 1) % 3;
  const int k = (r + 2) % 3;
  // Row r = b_j (Ga)_k - b_k (Ga)_j.
  FrhfrEquation e = FrhfrEquation::Zero();
  const Eigen::Vector3d bj = pt.b.row(j).transpose();
  const Eigen::Vector3d bk = pt.b.row(k).transpose();
  e.row(k) += affine_product(bj, s).transpose();
  e.row(j) -= affine_product(bk, s).transpose();
  e.row(3) += (affine_product(bj, ra.row(k).transpose()) -
               affine_product(bk, ra.row(j).transpose()))
                  .transpose();
  return e;
}

inline double eval_monomials(const Eigen::Matrix<double, 1, 6>& c, double p,
                             double q) {
  return c(0) + p * (c(1) + c(3) * p + c(4) * q) + q * (c(2) + c(5) * q);
}

inline BiPoly to_bipoly(const Eigen::Matrix<double, 1, 6>& c) {
  BiPoly out;
  out.at(0, 0) = c(0);
  out.at(1, 0) = c(1);
  out.at(0, 1) = c(2);
  out.at(2, 0) = c(3);
  out.at(1, 1) = c(4);
  out.at(0, 2) = c(5);
  return out;
}

}  // namespace detail

inline double evaluate_equation(const FrhfrEquation& e,
                                const Eigen::Vector3d& t_hat, double p,
                                double q) {
  double v = detail::eval_monomials(e.row(3), p, q);
  for (int m = 0; m < 3; ++m) v += t_hat(m) * detail::eval_monomials(e.row(m), p, q);
  return v;
}

/// Builds the lifted equations and eliminates t2 from the three third rows by
/// Gauss-Jordan elimination with partial pivoting. Throws EliminationFailure
/// when a pivot vanishes relative to its row.
inline EliminatedSystem build_frhfr_system(std::span<const Correspondence> corrs) {
  detail::require_sample(corrs, 3, "frHfr solver");
  EliminatedSystem sys;
  sys.rotation = corrs[0].r2.matrix() * corrs[0].r1.matrix().transpose();
  sys.normal = corrs[0].r1.matrix().col(1);

  std::array<FrhfrEquation, 3> third;
  for (int i = 0; i < 3; ++i) {
    sys.points[i] = detail::lift_frhfr(corrs[i]);
    third[i] = detail::frhfr_row(2, sys.points[i], sys.rotation, sys.normal);
  }
  for (int i = 0; i < 2; ++i) {
    sys.first_rows[i] = detail::frhfr_row(0, sys.points[i], sys.rotation, sys.normal);
  }
  sys.held_out = detail::frhfr_row(0, sys.points[2], sys.rotation, sys.normal);

  // Third rows are affine in (p, q): only columns [1, p, q] are populated.
  for (int i = 0; i < 3; ++i) {
    const FrhfrEquation& e = third[i];
    sys.third_rows.row(i) << e(0, 2), e(0, 1), e(0, 0), e(1, 2), e(1, 1),
        e(1, 0), e(3, 2), e(3, 1), e(3, 0);
  }

  Eigen::Matrix<double, 3, 9> m = sys.third_rows;
  // Columns 3..5 hold the t2 block; reduce it to the identity.
  for (int c = 0; c < 3; ++c) {
    Eigen::Index best = c;
    m.col(3 + c).tail(3 - c).cwiseAbs().maxCoeff(&best);
    best += c;
    const double row_norm = m.row(best).norm();
    const double pivot = m(best, 3 + c);
    sys.pivots[c] = row_norm > 0.0 ? std::abs(pivot) / row_norm : 0.0;
    if (!(std::abs(pivot) >= 1e-10 * row_norm) || row_norm == 0.0) {
      throw Error(ErrorCode::kEliminationFailure,
                  "t2 elimination pivot vanishes (column " + std::to_string(c) +
                      ")");
    }
    if (best != c) m.row(best).swap(m.row(c));
    m.row(c) /= pivot;
    for (int r = 0; r < 3; ++r) {
      if (r != c) m.row(r) -= m(r, 3 + c) * m.row(c);
    }
  }
  sys.g << m.block<3, 3>(0, 0), m.block<3, 3>(0, 6);
  return sys;
}

/// The three consistency conditions on (t1, f, lambda) that remain after
/// eliminating t2: g1 - lambda g2, g2 - f g3, g1 - lambda f g3 (1-based rows).
inline Eigen::Vector3d eliminated_constraints(const EliminatedSystem& sys,
                                              double t1, double f,
                                              double lambda) {
  const double p = f;
  const double q = f * lambda;
  Eigen::Matrix<double, 6, 1> v;
  v << t1 * q, t1 * p, t1, q, p, 1.0;
  const Eigen::Vector3d g = sys.g * v;
  return {g(0) - lambda * g(1), g(1) - f * g(2), g(0) - lambda * f * g(2)};
}

/// t2 as implied by each eliminated row (rows 1 and 2 need f lambda and f
/// nonzero).
inline Eigen::Vector3d recover_t2(const EliminatedSystem& sys, double t1,
                                  double f, double lambda) {
  const double p = f;
  const double q = f * lambda;
  Eigen::Matrix<double, 6, 1> v;
  v << t1 * q, t1 * p, t1, q, p, 1.0;
  const Eigen::Vector3d g = sys.g * v;
  return {-g(0) / q, -g(1) / p, -g(2)};
}

namespace detail {

/// Scale-free residual of row `r` of b x (G a) for correspondence `pt`.
inline double frhfr_unit_residual(int r, const FrhfrPoint& pt,
                                  const EliminatedSystem& sys,
                                  const Eigen::Vector3d& t_hat, double p,
                                  double q) {
  const Eigen::Vector3d m(1.0, p, q);
  const Eigen::Vector3d a = pt.a * m;
  const Eigen::Vector3d b = pt.b * m;
  const Eigen::Vector3d ga = sys.rotation * a + t_hat * sys.normal.dot(a);
  const double nb = b.norm();
  const double nga = ga.norm();
  if (!(nb > 0.0) || !(nga > 0.0)) return std::numeric_limits<double>::infinity();
  return (b / nb).cross(ga / nga)(r);
}

struct FrhfrCandidate {
  Eigen::Vector3d t_hat;
  double p;
  double q;
};

/// Gauss-Newton on every available row of the first two correspondences plus
/// the third row of the last one.
inline void polish_frhfr(const EliminatedSystem& sys, FrhfrCandidate& c,
                         int steps = 4) {
  std::array<FrhfrEquation, 7> eqs;
  for (int i = 0; i < 2; ++i) {
    for (int r = 0; r < 3; ++r) {
      eqs[3 * i + r] = frhfr_row(r, sys.points[i], sys.rotation, sys.normal);
    }
  }
  eqs[6] = frhfr_row(2, sys.points[2], sys.rotation, sys.normal);

  auto residuals = [&](const FrhfrCandidate& x) {
    Eigen::Matrix<double, 7, 1> f;
    for (int e = 0; e < 7; ++e) f(e) = evaluate_equation(eqs[e], x.t_hat, x.p, x.q);
    return f;
  };
  Eigen::Matrix<double, 7, 1> f = residuals(c);
  for (int it = 0; it < steps; ++it) {
    Eigen::Matrix<double, 7, 5> j;
    for (int e = 0; e < 7; ++e) {
      const FrhfrEquation& E = eqs[e];
      for (int m = 0; m < 3; ++m) j(e, m) = eval_monomials(E.row(m), c.p, c.q);
      double dp = 0.0;
      double dq = 0.0;
      for (int m = 0; m < 4; ++m) {
        const double u = m < 3 ? c.t_hat(m) : 1.0;
        dp += u * (E(m, 1) + 2.0 * E(m, 3) * c.p + E(m, 4) * c.q);
        dq += u * (E(m, 2) + E(m, 4) * c.p + 2.0 * E(m, 5) * c.q);
      }
      j(e, 3) = dp;
      j(e, 4) = dq;
    }
    const Eigen::Matrix<double, 5, 1> step =
        j.colPivHouseholderQr().solve(-f);
    if (!step.allFinite()) break;
    FrhfrCandidate next = c;
    next.t_hat += step.head<3>();
    next.p += step(3);
    next.q += step(4);
    const Eigen::Matrix<double, 7, 1> fn = residuals(next);
    if (!(fn.norm() < f.norm())) break;
    c = next;
    f = fn;
    if (step.norm() <= 1e-15 * (1.0 + c.t_hat.norm() + std::abs(c.p))) break;
  }
}

}  // namespace detail

/// Two conics in (p, q) whose common roots contain every solution: the
/// compatibility of the two t1-conditions, and the coplanarity of the first two
/// correspondences' rays with the translation.
inline std::array<BiPoly, 2> frhfr_conics(const EliminatedSystem& sys) {
  std::array<BiPoly, 3> alpha;
  std::array<BiPoly, 3> beta;
  for (int i = 0; i < 3; ++i) {
    alpha[i] = BiPoly::affine(sys.g(i, 2), sys.g(i, 1), sys.g(i, 0));
    beta[i] = BiPoly::affine(sys.g(i, 5), sys.g(i, 4), sys.g(i, 3));
  }
  const BiPoly p = BiPoly::affine(0.0, 1.0, 0.0);
  const BiPoly q = BiPoly::affine(0.0, 0.0, 1.0);
  // E_a: g1 - p g2, E_b: g0 - q g2 (0-based), each = t1 * coef + const.
  const BiPoly ea_t = alpha[1] - p * alpha[2];
  const BiPoly ea_c = beta[1] - p * beta[2];
  const BiPoly eb_t = alpha[0] - q * alpha[2];
  const BiPoly eb_c = beta[0] - q * beta[2];
  const BiPoly compat = (eb_t * ea_c - ea_t * eb_c).truncated(2);

  // det[b1, b2, s1 R a2 - s2 R a1] with s = n . a.
  std::array<std::array<BiPoly, 3>, 2> b;
  std::array<std::array<BiPoly, 3>, 2> ra;
  std::array<BiPoly, 2> s;
  for (int i = 0; i < 2; ++i) {
    const FrhfrPoint& pt = sys.points[i];
    const Eigen::Matrix3d r = sys.rotation * pt.a;
    for (int k = 0; k < 3; ++k) {
      b[i][k] = BiPoly::affine(pt.b.row(k).transpose());
      ra[i][k] = BiPoly::affine(r.row(k).transpose());
    }
    s[i] = BiPoly::affine(pt.a.transpose() * sys.normal);
  }
  std::array<BiPoly, 3> w;
  for (int k = 0; k < 3; ++k) w[k] = s[0] * ra[1][k] - s[1] * ra[0][k];
  BiPoly coplanar = b[0][0] * (b[1][1] * w[2] - b[1][2] * w[1]) -
                    b[0][1] * (b[1][0] * w[2] - b[1][2] * w[0]) +
                    b[0][2] * (b[1][0] * w[1] - b[1][1] * w[0]);
  // Cubic terms cancel identically.
  coplanar = coplanar.truncated(2);
  return {compat, coplanar};
}

inline SolverResult solve_frhfr(std::span<const Correspondence> corrs) {
  SolverResult result;
  EliminatedSystem sys;
  try {
    sys = build_frhfr_system(corrs);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEliminationFailure) throw;
    result.status = SolverStatus::kEliminationFailure;
    return result;
  }

  const auto [d, c] = frhfr_conics(sys);
  // Both conics vanish identically without translation (no parallax); compare
  // them with the scale of the data they are built from.
  const double compat_scale = sys.g.squaredNorm();
  const double coplanar_scale = sys.points[0].a.norm() * sys.points[1].a.norm() *
                                sys.points[0].b.norm() * sys.points[1].b.norm();
  if (!(d.max_abs_coeff() > 1e-10 * compat_scale) ||
      !(c.max_abs_coeff() > 1e-10 * coplanar_scale)) {
    result.status = SolverStatus::kDegenerateConfiguration;
    return result;
  }
  const UniPoly a0 = d.coefficient_of_q(0);
  const UniPoly a1 = d.coefficient_of_q(1);
  const UniPoly a2 = d.coefficient_of_q(2);
  const UniPoly c0 = c.coefficient_of_q(0);
  const UniPoly c1 = c.coefficient_of_q(1);
  const UniPoly c2 = c.coefficient_of_q(2);
  const UniPoly x = a2 * c0 - a0 * c2;
  const UniPoly y = a2 * c1 - a1 * c2;
  const UniPoly z = a1 * c0 - a0 * c1;
  const UniPoly res = (x * x - y * z).truncated(4);

  const double scale = d.max_abs_coeff() * c.max_abs_coeff();
  if (!(scale > 0.0) || !(res.max_abs_coeff() > 1e-14 * scale * scale)) {
    result.status = SolverStatus::kDegenerateConfiguration;
    return result;
  }

  RootOptions opt;
  opt.imag_tol = 1e-6;
  std::vector<double> roots;
  try {
    roots = real_roots(res, opt);
  } catch (const Error&) {
    result.status = SolverStatus::kDegenerateConfiguration;
    return result;
  }

  std::vector<detail::FrhfrCandidate> cands;
  for (double p : roots) {
    ++result.diagnostics.candidates;
    if (!(p > 1e-6)) {
      ++result.diagnostics.nonpositive_filtered;
      continue;
    }
    std::vector<double> qs;
    const double yv = y(p);
    if (std::abs(yv) > 1e-12 * (std::abs(x(p)) + std::abs(yv) + 1e-300) &&
        std::abs(yv) > 1e-14 * scale) {
      qs.push_back(-x(p) / yv);
    } else {
      const UniPoly dq{d.eval(p, 0.0), a1(p), a2(p)};
      try {
        for (double qr : real_roots(dq)) qs.push_back(qr);
      } catch (const Error&) {
      }
      std::sort(qs.begin(), qs.end(), [&](double l, double r) {
        return std::abs(c.eval(p, l)) < std::abs(c.eval(p, r));
      });
      if (qs.size() > 1) qs.resize(1);
    }

    for (double q : qs) {
      const Eigen::Vector3d m(q, p, 1.0);
      const Eigen::Vector3d alpha = sys.g.leftCols<3>() * m;
      const Eigen::Vector3d beta = sys.g.rightCols<3>() * m;
      // t1 from whichever condition is better conditioned.
      const double ea_t = alpha(1) - p * alpha(2);
      const double ea_c = beta(1) - p * beta(2);
      const double eb_t = alpha(0) - q * alpha(2);
      const double eb_c = beta(0) - q * beta(2);
      const bool use_a = std::hypot(ea_t, ea_c) >= std::hypot(eb_t, eb_c);
      const double ct = use_a ? ea_t : eb_t;
      const double cc = use_a ? ea_c : eb_c;
      const double len = std::hypot(ct, cc);
      if (!(len > 0.0) || std::abs(ct) < 1e-8 * len) {
        ++result.diagnostics.spurious_filtered;
        continue;
      }
      detail::FrhfrCandidate cand;
      cand.p = p;
      cand.q = q;
      cand.t_hat(0) = -cc / ct;
      cand.t_hat(1) = -(alpha(2) * cand.t_hat(0) + beta(2));
      // t3 from a first row.
      double best_coef = 0.0;
      double t3 = 0.0;
      for (const FrhfrEquation& e : sys.first_rows) {
        const double coef = detail::eval_monomials(e.row(2), p, q);
        const double rest = evaluate_equation(
            e, Eigen::Vector3d(cand.t_hat(0), cand.t_hat(1), 0.0), p, q);
        const double mag = std::abs(coef) / (std::abs(rest) + std::abs(coef) + 1e-300);
        if (mag > best_coef) {
          best_coef = mag;
          t3 = -rest / coef;
        }
      }
      if (best_coef < 1e-8) {
        ++result.diagnostics.spurious_filtered;
        continue;
      }
      cand.t_hat(2) = t3;
      detail::polish_frhfr(sys, cand);
      if (!(cand.p > 1e-6) || !cand.t_hat.allFinite() || !std::isfinite(cand.q)) {
        ++result.diagnostics.rejected;
        continue;
      }
      // The five defining equations must hold.
      double worst = 0.0;
      for (int i = 0; i < 3; ++i) {
        worst = std::max(worst, std::abs(detail::frhfr_unit_residual(
                                    2, sys.points[i], sys, cand.t_hat, cand.p, cand.q)));
      }
      for (int i = 0; i < 2; ++i) {
        worst = std::max(worst, std::abs(detail::frhfr_unit_residual(
                                    0, sys.points[i], sys, cand.t_hat, cand.p, cand.q)));
      }
      if (!(worst <= 1e-6)) {
        ++result.diagnostics.rejected;
        continue;
      }
      const bool dup = std::any_of(cands.begin(), cands.end(), [&](const auto& o) {
        return std::abs(o.p - cand.p) <= 1e-8 * (1.0 + std::abs(cand.p)) &&
               std::abs(o.q - cand.q) <= 1e-8 * (1.0 + std::abs(cand.q)) &&
               (o.t_hat - cand.t_hat).norm() <= 1e-8 * (1.0 + cand.t_hat.norm());
      });
      if (dup) continue;
      cands.push_back(cand);
    }
  }

  const Eigen::Matrix3d& r2 = corrs[0].r2.matrix();
  for (const auto& cand : cands) {
    SolverSolution sol;
    sol.hy = MotionHomography::from_translation(r2.transpose() * cand.t_hat);
    sol.focal = cand.p;
    sol.lambda = cand.q / cand.p;
    sol.tag = SolverKind::kFrhfr;
    sol.residual = detail::frhfr_unit_residual(0, sys.points[2], sys,
                                               cand.t_hat, cand.p, cand.q);
    result.solutions.push_back(sol);
  }
  std::sort(result.solutions.begin(), result.solutions.end(),
            [](const SolverSolution& a, const SolverSolution& b) {
              return std::abs(a.residual) < std::abs(b.residual);
            });
  if (result.solutions.size() > 3) result.solutions.resize(3);
  if (result.solutions.empty()) result.status = SolverStatus::kNoSolution;
  return result;
}

}  // namespace gravhom
