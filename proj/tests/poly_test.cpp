#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "gravhom/poly.hpp"

namespace gravhom {
namespace {

TEST(RealRoots, Quadratic) {
  const auto r = real_roots(UniPoly{-1.0, 0.0, 1.0});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_NEAR(r[0], -1.0, 1e-14);
  EXPECT_NEAR(r[1], 1.0, 1e-14);
}

TEST(RealRoots, TripleRootCollapses) {
  // (w - 2)^3
  const UniPoly p{-8.0, 12.0, -6.0, 1.0};
  const auto r = real_roots(p);
  ASSERT_GE(r.size(), 1u);
  EXPECT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0], 2.0, 1e-5);
}

TEST(RealRoots, NoRealRoots) {
  EXPECT_TRUE(real_roots(UniPoly{1.0, 0.0, 1.0}).empty());
}

TEST(RealRoots, ZeroPolynomialIsDegenerate) {
  try {
    real_roots(UniPoly{0.0, 0.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateInput);
  }
}

TEST(RealRoots, PlantedRootsProperty) {
  // Degree 6 with 4 planted real roots and one complex pair.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> planted;
    while (planted.size() < 4) {
      const double r = u(rng);
      if (std::none_of(planted.begin(), planted.end(),
                       [&](double x) { return std::abs(x - r) < 0.2; })) {
        planted.push_back(r);
      }
    }
    UniPoly p = UniPoly::constant(u(rng) > 0 ? 2.5 : -0.7);
    for (double r : planted) p = p * UniPoly::linear(-r, 1.0);
    const double re = u(rng);
    const double im = 0.5 + std::abs(u(rng));
    p = p * UniPoly{re * re + im * im, -2.0 * re, 1.0};
    std::sort(planted.begin(), planted.end());
    const auto roots = real_roots(p);
    ASSERT_EQ(roots.size(), 4u) << trial;
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(roots[i], planted[i], 1e-10);
    for (double r : roots) EXPECT_LE(std::abs(p(r)), 1e-9 * p.max_abs_coeff());
  }
}

TEST(UniPoly, TrimmingAndArithmetic) {
  const UniPoly p{1.0, 2.0, 1e-20};
  EXPECT_EQ(p.trimmed().degree(), 1);
  const UniPoly q = UniPoly{1.0, 1.0} * UniPoly{-1.0, 1.0};
  EXPECT_EQ(q.degree(), 2);
  EXPECT_DOUBLE_EQ(q[0], -1.0);
  EXPECT_DOUBLE_EQ(q[1], 0.0);
  EXPECT_DOUBLE_EQ(q[2], 1.0);
  EXPECT_DOUBLE_EQ(q.derivative()(3.0), 6.0);
}

TEST(DetPolyMatrix, DiagonalW) {
  PolyMatrix m(4, 4);
  for (int i = 0; i < 4; ++i) m(i, i) = UniPoly::linear(0.0, 1.0);
  const UniPoly d = det_polymatrix(m);
  EXPECT_EQ(d.trimmed().degree(), 4);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(d[i], 0.0);
  EXPECT_EQ(d[4], 1.0);
}

TEST(DetPolyMatrix, ConstantMatrix) {
  Eigen::Matrix4d a;
  a << 1, 2, 3, 4, 0, 1, 5, 2, 3, 1, 0, 1, 2, 2, 1, 7;
  PolyMatrix m(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = UniPoly::constant(a(r, c));
  const UniPoly d = det_polymatrix(m);
  EXPECT_NEAR(d[0], a.determinant(), 1e-12);
  EXPECT_EQ(d.trimmed().degree(), 0);
}

TEST(DetPolyMatrix, ScalarEvaluationOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 50; ++trial) {
      PolyMatrix m(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) m(r, c) = UniPoly{u(rng), u(rng), u(rng)};
      const UniPoly d = det_polymatrix(m);
      for (int k = 0; k < 10; ++k) {
        const double w = 2.0 * u(rng);
        const double expect = m.evaluate(w).determinant();
        const Eigen::MatrixXd mw = m.evaluate(w);
        // Scale for the relative check: product of row norms bounds |det|.
        double scale = 1.0;
        for (int r = 0; r < n; ++r) scale *= mw.row(r).norm();
        EXPECT_NEAR(d(w), expect, 1e-9 * std::max(scale, 1e-300));
      }
    }
  }
}

TEST(DetPolyMatrix, RejectsNonSquare) {
  EXPECT_THROW(det_polymatrix(PolyMatrix(2, 3)), Error);
}

TEST(Nullspace, RankOne) {
  Eigen::Matrix2d a;
  a << 1, 0, 0, 0;
  const Nullspace ns = nullspace_min(a);
  EXPECT_NEAR(std::abs(ns.vector(1)), 1.0, 1e-15);
  EXPECT_NEAR(ns.singular_value, 0.0, 1e-15);
}

TEST(Nullspace, ZeroMatrix) {
  const Nullspace ns = nullspace_min(Eigen::Matrix3d::Zero());
  EXPECT_NEAR(ns.vector.norm(), 1.0, 1e-15);
  EXPECT_EQ(ns.singular_value, 0.0);
}

TEST(Nullspace, PlantedKernelProperty) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Vector4d k = Eigen::Vector4d::NullaryExpr([&] { return n(rng); }).normalized();
    // Sum of three outer products u v^T with v orthogonal to k.
    Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector4d v = Eigen::Vector4d::NullaryExpr([&] { return n(rng); });
      v -= v.dot(k) * k;
      a += Eigen::Vector4d::NullaryExpr([&] { return n(rng); }) * v.transpose();
    }
    const Nullspace ns = nullspace_min(a);
    EXPECT_NEAR(ns.vector.norm(), 1.0, 1e-12);
    EXPECT_LT(std::min((ns.vector - k).norm(), (ns.vector + k).norm()), 1e-9);
    EXPECT_NEAR((a * ns.vector).norm(), ns.singular_value, 1e-12);
  }
}

TEST(BiPoly, ProductAndEvaluation) {
  const BiPoly a = BiPoly::affine(1.0, 2.0, -1.0);   // 1 + 2p - q
  const BiPoly b = BiPoly::affine(0.5, -1.0, 3.0);   // 0.5 - p + 3q
  const BiPoly c = a * b;
  EXPECT_EQ(c.total_degree(), 2);
  for (double p : {-1.0, 0.3, 2.0}) {
    for (double q : {-0.5, 0.0, 1.7}) {
      EXPECT_NEAR(c.eval(p, q), a.eval(p, q) * b.eval(p, q), 1e-14);
      const UniPoly q0 = c.coefficient_of_q(0);
      EXPECT_NEAR(q0(p), c.eval(p, 0.0), 1e-14);
    }
  }
  EXPECT_EQ(c.truncated(1).total_degree(), 1);
}

}  // namespace
}  // namespace gravhom
