#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "gravhom/synth.hpp"

namespace gravhom {
namespace {

// Independent forward model: intersect the first camera's ray with the plane
// y = 1 and project into the second camera.
ImagePoint oracle_transfer(const SyntheticInstance& inst, const ImagePoint& p1) {
  const double f = inst.intrinsics.focal;
  const double l = inst.intrinsics.lambda;
  const double w = 1.0 + l * p1.squaredNorm();
  const Eigen::Vector3d cam1(p1.x() / w / f, p1.y() / w / f, 1.0);
  const Eigen::Vector3d ray = inst.r1.matrix().transpose() * cam1;
  const Eigen::Vector3d x = ray / ray.y();  // C1 = 0, plane y = 1
  const Eigen::Vector3d c2 = -inst.translation;
  const Eigen::Vector3d cam2 = inst.r2.matrix() * (x - c2);
  const ImagePoint u(f * cam2.x() / cam2.z(), f * cam2.y() / cam2.z());
  if (l == 0.0) return u;
  // Invert r_u = r_d / (1 + l r_d^2) by bisection on its increasing branch.
  const double ru = u.norm();
  double lo = 0.0;
  double hi = 1.0 / std::sqrt(std::abs(l));
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid / (1.0 + l * mid * mid) < ru) lo = mid;
    else hi = mid;
  }
  const double rd = 0.5 * (lo + hi);
  return u * (rd / ru);
}

TEST(MixSeed, DistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(mix_seed(42, i));
  EXPECT_EQ(seen.size(), 10000u);
  EXPECT_EQ(mix_seed(1, 2), mix_seed(1, 2));
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
}

TEST(Generate, MatchesForwardModelOracle) {
  SceneConfig cfg;
  cfg.num_points = 20;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const SyntheticInstance inst = generate(cfg, mix_seed(5, s));
    ASSERT_EQ(inst.correspondences.size(), 20u);
    for (const auto& c : inst.correspondences) {
      EXPECT_LT((oracle_transfer(inst, c.p1) - c.p2).norm(), 1e-10);
      EXPECT_TRUE(cfg.frame.contains(c.p1));
      EXPECT_TRUE(cfg.frame.contains(c.p2));
    }
  }
}

TEST(Generate, IntrinsicsWithinRanges) {
  SceneConfig cfg;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const SyntheticInstance inst = generate(cfg, s);
    EXPECT_GE(inst.intrinsics.focal, cfg.focal_min);
    EXPECT_LE(inst.intrinsics.focal, cfg.focal_max);
    EXPECT_GE(inst.intrinsics.lambda, cfg.lambda_min);
    EXPECT_LE(inst.intrinsics.lambda, cfg.lambda_max);
    const double t = inst.translation.norm();
    EXPECT_GE(t, cfg.translation_min - 1e-12);
    EXPECT_LE(t, cfg.translation_max + 1e-12);
    // Second camera stays on the same side of the plane.
    EXPECT_LT(-inst.translation.y(), 1.0);
  }
}

TEST(Generate, FixedIntrinsicsOverrideRanges) {
  SceneConfig cfg;
  cfg.focal = 1.7;
  cfg.lambda = -0.2;
  const SyntheticInstance inst = generate(cfg, 3);
  EXPECT_EQ(inst.intrinsics.focal, 1.7);
  EXPECT_EQ(inst.intrinsics.lambda, -0.2);
}

TEST(Generate, DeterministicForSeed) {
  SceneConfig cfg;
  cfg.num_points = 30;
  cfg.noise_px = 1.0;
  cfg.inlier_fraction = 0.5;
  const auto a = generate(cfg, 123);
  const auto b = generate(cfg, 123);
  for (std::size_t i = 0; i < a.correspondences.size(); ++i) {
    EXPECT_EQ(a.correspondences[i].p1, b.correspondences[i].p1);
    EXPECT_EQ(a.correspondences[i].p2, b.correspondences[i].p2);
  }
  const auto c = generate(cfg, 124);
  EXPECT_NE(a.correspondences[0].p1, c.correspondences[0].p1);
}

TEST(Generate, NoiseLevelsShareGeometry) {
  SceneConfig cfg;
  cfg.num_points = 10;
  const auto clean = generate(cfg, 9);
  cfg.noise_px = 1.0;
  const auto noisy1 = generate(cfg, 9);
  cfg.noise_px = 2.0;
  const auto noisy2 = generate(cfg, 9);
  EXPECT_EQ(clean.intrinsics.focal, noisy1.intrinsics.focal);
  EXPECT_EQ(clean.translation, noisy1.translation);
  double sq = 0.0;
  for (std::size_t i = 0; i < clean.correspondences.size(); ++i) {
    const ImagePoint d1 = noisy1.correspondences[i].p1 - clean.correspondences[i].p1;
    const ImagePoint d2 = noisy2.correspondences[i].p1 - clean.correspondences[i].p1;
    // Common random numbers: doubling sigma doubles each perturbation.
    EXPECT_LT((2.0 * d1 - d2).norm(), 1e-12);
    sq += d1.squaredNorm();
  }
  EXPECT_GT(sq, 0.0);
}

TEST(Generate, NoiseMagnitudeInPixels) {
  SceneConfig cfg;
  cfg.num_points = 200;
  cfg.noise_px = 1.0;
  SceneConfig clean_cfg = cfg;
  clean_cfg.noise_px = 0.0;
  double sq = 0.0;
  int n = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = generate(cfg, s);
    const auto b = generate(clean_cfg, s);
    for (std::size_t i = 0; i < a.correspondences.size(); ++i) {
      const ImagePoint d = (a.correspondences[i].p1 - b.correspondences[i].p1) * cfg.frame.scale();
      sq += d.squaredNorm();
      n += 2;
    }
  }
  EXPECT_NEAR(std::sqrt(sq / n), 1.0, 0.05);
}

TEST(Generate, OutliersAreMarkedAndCounted) {
  SceneConfig cfg;
  cfg.num_points = 100;
  cfg.inlier_fraction = 0.7;
  const auto inst = generate(cfg, 10);
  int inliers = 0;
  for (std::size_t i = 0; i < inst.correspondences.size(); ++i) {
    const auto& c = inst.correspondences[i];
    if (inst.inlier_mask[i]) {
      ++inliers;
      EXPECT_LT((oracle_transfer(inst, c.p1) - c.p2).norm(), 1e-10);
    }
  }
  EXPECT_EQ(inliers, 70);
}

TEST(Generate, YawDriftOnlyAffectsMeasuredRotation) {
  SceneConfig cfg;
  cfg.num_points = 5;
  const auto base = generate(cfg, 11);
  cfg.yaw_drift_deg = 10.0;
  const auto drifted = generate(cfg, 11);
  EXPECT_EQ(base.r2.matrix(), drifted.r2.matrix());
  EXPECT_EQ(base.correspondences[0].p2, drifted.correspondences[0].p2);
  const Eigen::Matrix3d rel =
      base.r2.matrix().transpose() * drifted.correspondences[0].r2.matrix();
  // A pure rotation about world y by 10 degrees.
  EXPECT_NEAR(Eigen::AngleAxisd(rel).angle(), 10.0 * std::numbers::pi / 180.0, 1e-12);
  EXPECT_NEAR(std::abs(Eigen::AngleAxisd(rel).axis().y()), 1.0, 1e-12);
}

TEST(Generate, RejectsBadConfig) {
  SceneConfig cfg;
  cfg.num_points = 0;
  EXPECT_THROW(generate(cfg, 1), Error);
  cfg.num_points = 3;
  cfg.inlier_fraction = 1.5;
  EXPECT_THROW(generate(cfg, 1), Error);
}

TEST(Generate, ImpossibleSceneFails) {
  SceneConfig cfg;
  cfg.max_point_attempts = 0;
  try {
    generate(cfg, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGenerationFailure);
  }
}

}  // namespace
}  // namespace gravhom
