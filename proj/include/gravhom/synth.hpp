#pragma once

// Synthetic two-view scenes of a downward-looking camera over a ground plane.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "gravhom/core_geometry.hpp"
#include "gravhom/error.hpp"

namespace gravhom {

struct SceneConfig {
  int num_points = 3;
  double inlier_fraction = 1.0;
  double noise_px = 0.0;
  ImageFrame frame;
  double focal_min = 0.5;
  double focal_max = 2.5;
  double lambda_min = -0.6;
  double lambda_max = 0.0;
  // Fixed intrinsics override the ranges above when set.
  std::optional<double> focal;
  std::optional<double> lambda;
  double max_tilt_deg = 30.0;      // pitch and roll about the nadir view
  double translation_min = 0.05;   // baseline, in units of the plane distance
  double translation_max = 0.5;
  double yaw_drift_deg = 0.0;      // applied to the second rotation only
  int max_point_attempts = 200;
};

struct SyntheticInstance {
  std::vector<Correspondence> correspondences;  // measured (noisy, drifted)
  std::vector<bool> inlier_mask;
  GravityRotation r1;
  GravityRotation r2;  // true rotation (before drift)
  Intrinsics intrinsics;
  MotionHomography hy;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // world frame, C1 - C2

  Eigen::Matrix3d homography() const {
    return compose_homography(hy, r1, r2, intrinsics);
  }
  RelativePose pose() const { return extract_pose(hy, r1, r2); }
};

/// splitmix64 finalizer; derives independent per-instance seeds.
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace detail {

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

/// Nadir camera: optical axis along world +y (gravity), image x along world x.
inline Eigen::Matrix3d nadir_rotation() {
  Eigen::Matrix3d r;
  r << 1, 0, 0,
       0, 0, -1,
       0, 1, 0;
  return r;
}

inline GravityRotation random_camera_rotation(std::mt19937_64& rng,
                                              double max_tilt_deg) {
  std::uniform_real_distribution<double> tilt(-deg2rad(max_tilt_deg),
                                              deg2rad(max_tilt_deg));
  std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
  const double pitch = tilt(rng);
  const double roll = tilt(rng);
  const double heading = yaw(rng);
  const Eigen::Matrix3d m =
      (Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()))
          .toRotationMatrix() *
      nadir_rotation() *
      Eigen::AngleAxisd(heading, Eigen::Vector3d::UnitY())
          .toRotationMatrix()
          .transpose();
  return GravityRotation::from_matrix(m, 1e-9);
}

inline Eigen::Vector3d random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

/// Projects world point X into a camera at centre C with rotation R; returns
/// the distorted normalized image point, or nullopt if behind the camera or
/// outside the distortion model's range.
inline std::optional<ImagePoint> project(const Eigen::Vector3d& x,
                                         const Eigen::Vector3d& centre,
                                         const GravityRotation& r,
                                         const Intrinsics& intr) {
  const Eigen::Vector3d xc = r.matrix() * (x - centre);
  if (!(xc.z() > 1e-6)) return std::nullopt;
  const ImagePoint u(intr.focal * xc.x() / xc.z(), intr.focal * xc.y() / xc.z());
  return redistort(u, intr.lambda);
}

}  // namespace detail

/// Draws one scene. Geometry and outlier positions come from `seed`; the
/// measurement noise uses a separate stream derived from it, so scenes that
/// differ only in noise level share identical geometry.
inline SyntheticInstance generate(const SceneConfig& cfg, std::uint64_t seed) {
  if (cfg.num_points < 1) {
    throw Error(ErrorCode::kPrecondition, "scene needs at least one point");
  }
  if (!(cfg.inlier_fraction >= 0.0 && cfg.inlier_fraction <= 1.0)) {
    throw Error(ErrorCode::kPrecondition, "inlier fraction must be in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::mt19937_64 noise_rng(mix_seed(seed, 0x6e6f697365ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const ImageFrame& frame = cfg.frame;
  const double hw = frame.half_width();
  const double hh = frame.half_height();

  for (int scene_attempt = 0; scene_attempt < 50; ++scene_attempt) {
    SyntheticInstance inst;
    inst.intrinsics.focal = cfg.focal.value_or(uniform(cfg.focal_min, cfg.focal_max));
    inst.intrinsics.lambda =
        cfg.lambda.value_or(uniform(cfg.lambda_min, cfg.lambda_max));
    inst.r1 = detail::random_camera_rotation(rng, cfg.max_tilt_deg);
    inst.r2 = detail::random_camera_rotation(rng, cfg.max_tilt_deg);
    const double mag = uniform(cfg.translation_min, cfg.translation_max);
    inst.translation = mag * detail::random_direction(rng);
    inst.hy = MotionHomography::from_translation(inst.translation);

    // Camera 1 at the origin, plane y = 1; camera 2 at C2 = C1 - t.
    const Eigen::Vector3d c1 = Eigen::Vector3d::Zero();
    const Eigen::Vector3d c2 = c1 - inst.translation;
    if (!(c2.y() < 1.0 - 0.05)) continue;

    const GravityRotation r2_measured =
        cfg.yaw_drift_deg == 0.0
            ? inst.r2
            : inst.r2.with_yaw_drift(detail::deg2rad(cfg.yaw_drift_deg));

    const int n_out = static_cast<int>(
        std::floor((1.0 - cfg.inlier_fraction) * cfg.num_points + 1e-9));
    const double sigma = cfg.noise_px / frame.scale();
    std::normal_distribution<double> noise(0.0, 1.0);

    bool ok = true;
    for (int i = 0; i < cfg.num_points && ok; ++i) {
      bool placed = false;
      for (int a = 0; a < cfg.max_point_attempts && !placed; ++a) {
        const ImagePoint d1(uniform(-hw, hw), uniform(-hh, hh));
        const auto u1 = undistort_point(d1, inst.intrinsics.lambda);
        if (!u1) continue;
        const Eigen::Vector3d ray =
            inst.r1.matrix().transpose() *
            Eigen::Vector3d(u1->x() / inst.intrinsics.focal,
                            u1->y() / inst.intrinsics.focal, 1.0);
        const Eigen::Vector3d dir = ray.normalized();
        if (dir.y() < 0.1) continue;
        const Eigen::Vector3d x = c1 + dir * ((1.0 - c1.y()) / dir.y());
        const auto d2 = detail::project(x, c2, inst.r2, inst.intrinsics);
        if (!d2 || !frame.contains(*d2)) continue;
        Correspondence c;
        c.p1 = d1;
        c.p2 = *d2;
        c.r1 = inst.r1;
        c.r2 = r2_measured;
        inst.correspondences.push_back(c);
        placed = true;
      }
      ok = placed;
    }
    if (!ok) continue;

    inst.inlier_mask.assign(cfg.num_points, true);
    for (int i = cfg.num_points - n_out; i < cfg.num_points; ++i) {
      inst.correspondences[i].p2 = ImagePoint(uniform(-hw, hw), uniform(-hh, hh));
      inst.inlier_mask[i] = false;
    }
    // Noise draws are made for every point so the stream stays aligned.
    for (auto& c : inst.correspondences) {
      const Eigen::Vector4d e(noise(noise_rng), noise(noise_rng),
                              noise(noise_rng), noise(noise_rng));
      if (sigma > 0.0) {
        c.p1 += sigma * e.head<2>();
        c.p2 += sigma * e.tail<2>();
      }
    }
    return inst;
  }
  throw Error(ErrorCode::kGenerationFailure,
              "could not place all points inside both images");
}

}  // namespace gravhom
