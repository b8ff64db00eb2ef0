#pragma once

// Camera model, gravity alignment and the gravity-aligned motion homography.
//
// Conventions used throughout the library:
//  * Image points are distortion-centered and divided by half the image
//    diagonal, so focal lengths and distortion coefficients are O(1).
//  * Rotations are world-to-camera. The world y-axis points along gravity
//    (down) and the ground plane normal is n = [0, 1, 0]^T.
//  * The first camera sits at unit distance from the plane (d = 1).

#include <cmath>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "gravhom/error.hpp"

namespace gravhom {

using ImagePoint = Eigen::Vector2d;

struct Intrinsics {
  double focal = 1.0;
  double lambda = 0.0;
};

// Pixel frame of an image; maps distortion-centered pixels to the normalized
// units used by the solvers.
struct ImageFrame {
  double width = 640.0;
  double height = 480.0;

  double scale() const { return 0.5 * std::hypot(width, height); }
  double half_width() const { return 0.5 * width / scale(); }
  double half_height() const { return 0.5 * height / scale(); }

  ImagePoint to_normalized(const ImagePoint& centered_px) const {
    return centered_px / scale();
  }
  ImagePoint to_pixels(const ImagePoint& normalized) const {
    return normalized * scale();
  }
  bool contains(const ImagePoint& normalized) const {
    return std::abs(normalized.x()) <= half_width() &&
           std::abs(normalized.y()) <= half_height();
  }
};

/// World-to-camera rotation reported by the IMU. Always orthonormal with
/// determinant +1.
class GravityRotation {
 public:
  GravityRotation() : matrix_(Eigen::Matrix3d::Identity()) {}

  static GravityRotation from_matrix(const Eigen::Matrix3d& m,
                                     double tol = 1e-9) {
    if (!m.allFinite()) {
      throw Error(ErrorCode::kValidation, "rotation has non-finite entries");
    }
    const double ortho =
        (m * m.transpose() - Eigen::Matrix3d::Identity()).norm();
    if (ortho > tol || std::abs(m.determinant() - 1.0) > tol) {
      throw Error(ErrorCode::kValidation,
                  "rotation matrix is not orthonormal with det +1");
    }
    return GravityRotation(m);
  }

  /// Hamilton quaternion (w, x, y, z). The norm must be within `tol` of one;
  /// the stored rotation uses the renormalized quaternion.
  static GravityRotation from_quaternion(const Eigen::Quaterniond& q,
                                         double tol = 1e-9) {
    const double n = q.norm();
    if (!std::isfinite(n) || std::abs(n - 1.0) > tol) {
      throw Error(ErrorCode::kValidation,
                  "quaternion is not unit length (|q| = " + std::to_string(n) +
                      ")");
    }
    return GravityRotation(q.normalized().toRotationMatrix());
  }

  const Eigen::Matrix3d& matrix() const { return matrix_; }
  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(matrix_); }

  // Pre-composes with a yaw about the world gravity axis (IMU heading drift).
  GravityRotation with_yaw_drift(double radians) const {
    return GravityRotation(
        matrix_ *
        Eigen::AngleAxisd(radians, Eigen::Vector3d::UnitY()).toRotationMatrix());
  }

 private:
  explicit GravityRotation(const Eigen::Matrix3d& m) : matrix_(m) {}

  Eigen::Matrix3d matrix_;
};

struct Correspondence {
  ImagePoint p1 = ImagePoint::Zero();
  ImagePoint p2 = ImagePoint::Zero();
  GravityRotation r1;
  GravityRotation r2;
};

/// H_y = I + t n^T with n = e_y and d = 1; only the middle column is free.
struct MotionHomography {
  double h1 = 0.0;
  double h2 = 1.0;
  double h3 = 0.0;

  static MotionHomography from_translation(const Eigen::Vector3d& t) {
    return {t.x(), 1.0 + t.y(), t.z()};
  }

  Eigen::Vector3d translation() const { return {h1, h2 - 1.0, h3}; }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 1) = h1;
    m(1, 1) = h2;
    m(2, 1) = h3;
    return m;
  }

  bool finite() const {
    return std::isfinite(h1) && std::isfinite(h2) && std::isfinite(h3);
  }
};

struct RelativePose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_dir = Eigen::Vector3d::UnitX();
};

// ---------------------------------------------------------------------------
// Division model

/// Lifts a measured (distorted) point to the undistorted homogeneous point
/// [x, y, 1 + lambda (x^2 + y^2)]. The third component can be <= 0 for points
/// beyond the model's singularity; callers must check.
inline Eigen::Vector3d undistort_div(const ImagePoint& p, double lambda) {
  return {p.x(), p.y(), 1.0 + lambda * p.squaredNorm()};
}

/// Inhomogeneous undistorted point, or nullopt past the singularity.
inline std::optional<ImagePoint> undistort_point(const ImagePoint& p,
                                                 double lambda) {
  const double w = 1.0 + lambda * p.squaredNorm();
  if (!(w > 0.0)) return std::nullopt;
  return ImagePoint(p / w);
}

/// Inverse of the division model: the distorted point on the same ray as the
/// undistorted point `u`. Solves lambda r_u r_d^2 - r_d + r_u = 0 for the root
/// that tends to r_u as lambda -> 0. Returns nullopt when 1 - 4 lambda r_u^2 < 0.
inline std::optional<ImagePoint> redistort(const ImagePoint& u, double lambda) {
  const double ru2 = u.squaredNorm();
  if (lambda == 0.0 || ru2 == 0.0) return u;
  const double disc = 1.0 - 4.0 * lambda * ru2;
  if (disc < 0.0) return std::nullopt;
  // (1 - sqrt(disc)) / (2 lambda r_u) rewritten without cancellation;
  // the ratio r_d / r_u is then 2 / (1 + sqrt(disc)).
  return ImagePoint(u * (2.0 / (1.0 + std::sqrt(disc))));
}

// ---------------------------------------------------------------------------
// Gravity alignment

/// y = R^T K^{-1} [x, y, 1]^T.
inline Eigen::Vector3d align_point(const ImagePoint& p, const GravityRotation& r,
                                   double focal) {
  if (!(focal > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "focal length must be positive");
  }
  return r.matrix().transpose() *
         Eigen::Vector3d(p.x() / focal, p.y() / focal, 1.0);
}

/// Homogeneous variant: y = R^T K^{-1} x.
inline Eigen::Vector3d align_point(const Eigen::Vector3d& x,
                                   const GravityRotation& r, double focal) {
  if (!(focal > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "focal length must be positive");
  }
  return r.matrix().transpose() *
         Eigen::Vector3d(x.x() / focal, x.y() / focal, x.z());
}

inline Eigen::Matrix3d normalize_h33(const Eigen::Matrix3d& h) {
  if (!(std::abs(h(2, 2)) >= 1e-12)) {
    throw Error(ErrorCode::kNormalizationFailure,
                "homography (3,3) entry vanishes");
  }
  return h / h(2, 2);
}

/// Image homography H ~ K R2 H_y R1^T K^{-1}, scaled so that h33 = 1. It maps
/// undistorted homogeneous points of the first image to the second.
inline Eigen::Matrix3d compose_homography(const MotionHomography& hy,
                                          const GravityRotation& r1,
                                          const GravityRotation& r2,
                                          const Intrinsics& intr) {
  const Eigen::DiagonalMatrix<double, 3> k(intr.focal, intr.focal, 1.0);
  const Eigen::DiagonalMatrix<double, 3> k_inv(1.0 / intr.focal,
                                               1.0 / intr.focal, 1.0);
  const Eigen::Matrix3d h =
      k * r2.matrix() * hy.matrix() * r1.matrix().transpose() * k_inv;
  return normalize_h33(h);
}

/// Relative rotation R2 R1^T and unit translation direction of R2 t.
inline RelativePose extract_pose(const MotionHomography& hy,
                                 const GravityRotation& r1,
                                 const GravityRotation& r2) {
  const Eigen::Vector3d t = hy.translation();
  if (t.norm() < 1e-12) {
    throw Error(ErrorCode::kZeroTranslation,
                "translation vanishes; direction undefined");
  }
  RelativePose pose;
  pose.rotation = r2.matrix() * r1.matrix().transpose();
  pose.translation_dir = (r2.matrix() * t).normalized();
  return pose;
}

/// Residual of the aligned DLT constraint y2 x H_y y1 = 0 for one
/// correspondence, computed on unit vectors so it is scale free.
inline double transfer_residual(const Correspondence& c,
                                const MotionHomography& hy,
                                const Intrinsics& intr) {
  const Eigen::Vector3d y1 =
      align_point(undistort_div(c.p1, intr.lambda), c.r1, intr.focal);
  const Eigen::Vector3d y2 =
      align_point(undistort_div(c.p2, intr.lambda), c.r2, intr.focal);
  const Eigen::Vector3d mapped = hy.matrix() * y1;
  return y2.normalized().cross(mapped.normalized()).norm();
}

// ---------------------------------------------------------------------------
// Error metrics

/// Frobenius distance between h33-normalized homographies, relative to the
/// ground truth.
inline double homography_error(const Eigen::Matrix3d& estimate,
                               const Eigen::Matrix3d& ground_truth) {
  const Eigen::Matrix3d e = normalize_h33(estimate);
  const Eigen::Matrix3d g = normalize_h33(ground_truth);
  return (e - g).norm() / g.norm();
}

/// Angle of R_gt R_est^T, i.e. arccos((tr - 1) / 2). Small angles use the
/// chord ||R_gt - R_est||_F = 2 sqrt(2) sin(theta / 2), which is exactly zero
/// for identical inputs; large ones use atan2 on the axis-angle terms.
inline double rotation_error(const Eigen::Matrix3d& gt,
                             const Eigen::Matrix3d& est) {
  const double chord = (gt - est).norm() / (2.0 * std::sqrt(2.0));
  if (chord < 0.5) return 2.0 * std::asin(chord);
  const Eigen::Matrix3d m = gt * est.transpose();
  const double c = 0.5 * (m.trace() - 1.0);
  const Eigen::Vector3d axis(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0),
                             m(1, 0) - m(0, 1));
  return std::atan2(0.5 * axis.norm(), c);
}

/// Angle between translation directions, folded to [0, pi/2]; the sign of a
/// direction recovered from a homography is not observable.
inline double translation_error(const Eigen::Vector3d& gt,
                                const Eigen::Vector3d& est) {
  return std::atan2(gt.cross(est).norm(), std::abs(gt.dot(est)));
}

/// |gt - est| / |gt|, or the absolute difference when gt is exactly zero.
inline double relative_error(double estimate, double ground_truth) {
  const double diff = std::abs(ground_truth - estimate);
  return ground_truth == 0.0 ? diff : diff / std::abs(ground_truth);
}

struct PoseErrors {
  double rotation = 0.0;
  double translation = 0.0;
  double focal = 0.0;
};

inline PoseErrors pose_errors(const RelativePose& est, double focal_est,
                              const RelativePose& gt, double focal_gt) {
  if (!(focal_gt > 0.0)) {
    throw Error(ErrorCode::kPrecondition,
                "ground-truth focal length must be positive");
  }
  return {rotation_error(gt.rotation, est.rotation),
          translation_error(gt.translation_dir, est.translation_dir),
          relative_error(focal_est, focal_gt)};
}

}  // namespace gravhom
