#pragma once

#include "spa/common.hpp"

namespace spa {

/// Rigid body transform: x' = R x + t. Also used for camera poses
/// (camera-to-world).
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  static RigidTransform from_quaternion(const Quat& q, const Vec3& t) {
    return {q.normalized().toRotationMatrix(), t};
  }

  /// Rotation of `angle` radians about `axis`, plus translation.
  static RigidTransform from_axis_angle(const Vec3& axis, double angle,
                                        const Vec3& t = Vec3::Zero()) {
    return {Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), t};
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 rotate(const Vec3& v) const { return rotation * v; }

  RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }

  /// this ∘ other: (this * other).apply(p) == this.apply(other.apply(p))
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  /// Rotation angle in radians, in [0, pi].
  double rotation_angle() const {
    return safe_acos((rotation.trace() - 1.0) / 2.0);
  }

  bool is_valid(double tol = 1e-9) const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
           std::abs(rotation.determinant() - 1.0) < tol;
  }
};

using Pose = RigidTransform;

/// Transform mapping points in frame a to points in frame b, given the
/// two camera-to-world poses.
inline RigidTransform relative_transform(const Pose& pose_a, const Pose& pose_b) {
  return pose_b.inverse() * pose_a;
}

/// Rotation (deg) and translation (m) magnitude of T_truth^-1 * T_estimate.
inline std::pair<double, double> pose_error(const RigidTransform& estimate,
                                            const RigidTransform& truth) {
  const RigidTransform err = truth.inverse() * estimate;
  return {rad2deg(err.rotation_angle()), err.translation.norm()};
}

}  // namespace spa
