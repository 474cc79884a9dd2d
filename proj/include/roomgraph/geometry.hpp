#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace roomgraph {

using PointCloud = std::vector<Eigen::Vector3d>;

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Rigid body pose: unit quaternion + translation. Tangent vectors are
/// ordered (rho, phi) = (translation, rotation), right perturbation
/// T * Exp(delta) unless stated otherwise.
struct Pose3 {
  Eigen::Quaterniond rotation{1.0, 0.0, 0.0, 0.0};
  Eigen::Vector3d translation{0.0, 0.0, 0.0};

  Pose3() = default;
  Pose3(const Eigen::Quaterniond& q, const Eigen::Vector3d& t)
      : rotation(q.normalized()), translation(t) {}

  static Pose3 identity() { return Pose3{}; }

  static Pose3 fromYaw(double yaw, const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
    return Pose3(Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())), t);
  }

  static Pose3 fromMatrix(const Eigen::Matrix4d& m) {
    return Pose3(Eigen::Quaterniond(Eigen::Matrix3d(m.topLeftCorner<3, 3>())),
                 m.topRightCorner<3, 1>());
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation.toRotationMatrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  Pose3 compose(const Pose3& other) const {
    return Pose3(rotation * other.rotation, translation + rotation * other.translation);
  }

  Pose3 inverse() const {
    Eigen::Quaterniond qi = rotation.conjugate();
    return Pose3(qi, qi * (-translation));
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  double yaw() const {
    Eigen::Matrix3d r = rotation.toRotationMatrix();
    return std::atan2(r(1, 0), r(0, 0));
  }
};

inline Pose3 operator*(const Pose3& a, const Pose3& b) { return a.compose(b); }

// ---------------------------------------------------------------------------
// SO(3) maps

inline Eigen::Matrix3d so3Exp(const Eigen::Vector3d& phi) {
  double theta = phi.norm();
  if (theta < 1e-12) {
    return Eigen::Matrix3d::Identity() + skew(phi);
  }
  return Eigen::AngleAxisd(theta, phi / theta).toRotationMatrix();
}

inline Eigen::Vector3d so3Log(const Eigen::Matrix3d& r) {
  Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

inline Eigen::Vector3d so3Log(const Eigen::Quaterniond& q) {
  return so3Log(q.toRotationMatrix());
}

inline Eigen::Matrix3d so3LeftJacobian(const Eigen::Vector3d& phi) {
  double theta2 = phi.squaredNorm();
  Eigen::Matrix3d w = skew(phi);
  if (theta2 < 1e-10) {
    return Eigen::Matrix3d::Identity() + 0.5 * w + w * w / 6.0;
  }
  double theta = std::sqrt(theta2);
  return Eigen::Matrix3d::Identity() + (1.0 - std::cos(theta)) / theta2 * w +
         (theta - std::sin(theta)) / (theta2 * theta) * w * w;
}

inline Eigen::Matrix3d so3LeftJacobianInv(const Eigen::Vector3d& phi) {
  double theta2 = phi.squaredNorm();
  Eigen::Matrix3d w = skew(phi);
  if (theta2 < 1e-10) {
    return Eigen::Matrix3d::Identity() - 0.5 * w + w * w / 12.0;
  }
  double theta = std::sqrt(theta2);
  double c = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() - 0.5 * w + c * w * w;
}

// ---------------------------------------------------------------------------
// SE(3) maps, tangent order (rho, phi)

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

inline Pose3 se3Exp(const Vector6d& xi) {
  Eigen::Vector3d rho = xi.head<3>();
  Eigen::Vector3d phi = xi.tail<3>();
  Eigen::Matrix3d r = so3Exp(phi);
  return Pose3(Eigen::Quaterniond(r), so3LeftJacobian(phi) * rho);
}

inline Vector6d se3Log(const Pose3& pose) {
  Eigen::Vector3d phi = so3Log(pose.rotation);
  Vector6d xi;
  xi.head<3>() = so3LeftJacobianInv(phi) * pose.translation;
  xi.tail<3>() = phi;
  return xi;
}

inline Matrix6d se3Adjoint(const Pose3& pose) {
  Eigen::Matrix3d r = pose.rotation.toRotationMatrix();
  Matrix6d ad = Matrix6d::Zero();
  ad.topLeftCorner<3, 3>() = r;
  ad.topRightCorner<3, 3>() = skew(pose.translation) * r;
  ad.bottomRightCorner<3, 3>() = r;
  return ad;
}

namespace detail {

// Q block of the SE(3) left Jacobian (Barfoot's closed form).
inline Eigen::Matrix3d se3JacobianQ(const Eigen::Vector3d& rho, const Eigen::Vector3d& phi) {
  Eigen::Matrix3d rx = skew(rho);
  Eigen::Matrix3d px = skew(phi);
  double theta = phi.norm();

  double c1, c2, c3;  // series coefficients
  if (theta < 1e-4) {
    double t2 = theta * theta;
    c1 = 1.0 / 6.0 - t2 / 120.0;
    c2 = 1.0 / 24.0 - t2 / 720.0;
    c3 = 0.5 * (c2 - 3.0 * (-1.0 / 120.0 + t2 / 5040.0));
  } else {
    double t2 = theta * theta;
    double t3 = t2 * theta;
    double st = std::sin(theta);
    double ct = std::cos(theta);
    c1 = (theta - st) / t3;
    c2 = (1.0 - 0.5 * t2 - ct) / (t2 * t2);
    c3 = 0.5 * (c2 - 3.0 * (theta - st - t3 / 6.0) / (t2 * t3));
  }

  return 0.5 * rx + c1 * (px * rx + rx * px + px * rx * px) -
         c2 * (px * px * rx + rx * px * px - 3.0 * px * rx * px) -
         c3 * (px * rx * px * px + px * px * rx * px);
}

}  // namespace detail

inline Matrix6d se3LeftJacobianInv(const Vector6d& xi) {
  Eigen::Vector3d rho = xi.head<3>();
  Eigen::Vector3d phi = xi.tail<3>();
  Eigen::Matrix3d jinv = so3LeftJacobianInv(phi);
  Eigen::Matrix3d q = detail::se3JacobianQ(rho, phi);
  Matrix6d out = Matrix6d::Zero();
  out.topLeftCorner<3, 3>() = jinv;
  out.topRightCorner<3, 3>() = -jinv * q * jinv;
  out.bottomRightCorner<3, 3>() = jinv;
  return out;
}

/// Inverse right Jacobian of the SE(3) log map: d Log(T Exp(d)) / d d at d=0
/// equals se3RightJacobianInv(Log T).
inline Matrix6d se3RightJacobianInv(const Vector6d& xi) { return se3LeftJacobianInv(-xi); }

inline double wrapAngle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

/// Angle of the relative rotation between two poses, in radians.
inline double rotationAngleBetween(const Pose3& a, const Pose3& b) {
  return std::abs(Eigen::AngleAxisd(a.rotation.conjugate() * b.rotation).angle());
}

/// Orthonormal basis of the plane orthogonal to a unit vector. Deterministic
/// in the input; recomputed at every linearization point.
inline Eigen::Matrix<double, 3, 2> tangentBasis(const Eigen::Vector3d& n) {
  Eigen::Vector3d ref = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  Eigen::Vector3d b1 = ref.cross(n).normalized();
  Eigen::Matrix<double, 3, 2> b;
  b.col(0) = b1;
  b.col(1) = n.cross(b1);
  return b;
}

}  // namespace roomgraph
