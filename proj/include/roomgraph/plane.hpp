#pragma once

#include <cmath>

#include "roomgraph/geometry.hpp"

namespace roomgraph {

/// Infinite plane with convention n . x = d for points x on the plane.
/// Stored planes are kept canonical: d >= 0, ties broken so the first
/// nonzero normal component is positive.
struct PlaneParam {
  Eigen::Vector3d normal{1.0, 0.0, 0.0};
  double d = 0.0;

  PlaneParam() = default;
  PlaneParam(const Eigen::Vector3d& n, double dist) : normal(n.normalized()), d(dist) {}

  double signedDistance(const Eigen::Vector3d& p) const { return normal.dot(p) - d; }
};

inline bool lexicographicallyPositive(const Eigen::Vector3d& n, double tol = 1e-12) {
  if (n.x() > tol) return true;
  if (n.x() < -tol) return false;
  if (n.y() > tol) return true;
  if (n.y() < -tol) return false;
  return n.z() > 0.0;
}

inline PlaneParam canonicalize(const PlaneParam& p, double tol = 1e-12) {
  PlaneParam out = p;
  out.normal.normalize();
  if (out.d < -tol) {
    out.normal = -out.normal;
    out.d = -out.d;
  } else if (std::abs(out.d) <= tol && !lexicographicallyPositive(out.normal, tol)) {
    out.normal = -out.normal;
    out.d = -out.d;  // keeps -0 out of the stored value below
  }
  if (out.d == 0.0) out.d = 0.0;
  return out;
}

/// Flip the plane so its normal points toward the reference point
/// (n . ref - d > 0), e.g. toward the sensor origin or a room center.
inline PlaneParam orientToward(const PlaneParam& p, const Eigen::Vector3d& ref) {
  if (p.signedDistance(ref) >= 0.0) return p;
  return PlaneParam(-p.normal, -p.d);
}

/// Transport a plane by a rigid transform: for x_dst = T x_src,
/// n_dst = R n_src and d_dst = d_src + n_dst . t. Output is canonical.
inline PlaneParam transformPlane(const Pose3& t, const PlaneParam& p) {
  Eigen::Vector3d n = t.rotation * p.normal;
  return canonicalize(PlaneParam(n, p.d + n.dot(t.translation)));
}

inline double angleBetweenNormals(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace roomgraph
