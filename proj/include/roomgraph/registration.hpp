#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "roomgraph/descriptor.hpp"
#include "roomgraph/errors.hpp"
#include "roomgraph/geometry.hpp"
#include "roomgraph/sgraph.hpp"

namespace roomgraph {

struct RegistrationConfig {
  double voxel = 0.5;
  double cov_eigen_floor = 1e-3;  // epsilon: min/max eigenvalue ratio
  int max_iterations = 50;
  double update_epsilon = 1e-6;
  double fitness_threshold = 0.05;  // d_t, mean weighted squared residual
  double min_inlier_fraction = 0.6;
  double min_initial_overlap = 0.1;
};

struct VoxelGaussian {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d information = Eigen::Matrix3d::Identity();  // scaled so max eigenvalue = 1
  int count = 0;
};

struct VoxelGaussianGrid {
  double voxel = 0.5;
  std::unordered_map<int64_t, VoxelGaussian> cells;

  static int64_t key(int64_t x, int64_t y, int64_t z) {
    // 21 bits per axis, offset to positive
    return ((x + (1 << 20)) << 42) | ((y + (1 << 20)) << 21) | (z + (1 << 20));
  }

  int64_t keyOf(const Eigen::Vector3d& p) const {
    return key(static_cast<int64_t>(std::floor(p.x() / voxel)),
               static_cast<int64_t>(std::floor(p.y() / voxel)),
               static_cast<int64_t>(std::floor(p.z() / voxel)));
  }

  bool occupied(const Eigen::Vector3d& p) const { return cells.count(keyOf(p)) > 0; }

  bool empty() const { return cells.empty(); }
};

/// Per-voxel mean and covariance of the cloud. Covariances are regularized
/// by flooring eigenvalues at `eigen_floor` times the largest; voxels with
/// fewer than 4 points fall back to an isotropic covariance. The stored
/// information matrix is scaled so its largest eigenvalue is 1, which makes
/// weighted squared residuals read as square meters along the constrained
/// direction.
inline VoxelGaussianGrid buildVoxelGaussians(const PointCloud& cloud, double voxel,
                                             double eigen_floor = 1e-3) {
  struct Acc {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
    int n = 0;
  };
  VoxelGaussianGrid grid;
  grid.voxel = voxel;
  std::unordered_map<int64_t, Acc> acc;
  for (const Eigen::Vector3d& p : cloud) {
    Acc& a = acc[grid.keyOf(p)];
    a.sum += p;
    a.outer += p * p.transpose();
    a.n += 1;
  }
  for (const auto& [key, a] : acc) {
    VoxelGaussian g;
    g.count = a.n;
    g.mean = a.sum / a.n;
    if (a.n < 4) {
      g.information = Eigen::Matrix3d::Identity();
    } else {
      Eigen::Matrix3d cov = a.outer / a.n - g.mean * g.mean.transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
      Eigen::Vector3d ev = es.eigenvalues().cwiseMax(1e-12);
      double floor_val = eigen_floor * ev.maxCoeff();
      ev = ev.cwiseMax(floor_val);
      // information scaled by the smallest eigenvalue: unit weight along the
      // most constrained direction, eigen_floor along free directions
      Eigen::Vector3d w = ev.minCoeff() * ev.cwiseInverse();
      g.information = es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
    }
    grid.cells.emplace(key, g);
  }
  return grid;
}

/// Regularized covariance of a voxel, for inspection in tests.
inline Eigen::Matrix3d regularizedCovariance(const PointCloud& pts, double eigen_floor) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Eigen::Vector3d ev = es.eigenvalues().cwiseMax(0.0);
  ev = ev.cwiseMax(eigen_floor * ev.maxCoeff());
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct AlignmentResult {
  Pose3 transform;  // source frame -> target frame
  double fitness = std::numeric_limits<double>::infinity();
  double inlier_fraction = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct CostEval {
  double cost = 0.0;
  int terms = 0;
  double fitness() const { return terms > 0 ? cost / terms : std::numeric_limits<double>::infinity(); }
};

inline CostEval evaluateCost(const PointCloud& source, const VoxelGaussianGrid& grid,
                             const Pose3& t) {
  CostEval e;
  const double v = grid.voxel;
  for (const Eigen::Vector3d& p : source) {
    Eigen::Vector3d q = t.apply(p);
    int64_t ix = static_cast<int64_t>(std::floor(q.x() / v));
    int64_t iy = static_cast<int64_t>(std::floor(q.y() / v));
    int64_t iz = static_cast<int64_t>(std::floor(q.z() / v));
    const int64_t offs[7][3] = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (const auto& o : offs) {
      auto it = grid.cells.find(VoxelGaussianGrid::key(ix + o[0], iy + o[1], iz + o[2]));
      if (it == grid.cells.end()) continue;
      Eigen::Vector3d r = q - it->second.mean;
      e.cost += r.dot(it->second.information * r);
      e.terms += 1;
    }
  }
  return e;
}

}  // namespace detail

/// Gauss-Newton alignment of a source cloud onto a voxel Gaussian grid,
/// distribution-to-point with the 6 face-neighbor voxels included. Steps are
/// accepted only if the cost decreases (step halving), so the objective is
/// non-increasing across iterations.
inline AlignmentResult vgicpAlign(const PointCloud& source, const VoxelGaussianGrid& grid,
                                  const Pose3& init, const RegistrationConfig& cfg = {}) {
  if (source.empty() || grid.empty()) throw NoOverlapError();

  int in_voxels = 0;
  for (const Eigen::Vector3d& p : source) {
    if (grid.occupied(init.apply(p))) ++in_voxels;
  }
  if (in_voxels < cfg.min_initial_overlap * static_cast<double>(source.size())) {
    throw NoOverlapError();
  }

  Pose3 t = init;
  detail::CostEval current = detail::evaluateCost(source, grid, t);
  AlignmentResult result;
  result.converged = false;

  const double v = grid.voxel;
  int iter = 0;
  for (; iter < cfg.max_iterations; ++iter) {
    Matrix6d h = Matrix6d::Zero();
    Vector6d g = Vector6d::Zero();
    Eigen::Matrix3d rot = t.rotation.toRotationMatrix();
    for (const Eigen::Vector3d& p : source) {
      Eigen::Vector3d q = t.apply(p);
      int64_t ix = static_cast<int64_t>(std::floor(q.x() / v));
      int64_t iy = static_cast<int64_t>(std::floor(q.y() / v));
      int64_t iz = static_cast<int64_t>(std::floor(q.z() / v));
      const int64_t offs[7][3] = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                  {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
      // d(T p)/d delta for right perturbation: [R, -R skew(p)]
      Eigen::Matrix<double, 3, 6> jac;
      jac.leftCols<3>() = rot;
      jac.rightCols<3>() = -rot * skew(p);
      for (const auto& o : offs) {
        auto it = grid.cells.find(VoxelGaussianGrid::key(ix + o[0], iy + o[1], iz + o[2]));
        if (it == grid.cells.end()) continue;
        Eigen::Vector3d r = q - it->second.mean;
        h.noalias() += jac.transpose() * it->second.information * jac;
        g.noalias() += jac.transpose() * (it->second.information * r);
      }
    }

    Vector6d delta = h.ldlt().solve(-g);
    if (!delta.allFinite()) break;

    double alpha = 1.0;
    bool accepted = false;
    for (int half = 0; half < 10; ++half) {
      Pose3 trial = t.compose(se3Exp(alpha * delta));
      detail::CostEval trial_cost = detail::evaluateCost(source, grid, trial);
      if (trial_cost.cost < current.cost) {
        t = trial;
        current = trial_cost;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      result.converged = true;  // local minimum: no descent direction left
      ++iter;
      break;
    }
    if ((alpha * delta).norm() < cfg.update_epsilon) {
      result.converged = true;
      ++iter;
      break;
    }
  }

  int inliers = 0;
  for (const Eigen::Vector3d& p : source) {
    if (grid.occupied(t.apply(p))) ++inliers;
  }
  result.transform = t;
  result.fitness = current.fitness();
  result.inlier_fraction = static_cast<double>(inliers) / static_cast<double>(source.size());
  result.iterations = iter;
  return result;
}

/// Initial guess from a descriptor match: pure yaw from the column shift,
/// zero translation since both clouds are room-centered.
inline Pose3 seedInitialGuess(const MatchCandidate& match, int sectors) {
  double yaw = wrapAngle(match.shift * 2.0 * M_PI / sectors);
  return Pose3::fromYaw(yaw);
}

/// Validated map-frame transform of a peer agent.
struct InterAgentTransform {
  int local_agent = 0;
  int remote_agent = 0;
  Pose3 transform;  // ^{A_local} T _{A_remote}
  double fitness = 0.0;
  int local_room = -1;
  int remote_room = -1;
  double weight = 0.0;  // accumulated refinement weight
};

inline Pose3 roomFramePose(const Eigen::Vector2d& center) {
  return Pose3(Eigen::Quaterniond::Identity(), Eigen::Vector3d(center.x(), center.y(), 0.0));
}

/// Gate an alignment on convergence, fitness and inlier fraction; on
/// acceptance lift the room-frame transform into map frames:
/// ^{Ai}T_{Aj} = ^{Ai}T_{Ri} o T_align o (^{Aj}T_{Rj})^-1.
inline std::optional<InterAgentTransform> validateAndLift(
    const AlignmentResult& result, int local_agent, int remote_agent,
    const Eigen::Vector2d& local_room_center, int local_room_id,
    const Pose3& remote_room_pose, int remote_room_id, const RegistrationConfig& cfg = {}) {
  if (!result.converged) return std::nullopt;
  if (!(result.fitness < cfg.fitness_threshold)) return std::nullopt;
  if (!(result.inlier_fraction > cfg.min_inlier_fraction)) return std::nullopt;

  Pose3 local_room = roomFramePose(local_room_center);
  Pose3 remote_room(Eigen::Quaterniond::Identity(), remote_room_pose.translation);

  InterAgentTransform out;
  out.local_agent = local_agent;
  out.remote_agent = remote_agent;
  out.transform = local_room.compose(result.transform).compose(remote_room.inverse());
  out.fitness = result.fitness;
  out.local_room = local_room_id;
  out.remote_room = remote_room_id;
  out.weight = 1.0 / std::max(result.fitness, 1e-6);
  return out;
}

/// Blend a later accepted match into an established transform:
/// fitness-weighted translation average and quaternion slerp.
inline void refineTransform(InterAgentTransform& established, const InterAgentTransform& update) {
  double w_new = update.weight;
  double w_total = established.weight + w_new;
  double alpha = w_new / w_total;
  established.transform.translation =
      (1.0 - alpha) * established.transform.translation + alpha * update.transform.translation;
  established.transform.rotation =
      established.transform.rotation.slerp(alpha, update.transform.rotation).normalized();
  established.fitness = std::min(established.fitness, update.fitness);
  established.weight = w_total;
}

}  // namespace roomgraph
