#pragma once

#include <map>
#include <optional>
#include <vector>

#include "roomgraph/errors.hpp"
#include "roomgraph/geometry.hpp"
#include "roomgraph/plane.hpp"
#include "roomgraph/room_detection.hpp"
#include "roomgraph/sgraph.hpp"

namespace roomgraph {

struct OptimizerConfig {
  double lambda_init = 1e-4;
  double lambda_up = 10.0;
  double lambda_down = 0.5;
  int max_iterations = 100;
  double rel_cost_tol = 1e-8;
  double huber_delta = 1.0;  // applied to pose-plane, room-plane and equality factors
};

struct OptimizationReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
};

// ---------------------------------------------------------------------------
// Optimizable state, kept separate from the graph so optimization runs on a
// snapshot and is written back atomically.

enum class VarType { Keyframe, Plane, Room };

struct VarRef {
  VarType type;
  int id;
  bool operator<(const VarRef& o) const {
    return type != o.type ? type < o.type : id < o.id;
  }
  bool operator==(const VarRef& o) const { return type == o.type && id == o.id; }
};

struct OptimizerState {
  std::map<int, Pose3> keyframes;
  std::map<int, PlaneParam> planes;
  std::map<int, Eigen::Vector2d> rooms;

  static OptimizerState fromGraph(const AgentGraph& graph) {
    OptimizerState s;
    for (const auto& [id, kf] : graph.keyframes) s.keyframes[id] = kf.pose;
    for (const auto& [id, pv] : graph.planes) s.planes[id] = pv.plane;
    for (const auto& [id, r] : graph.rooms) s.rooms[id] = r.center;
    return s;
  }

  void writeBack(AgentGraph& graph) const {
    for (const auto& [id, pose] : keyframes) graph.keyframes.at(id).pose = pose;
    for (const auto& [id, plane] : planes) graph.planes.at(id).plane = plane;
    for (const auto& [id, center] : rooms) graph.rooms.at(id).center = center;
    recomputeFloor(graph);
  }
};

inline int varDim(VarType t) {
  switch (t) {
    case VarType::Keyframe: return 6;
    case VarType::Plane: return 3;
    case VarType::Room: return 2;
  }
  return 0;
}

/// Manifold retraction: SE(3) right update for keyframes, S2 x R for planes
/// (normal renormalized, so unit length is preserved exactly), additive for
/// rooms.
inline void retract(OptimizerState& state, const VarRef& var, const Eigen::VectorXd& delta) {
  switch (var.type) {
    case VarType::Keyframe: {
      state.keyframes.at(var.id) = state.keyframes.at(var.id).compose(se3Exp(delta));
      break;
    }
    case VarType::Plane: {
      PlaneParam& p = state.planes.at(var.id);
      Eigen::Matrix<double, 3, 2> b = tangentBasis(p.normal);
      p.normal = (p.normal + b * delta.head<2>()).normalized();
      p.d += delta(2);
      break;
    }
    case VarType::Room: {
      state.rooms.at(var.id) += delta;
      break;
    }
  }
}

struct FactorEval {
  Eigen::VectorXd residual;
  std::vector<std::pair<VarRef, Eigen::MatrixXd>> jacobians;
};

namespace detail {

// Plane transported into the keyframe frame, without re-canonicalization.
inline PlaneParam planeInKeyframe(const Pose3& t_kf, const PlaneParam& global) {
  Eigen::Matrix3d rt = t_kf.rotation.toRotationMatrix().transpose();
  Eigen::Vector3d n = rt * global.normal;
  return PlaneParam(n, global.d - global.normal.dot(t_kf.translation));
}

inline FactorEval evalOdometry(const OptimizerState& s, const FactorEdge& f) {
  const Pose3& ti = s.keyframes.at(f.vertices[0]);
  const Pose3& tj = s.keyframes.at(f.vertices[1]);
  Pose3 m = ti.inverse().compose(tj);
  Vector6d r = se3Log(f.pose_measurement.inverse().compose(m));
  Matrix6d jr_inv = se3RightJacobianInv(r);

  FactorEval e;
  e.residual = r;
  e.jacobians.emplace_back(VarRef{VarType::Keyframe, f.vertices[0]},
                           -jr_inv * se3Adjoint(m.inverse()));
  e.jacobians.emplace_back(VarRef{VarType::Keyframe, f.vertices[1]}, jr_inv);
  return e;
}

inline FactorEval evalPrior(const OptimizerState& s, const FactorEdge& f) {
  const Pose3& t = s.keyframes.at(f.vertices[0]);
  Vector6d r = se3Log(f.pose_measurement.inverse().compose(t));
  FactorEval e;
  e.residual = r;
  e.jacobians.emplace_back(VarRef{VarType::Keyframe, f.vertices[0]}, se3RightJacobianInv(r));
  return e;
}

inline FactorEval evalPosePlane(const OptimizerState& s, const FactorEdge& f) {
  const Pose3& t = s.keyframes.at(f.vertices[0]);
  const PlaneParam& global = s.planes.at(f.vertices[1]);
  const PlaneParam& obs = f.plane_measurement;  // keyframe frame, sensor-oriented

  PlaneParam pred = planeInKeyframe(t, global);
  double sign = pred.normal.dot(obs.normal) < 0.0 ? -1.0 : 1.0;

  Eigen::Matrix<double, 3, 2> b_obs = tangentBasis(obs.normal);
  Eigen::Vector3d r3;
  r3.head<2>() = b_obs.transpose() * (sign * pred.normal);
  r3(2) = obs.d - sign * pred.d;

  Eigen::Matrix3d rt = t.rotation.toRotationMatrix().transpose();
  Eigen::Matrix<double, 3, 2> b_g = tangentBasis(global.normal);

  // keyframe block, tangent (rho, phi)
  Eigen::Matrix<double, 3, 6> j_kf = Eigen::Matrix<double, 3, 6>::Zero();
  j_kf.block<2, 3>(0, 3) = sign * b_obs.transpose() * skew(pred.normal);
  j_kf.block<1, 3>(2, 0) = sign * pred.normal.transpose();

  // plane block, tangent (normal 2dof, d)
  Eigen::Matrix3d j_pl = Eigen::Matrix3d::Zero();
  j_pl.block<2, 2>(0, 0) = sign * b_obs.transpose() * rt * b_g;
  j_pl.block<1, 2>(2, 0) = sign * t.translation.transpose() * b_g;
  j_pl(2, 2) = -sign;

  FactorEval e;
  e.residual = r3;
  e.jacobians.emplace_back(VarRef{VarType::Keyframe, f.vertices[0]}, j_kf);
  e.jacobians.emplace_back(VarRef{VarType::Plane, f.vertices[1]}, j_pl);
  return e;
}

inline FactorEval evalRoomPlane(const OptimizerState& s, const FactorEdge& f) {
  const Eigen::Vector2d& center = s.rooms.at(f.vertices[0]);
  Eigen::Vector3d anchor(center.x(), center.y(), 0.0);

  std::array<const PlaneParam*, 4> planes{};
  std::array<double, 4> sgn{};
  for (int k = 0; k < 4; ++k) {
    planes[k] = &s.planes.at(f.vertices[k + 1]);
    sgn[k] = planes[k]->signedDistance(anchor) >= 0.0 ? 1.0 : -1.0;
  }
  std::array<PlaneParam, 4> oriented;
  for (int k = 0; k < 4; ++k) {
    oriented[k] = PlaneParam(sgn[k] * planes[k]->normal, sgn[k] * planes[k]->d);
  }
  Eigen::Vector2d computed = computeRoomCenter(oriented);

  FactorEval e;
  e.residual = center - computed;
  e.jacobians.emplace_back(VarRef{VarType::Room, f.vertices[0]}, Eigen::Matrix2d::Identity());

  // pairs are (0,1) and (2,3) by construction
  for (int pair = 0; pair < 2; ++pair) {
    int ia = 2 * pair, ib = 2 * pair + 1;
    const PlaneParam& a = oriented[ia];
    const PlaneParam& b = oriented[ib];
    double half_gap = 0.5 * (a.d - b.d);

    Eigen::Matrix<double, 3, 2> basis_a = tangentBasis(planes[ia]->normal);
    // center contribution c = n_hat_a * (d_hat_a - d_hat_b) / 2
    Eigen::Matrix<double, 2, 3> j_a = Eigen::Matrix<double, 2, 3>::Zero();
    Eigen::Matrix<double, 3, 2> dn = sgn[ia] * basis_a * half_gap;
    j_a.block<2, 2>(0, 0) = -dn.topRows<2>();
    j_a.col(2) = -0.5 * sgn[ia] * sgn[ia] * planes[ia]->normal.head<2>();

    Eigen::Matrix<double, 2, 3> j_b = Eigen::Matrix<double, 2, 3>::Zero();
    j_b.col(2) = 0.5 * sgn[ib] * a.normal.head<2>();

    e.jacobians.emplace_back(VarRef{VarType::Plane, f.vertices[ia + 1]}, j_a);
    e.jacobians.emplace_back(VarRef{VarType::Plane, f.vertices[ib + 1]}, j_b);
  }
  return e;
}

inline FactorEval evalPlaneEquality(const OptimizerState& s, const FactorEdge& f) {
  const PlaneParam& local = s.planes.at(f.vertices[0]);
  const PlaneParam& target = f.plane_measurement;
  double sign = local.normal.dot(target.normal) < 0.0 ? -1.0 : 1.0;

  Eigen::Matrix<double, 3, 2> b_t = tangentBasis(target.normal);
  Eigen::Vector3d r3;
  r3.head<2>() = b_t.transpose() * (sign * local.normal);
  r3(2) = target.d - sign * local.d;

  Eigen::Matrix<double, 3, 2> b_l = tangentBasis(local.normal);
  Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
  j.block<2, 2>(0, 0) = sign * b_t.transpose() * b_l;
  j(2, 2) = -sign;

  FactorEval e;
  e.residual = r3;
  e.jacobians.emplace_back(VarRef{VarType::Plane, f.vertices[0]}, j);
  return e;
}

inline FactorEval evalRoomEquality(const OptimizerState& s, const FactorEdge& f) {
  const Eigen::Vector2d& local = s.rooms.at(f.vertices[0]);
  FactorEval e;
  e.residual = f.room_measurement - local;
  e.jacobians.emplace_back(VarRef{VarType::Room, f.vertices[0]}, -Eigen::Matrix2d::Identity());
  return e;
}

}  // namespace detail

inline FactorEval evaluateFactor(const OptimizerState& state, const FactorEdge& factor) {
  switch (factor.kind) {
    case FactorKind::Odometry: return detail::evalOdometry(state, factor);
    case FactorKind::PriorPose: return detail::evalPrior(state, factor);
    case FactorKind::PosePlane: return detail::evalPosePlane(state, factor);
    case FactorKind::RoomPlane: return detail::evalRoomPlane(state, factor);
    case FactorKind::PlaneEquality: return detail::evalPlaneEquality(state, factor);
    case FactorKind::RoomEquality: return detail::evalRoomEquality(state, factor);
  }
  throw Error("unknown factor kind");
}

inline bool factorIsRobust(FactorKind kind) {
  return kind == FactorKind::PosePlane || kind == FactorKind::RoomPlane ||
         kind == FactorKind::PlaneEquality || kind == FactorKind::RoomEquality;
}

namespace detail {

inline double robustCost(double e2, bool robust, double delta) {
  if (!robust) return e2;
  double e = std::sqrt(std::max(e2, 0.0));
  if (e <= delta) return e2;
  return 2.0 * delta * e - delta * delta;
}

inline double robustWeight(double e2, bool robust, double delta) {
  if (!robust) return 1.0;
  double e = std::sqrt(std::max(e2, 0.0));
  if (e <= delta) return 1.0;
  return delta / e;
}

inline double totalCost(const OptimizerState& state, const std::vector<FactorEdge>& factors,
                        const OptimizerConfig& cfg) {
  double cost = 0.0;
  for (const FactorEdge& f : factors) {
    FactorEval e = evaluateFactor(state, f);
    double e2 = e.residual.dot(f.information * e.residual);
    cost += robustCost(e2, factorIsRobust(f.kind), cfg.huber_delta);
  }
  return cost;
}

}  // namespace detail

/// Levenberg-Marquardt over keyframe poses, local planes and local room
/// centers. External vertices stay fixed: their transported estimates act as
/// measurements through equality factors. Accepted steps never increase the
/// robustified cost.
inline OptimizationReport optimize(AgentGraph& graph, const OptimizerConfig& cfg = {}) {
  bool has_prior = false;
  for (const FactorEdge& f : graph.factors) {
    if (f.kind == FactorKind::PriorPose) has_prior = true;
  }
  if (!has_prior) {
    throw SingularSystemError("graph has no prior factor anchoring the gauge");
  }

  OptimizerState state = OptimizerState::fromGraph(graph);

  // free variable layout
  std::map<VarRef, int> offset;
  int dim = 0;
  for (const auto& [id, kf] : graph.keyframes) {
    offset[{VarType::Keyframe, id}] = dim;
    dim += 6;
  }
  for (const auto& [id, pv] : graph.planes) {
    if (pv.provenance == Provenance::Local) {
      offset[{VarType::Plane, id}] = dim;
      dim += 3;
    }
  }
  for (const auto& [id, r] : graph.rooms) {
    if (r.provenance == Provenance::Local) {
      offset[{VarType::Room, id}] = dim;
      dim += 2;
    }
  }
  if (dim == 0) return {0.0, 0.0, 0};

  double cost = detail::totalCost(state, graph.factors, cfg);
  OptimizationReport report;
  report.initial_cost = cost;

  double lambda = cfg.lambda_init;
  int iter = 0;
  for (; iter < cfg.max_iterations; ++iter) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);

    for (const FactorEdge& f : graph.factors) {
      FactorEval e = evaluateFactor(state, f);
      double e2 = e.residual.dot(f.information * e.residual);
      double w = detail::robustWeight(e2, factorIsRobust(f.kind), cfg.huber_delta);
      Eigen::MatrixXd winfo = w * f.information;
      for (const auto& [var_a, jac_a] : e.jacobians) {
        auto it_a = offset.find(var_a);
        if (it_a == offset.end()) continue;
        g.segment(it_a->second, jac_a.cols()).noalias() +=
            jac_a.transpose() * (winfo * e.residual);
        for (const auto& [var_b, jac_b] : e.jacobians) {
          auto it_b = offset.find(var_b);
          if (it_b == offset.end()) continue;
          h.block(it_a->second, it_b->second, jac_a.cols(), jac_b.cols()).noalias() +=
              jac_a.transpose() * winfo * jac_b;
        }
      }
    }

    Eigen::MatrixXd damped = h;
    for (int i = 0; i < dim; ++i) {
      damped(i, i) += lambda * std::max(h(i, i), 1e-12);
    }
    Eigen::VectorXd delta = damped.ldlt().solve(-g);
    if (!delta.allFinite()) {
      throw SingularSystemError("normal equations are rank-deficient beyond the anchored gauge");
    }

    OptimizerState trial = state;
    for (const auto& [var, off] : offset) {
      retract(trial, var, delta.segment(off, varDim(var.type)));
    }
    double trial_cost = detail::totalCost(trial, graph.factors, cfg);

    if (trial_cost < cost) {
      double rel_change = (cost - trial_cost) / std::max(cost, 1e-300);
      state = std::move(trial);
      cost = trial_cost;
      lambda = std::max(lambda * cfg.lambda_down, 1e-12);
      if (rel_change < cfg.rel_cost_tol) {
        ++iter;
        break;
      }
    } else {
      lambda *= cfg.lambda_up;
      if (lambda > 1e12) {
        ++iter;
        break;
      }
    }
  }

  state.writeBack(graph);
  report.final_cost = cost;
  report.iterations = iter;
  return report;
}

}  // namespace roomgraph
