#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "roomgraph/errors.hpp"
#include "roomgraph/geometry.hpp"
#include "roomgraph/plane.hpp"

namespace roomgraph {

enum class Provenance { Local, External };

enum class FactorKind {
  Odometry,      // keyframe i -> keyframe j, SE(3) measurement
  PosePlane,     // keyframe, plane; plane observed in the keyframe frame
  RoomPlane,     // room + its four planes
  PriorPose,     // gauge anchor on a keyframe
  PlaneEquality, // unary pull of a local plane toward an external estimate
  RoomEquality,  // unary pull of a local room center toward an external estimate
};

inline std::string factorKindName(FactorKind k) {
  switch (k) {
    case FactorKind::Odometry: return "odometry";
    case FactorKind::PosePlane: return "pose_plane";
    case FactorKind::RoomPlane: return "room_plane";
    case FactorKind::PriorPose: return "prior";
    case FactorKind::PlaneEquality: return "plane_equality";
    case FactorKind::RoomEquality: return "room_equality";
  }
  return "unknown";
}

struct Keyframe {
  int id = 0;
  Pose3 pose;            // agent map frame
  PointCloud scan;       // sensor frame
  std::optional<int> room_id;
};

struct PlaneVertex {
  int id = 0;
  PlaneParam plane;  // map frame, canonical
  Provenance provenance = Provenance::Local;
  int source_agent = -1;  // set when provenance == External
  int observation_count = 0;
};

struct Room {
  int id = 0;
  Eigen::Vector2d center{0.0, 0.0};
  // Two near-antiparallel pairs: {plane_ids[0], plane_ids[1]} and
  // {plane_ids[2], plane_ids[3]}.
  std::array<int, 4> plane_ids{-1, -1, -1, -1};
  std::vector<int> keyframe_ids;
  // Extents used for keyframe-in-room tests: axis[i] is the in-plane (x, y)
  // direction of pair i, width[i] the wall separation along it.
  std::array<Eigen::Vector2d, 2> axes{Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)};
  std::array<double, 2> widths{0.0, 0.0};
  double yaw = 0.0;  // orientation metadata; not optimized
  Provenance provenance = Provenance::Local;
  int source_agent = -1;
  bool published = false;
};

struct FloorNode {
  Eigen::Vector2d center{0.0, 0.0};
};

struct FactorEdge {
  FactorKind kind = FactorKind::Odometry;
  std::vector<int> vertices;       // ids; meaning depends on kind
  Pose3 pose_measurement;          // Odometry / PriorPose
  PlaneParam plane_measurement;    // PosePlane (keyframe frame) / PlaneEquality target
  Eigen::Vector2d room_measurement{0.0, 0.0};  // RoomEquality target
  Eigen::MatrixXd information;     // symmetric positive definite, kind-specific dim
};

struct AgentGraph {
  int agent_id = 0;
  std::map<int, Keyframe> keyframes;
  std::map<int, PlaneVertex> planes;
  std::map<int, Room> rooms;
  FloorNode floor;
  std::vector<FactorEdge> factors;

  int next_keyframe_id = 0;
  int next_plane_id = 0;
  int next_room_id = 0;

  const Keyframe* lastKeyframe() const {
    if (keyframes.empty()) return nullptr;
    return &keyframes.rbegin()->second;
  }

  int countRooms(Provenance p) const {
    int n = 0;
    for (const auto& [id, r] : rooms) n += (r.provenance == p) ? 1 : 0;
    return n;
  }
};

inline Matrix6d odometryInformation(double sigma_t, double sigma_rot) {
  Vector6d diag;
  double st = std::max(sigma_t, 1e-6);
  double sr = std::max(sigma_rot, 1e-6);
  diag << 1.0 / (st * st), 1.0 / (st * st), 1.0 / (st * st), 1.0 / (sr * sr), 1.0 / (sr * sr),
      1.0 / (sr * sr);
  return diag.asDiagonal();
}

/// Append a keyframe whose pose composes the previous keyframe pose with
/// odom_delta. The first keyframe composes from identity and carries no
/// odometry factor.
inline int addKeyframe(AgentGraph& graph, const Pose3& odom_delta, PointCloud scan,
                       const Matrix6d& odom_information = odometryInformation(0.01, 0.005)) {
  if (scan.empty()) throw EmptyScanError();
  const Keyframe* prev = graph.lastKeyframe();
  Keyframe kf;
  kf.id = graph.next_keyframe_id++;
  kf.pose = prev ? prev->pose.compose(odom_delta) : odom_delta;
  kf.scan = std::move(scan);
  int prev_id = prev ? prev->id : -1;
  graph.keyframes.emplace(kf.id, std::move(kf));
  if (prev_id >= 0) {
    FactorEdge f;
    f.kind = FactorKind::Odometry;
    f.vertices = {prev_id, graph.keyframes.rbegin()->first};
    f.pose_measurement = odom_delta;
    f.information = odom_information;
    graph.factors.push_back(std::move(f));
  }
  return graph.keyframes.rbegin()->first;
}

inline void addPosePrior(AgentGraph& graph, int keyframe_id, const Pose3& pose,
                         double sigma_t = 1e-4, double sigma_rot = 1e-5) {
  FactorEdge f;
  f.kind = FactorKind::PriorPose;
  f.vertices = {keyframe_id};
  f.pose_measurement = pose;
  f.information = odometryInformation(sigma_t, sigma_rot);
  graph.factors.push_back(std::move(f));
}

inline void recomputeFloor(AgentGraph& graph) {
  if (graph.rooms.empty()) {
    graph.floor.center.setZero();
    return;
  }
  Eigen::Vector2d sum(0.0, 0.0);
  for (const auto& [id, r] : graph.rooms) sum += r.center;
  graph.floor.center = sum / static_cast<double>(graph.rooms.size());
}

inline bool roomContains(const Room& room, const Eigen::Vector2d& p, double margin = 0.0) {
  Eigen::Vector2d rel = p - room.center;
  for (int i = 0; i < 2; ++i) {
    if (std::abs(rel.dot(room.axes[i])) > 0.5 * room.widths[i] + margin) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// JSON snapshot export (vertices, factors, provenance)

inline nlohmann::json poseToJson(const Pose3& p) {
  return nlohmann::json{{"qw", p.rotation.w()}, {"qx", p.rotation.x()}, {"qy", p.rotation.y()},
                        {"qz", p.rotation.z()}, {"tx", p.translation.x()},
                        {"ty", p.translation.y()}, {"tz", p.translation.z()}};
}

inline Pose3 poseFromJson(const nlohmann::json& j) {
  return Pose3(Eigen::Quaterniond(j.at("qw").get<double>(), j.at("qx").get<double>(),
                                  j.at("qy").get<double>(), j.at("qz").get<double>()),
               Eigen::Vector3d(j.at("tx").get<double>(), j.at("ty").get<double>(),
                               j.at("tz").get<double>()));
}

inline nlohmann::json graphToJson(const AgentGraph& graph) {
  nlohmann::json j;
  j["agent_id"] = graph.agent_id;
  j["keyframes"] = nlohmann::json::array();
  for (const auto& [id, kf] : graph.keyframes) {
    nlohmann::json k{{"id", id}, {"pose", poseToJson(kf.pose)}, {"scan_points", kf.scan.size()}};
    if (kf.room_id) k["room_id"] = *kf.room_id;
    j["keyframes"].push_back(std::move(k));
  }
  j["planes"] = nlohmann::json::array();
  for (const auto& [id, pv] : graph.planes) {
    j["planes"].push_back(
        {{"id", id},
         {"normal", {pv.plane.normal.x(), pv.plane.normal.y(), pv.plane.normal.z()}},
         {"d", pv.plane.d},
         {"provenance", pv.provenance == Provenance::Local ? "local" : "external"},
         {"source_agent", pv.source_agent},
         {"observations", pv.observation_count}});
  }
  j["rooms"] = nlohmann::json::array();
  for (const auto& [id, r] : graph.rooms) {
    j["rooms"].push_back({{"id", id},
                          {"center", {r.center.x(), r.center.y()}},
                          {"plane_ids", r.plane_ids},
                          {"keyframe_ids", r.keyframe_ids},
                          {"provenance", r.provenance == Provenance::Local ? "local" : "external"},
                          {"source_agent", r.source_agent}});
  }
  j["floor"] = {{"center", {graph.floor.center.x(), graph.floor.center.y()}}};
  j["factors"] = nlohmann::json::array();
  for (const FactorEdge& f : graph.factors) {
    j["factors"].push_back({{"kind", factorKindName(f.kind)}, {"vertices", f.vertices}});
  }
  return j;
}

}  // namespace roomgraph
