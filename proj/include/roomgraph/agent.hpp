#pragma once

#include <optional>
#include <vector>

#include "roomgraph/broker.hpp"
#include "roomgraph/descriptor.hpp"
#include "roomgraph/optimizer.hpp"
#include "roomgraph/plane_extraction.hpp"
#include "roomgraph/room_detection.hpp"
#include "roomgraph/sgraph.hpp"
#include "roomgraph/world.hpp"

namespace roomgraph {

struct AgentParams {
  int id = 0;
  DescriptorConfig descriptor;
  RegistrationConfig registration;
  PlaneExtractionConfig extraction;
  RoomDetectionConfig room_detection;
  AssociationConfig association;
  OptimizerConfig optimizer;
  NoiseModel noise;
  double keyframe_distance = 1.0;
  double keyframe_yaw = 30.0 * M_PI / 180.0;
  double plane_sigma_n = 0.02;
  double plane_sigma_d = 0.05;
  double room_sigma = 0.1;
  int optimize_every_keyframes = 6;
  int recent_plane_window = 12;
  bool exchange = true;
  uint64_t seed = 1;
};

/// One robot: builds its own graph from odometry + scans, publishes rooms,
/// and folds peer information in through its broker. All mutation happens on
/// the owning thread (single writer).
class Agent {
 public:
  explicit Agent(const AgentParams& params)
      : params_(params),
        broker_(params.id, params.descriptor, params.registration, params.association),
        rng_(params.seed) {
    graph_.agent_id = params.id;
  }

  AgentGraph& graph() { return graph_; }
  const AgentGraph& graph() const { return graph_; }
  Broker& broker() { return broker_; }
  const std::vector<Pose3>& keyframeTruth() const { return true_kf_poses_; }
  const std::vector<OptimizationReport>& optimizationReports() const { return opt_reports_; }

  BrokerMessage makeHello() {
    BrokerMessage m;
    m.type = MessageType::Hello;
    m.sender = params_.id;
    m.seq = next_seq_++;
    return m;
  }

  /// Advance one simulation step. `true_pose` is the ground-truth world pose
  /// (hidden from the estimator except through noisy odometry), `scan` the
  /// sensor-frame cloud at this pose. Returns messages to broadcast.
  std::vector<BrokerMessage> tick(const Pose3& true_pose, const PointCloud& scan) {
    std::vector<BrokerMessage> outgoing;

    if (!last_true_pose_) {
      last_true_pose_ = true_pose;
      makeKeyframe(Pose3::identity(), true_pose, scan, outgoing);
      return outgoing;
    }

    Pose3 true_delta = last_true_pose_->inverse().compose(true_pose);
    last_true_pose_ = true_pose;
    Pose3 noisy_delta = simulateOdometry(true_delta, params_.noise, rng_);
    pending_delta_ = pending_delta_.compose(noisy_delta);

    double travelled = pending_delta_.translation.norm();
    double turned = std::abs(Eigen::AngleAxisd(pending_delta_.rotation).angle());
    if (travelled >= params_.keyframe_distance || turned >= params_.keyframe_yaw) {
      makeKeyframe(pending_delta_, true_pose, scan, outgoing);
      pending_delta_ = Pose3::identity();
    }
    return outgoing;
  }

  /// Feed one received message through the broker; merges trigger an
  /// optimization pass. Returns replies to send.
  std::vector<BrokerMessage> handleIncoming(const BrokerMessage& msg) {
    std::vector<BrokerMessage> outgoing;
    bool merged = false;
    for (BrokerAction& action : broker_.handleMessage(graph_, msg)) {
      if (action.kind == BrokerAction::Reply && action.outgoing && !hello_sent_) {
        action.outgoing->seq = next_seq_++;
        outgoing.push_back(*action.outgoing);
        hello_sent_ = true;
      }
      if (action.kind == BrokerAction::Merged && !action.merge.empty()) merged = true;
    }
    if (merged) runOptimization();
    return outgoing;
  }

  void markHelloSent() { hello_sent_ = true; }

  /// Flush unpublished rooms and run a final optimization.
  std::vector<BrokerMessage> finish() {
    std::vector<BrokerMessage> outgoing;
    publishEligibleRooms(outgoing, true);
    runOptimization();
    return outgoing;
  }

  int censusRoomCount() const { return static_cast<int>(graph_.rooms.size()); }

 private:
  void makeKeyframe(const Pose3& odom_delta, const Pose3& true_pose, const PointCloud& scan,
                    std::vector<BrokerMessage>& outgoing) {
    if (scan.empty()) return;  // a blind tick cannot become a keyframe
    Matrix6d info = odometryInformation(
        std::max({params_.noise.odom_sigma_t.x(), params_.noise.odom_sigma_t.y(), 1e-3}),
        std::max(params_.noise.odom_sigma_yaw, 1e-3));
    int kf_id = addKeyframe(graph_, odom_delta, scan, info);
    true_kf_poses_.push_back(true_pose);
    if (kf_id == 0) addPosePrior(graph_, 0, graph_.keyframes.at(0).pose);

    const Keyframe& kf = graph_.keyframes.at(kf_id);
    mapPlanes(kf_id, kf);

    // room assignment for this keyframe
    Eigen::Vector2d pos(kf.pose.translation.x(), kf.pose.translation.y());
    if (auto rid = roomAt(graph_, pos)) {
      graph_.keyframes.at(kf_id).room_id = *rid;
      graph_.rooms.at(*rid).keyframe_ids.push_back(kf_id);
    }

    std::vector<int> recent;
    for (const auto& [pid, last_kf] : plane_last_seen_) {
      if (kf_id - last_kf <= params_.recent_plane_window) recent.push_back(pid);
    }
    if (auto rid = detectRoom(graph_, recent, params_.room_detection, params_.room_sigma)) {
      (void)rid;
    }

    ++keyframes_since_opt_;
    if (keyframes_since_opt_ >= params_.optimize_every_keyframes) runOptimization();

    publishEligibleRooms(outgoing, false);
  }

  void mapPlanes(int kf_id, const Keyframe& kf) {
    uint64_t seed = params_.seed * 1315423911u + static_cast<uint64_t>(kf_id) * 2654435761u;
    std::vector<ExtractedPlane> extracted = extractPlanes(kf.scan, params_.extraction, seed);
    Eigen::Vector3d info_diag(1.0 / (params_.plane_sigma_n * params_.plane_sigma_n),
                              1.0 / (params_.plane_sigma_n * params_.plane_sigma_n),
                              1.0 / (params_.plane_sigma_d * params_.plane_sigma_d));
    for (const ExtractedPlane& ep : extracted) {
      PlaneParam global = transformPlane(kf.pose, ep.plane);
      int plane_id;
      if (auto match = associatePlanes(graph_, global, params_.association)) {
        plane_id = *match;
        graph_.planes.at(plane_id).observation_count += 1;
      } else {
        PlaneVertex pv;
        pv.id = graph_.next_plane_id++;
        pv.plane = global;
        pv.observation_count = 1;
        plane_id = pv.id;
        graph_.planes.emplace(plane_id, pv);
      }
      FactorEdge f;
      f.kind = FactorKind::PosePlane;
      f.vertices = {kf_id, plane_id};
      f.plane_measurement = ep.plane;  // keyframe frame, oriented toward the sensor
      f.information = info_diag.asDiagonal();
      graph_.factors.push_back(std::move(f));
      plane_last_seen_[plane_id] = kf_id;
    }
  }

  void publishEligibleRooms(std::vector<BrokerMessage>& outgoing, bool flush) {
    if (!params_.exchange) return;
    const Keyframe* last = graph_.lastKeyframe();
    std::vector<int> ready;
    for (auto& [rid, room] : graph_.rooms) {
      if (room.provenance != Provenance::Local || room.published) continue;
      if (!flush && last) {
        Eigen::Vector2d pos(last->pose.translation.x(), last->pose.translation.y());
        if (roomContains(room, pos, 0.3)) continue;  // still inside: keep collecting
      }
      ready.push_back(rid);
    }
    if (ready.empty()) return;

    runOptimization();
    for (int rid : ready) {
      graph_.rooms.at(rid).published = true;
      auto [desc_msg, share_msg] = publishRoom(graph_, rid, params_.descriptor);
      desc_msg.seq = next_seq_++;
      share_msg.seq = next_seq_++;

      PointCloud down;
      RoomDescriptor rd = computeRoomDescriptor(graph_, rid, params_.descriptor, &down);
      broker_.addLocalRoom(rid, rd, down, graph_.rooms.at(rid).center);

      outgoing.push_back(std::move(desc_msg));
      outgoing.push_back(std::move(share_msg));
    }
    // a new local room may unblock alignment with already-stored peers
    bool merged = false;
    for (const BrokerAction& action : broker_.retryAlignments(graph_)) {
      if (action.kind == BrokerAction::Merged && !action.merge.empty()) merged = true;
    }
    if (merged) runOptimization();
  }

  void runOptimization() {
    if (graph_.keyframes.empty()) return;
    opt_reports_.push_back(optimize(graph_, params_.optimizer));
    keyframes_since_opt_ = 0;
  }

  AgentParams params_;
  AgentGraph graph_;
  Broker broker_;
  std::mt19937_64 rng_;
  std::optional<Pose3> last_true_pose_;
  Pose3 pending_delta_;
  std::vector<Pose3> true_kf_poses_;
  std::map<int, int> plane_last_seen_;
  std::vector<OptimizationReport> opt_reports_;
  int keyframes_since_opt_ = 0;
  uint64_t next_seq_ = 0;
  bool hello_sent_ = false;
};

}  // namespace roomgraph
