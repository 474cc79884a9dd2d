#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "roomgraph/descriptor.hpp"
#include "roomgraph/errors.hpp"
#include "roomgraph/registration.hpp"
#include "roomgraph/sgraph.hpp"
#include "roomgraph/wire.hpp"

namespace roomgraph {

struct AssociationConfig {
  double max_normal_angle = 10.0 * M_PI / 180.0;  // theta_a
  double max_d_difference = 0.35;                 // delta_d, meters
  double max_room_center_dist = 1.0;              // r_d, meters
  double equality_sigma_n = 0.01;
  double equality_sigma_d = 0.02;
  double equality_sigma_room = 0.05;
};

struct MergeReport {
  int planes_added = 0;
  int planes_associated = 0;
  int rooms_added = 0;
  int rooms_associated = 0;
  int edges_added = 0;

  bool empty() const {
    return planes_added == 0 && planes_associated == 0 && rooms_added == 0 &&
           rooms_associated == 0 && edges_added == 0;
  }
};

/// Everything known about one remote agent.
struct PeerState {
  int remote_id = -1;
  bool hello_seen = false;
  bool hello_replied = false;
  std::set<uint64_t> seen_seqs;
  std::map<int, RoomDescPayload> descriptors;  // by remote room id
  std::optional<InterAgentTransform> transform;
  std::deque<GraphSharePayload> buffered_shares;
  std::map<int, int> room_id_map;   // remote -> local vertex id
  std::map<int, int> plane_id_map;  // remote -> local vertex id
  MergeReport merged_total;
};

struct BrokerAction {
  enum Kind { PeerRegistered, Reply, Stored, AlignmentAccepted, AlignmentRejected, Merged,
              Buffered } kind;
  int peer = -1;
  MergeReport merge;
  std::optional<BrokerMessage> outgoing;
};

// Eq. 3: rooms move by plain left composition.
inline Pose3 transformRoom(const Pose3& inter_agent, const Pose3& room_pose) {
  return inter_agent.compose(room_pose);
}

/// Nearest compatible local plane: normal angle within theta_a, |d|
/// difference within delta_d, closest d wins ties.
inline std::optional<int> associatePlanes(const AgentGraph& graph, const PlaneParam& external,
                                          const AssociationConfig& cfg) {
  std::optional<int> best;
  double best_dd = cfg.max_d_difference;
  for (const auto& [id, pv] : graph.planes) {
    if (pv.provenance != Provenance::Local) continue;
    if (angleBetweenNormals(pv.plane.normal, external.normal) > cfg.max_normal_angle) continue;
    double dd = std::abs(pv.plane.d - external.d);
    if (dd < best_dd) {
      best_dd = dd;
      best = id;
    }
  }
  return best;
}

inline std::optional<int> associateRooms(const AgentGraph& graph, const Eigen::Vector2d& center,
                                         const AssociationConfig& cfg) {
  std::optional<int> best;
  double best_dist = cfg.max_room_center_dist;
  for (const auto& [id, room] : graph.rooms) {
    if (room.provenance != Provenance::Local) continue;
    double dist = (room.center - center).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best = id;
    }
  }
  return best;
}

/// Transform external vertices into the local frame (Eq. 3-5), associate
/// them against local vertices, and add the rest as provenance-tagged fixed
/// vertices. Re-delivery is a no-op thanks to the id maps.
inline MergeReport mergeExternal(AgentGraph& graph, PeerState& peer,
                                 const GraphSharePayload& shared, const AssociationConfig& cfg) {
  if (!peer.transform) throw MissingTransformError(peer.remote_id);
  const Pose3& t = peer.transform->transform;
  MergeReport report;

  for (const SharedPlane& sp : shared.planes) {
    if (peer.plane_id_map.count(sp.id)) continue;
    PlaneParam local_frame = transformPlane(t, PlaneParam(sp.normal, sp.d));
    if (auto match = associatePlanes(graph, local_frame, cfg)) {
      FactorEdge f;
      f.kind = FactorKind::PlaneEquality;
      f.vertices = {*match};
      f.plane_measurement = local_frame;
      Eigen::Vector3d diag(1.0 / (cfg.equality_sigma_n * cfg.equality_sigma_n),
                           1.0 / (cfg.equality_sigma_n * cfg.equality_sigma_n),
                           1.0 / (cfg.equality_sigma_d * cfg.equality_sigma_d));
      f.information = diag.asDiagonal();
      graph.factors.push_back(std::move(f));
      peer.plane_id_map[sp.id] = *match;
      ++report.planes_associated;
    } else {
      PlaneVertex pv;
      pv.id = graph.next_plane_id++;
      pv.plane = local_frame;
      pv.provenance = Provenance::External;
      pv.source_agent = peer.remote_id;
      peer.plane_id_map[sp.id] = pv.id;
      graph.planes.emplace(pv.id, pv);
      ++report.planes_added;
    }
  }

  for (const SharedRoom& sr : shared.rooms) {
    if (peer.room_id_map.count(sr.id)) continue;
    Pose3 local_pose = transformRoom(t, sr.pose);
    Eigen::Vector2d center(local_pose.translation.x(), local_pose.translation.y());
    if (auto match = associateRooms(graph, center, cfg)) {
      FactorEdge f;
      f.kind = FactorKind::RoomEquality;
      f.vertices = {*match};
      f.room_measurement = center;
      f.information =
          Eigen::Matrix2d::Identity() / (cfg.equality_sigma_room * cfg.equality_sigma_room);
      graph.factors.push_back(std::move(f));
      peer.room_id_map[sr.id] = *match;
      ++report.rooms_associated;
    } else {
      Room room;
      room.id = graph.next_room_id++;
      room.center = center;
      room.yaw = local_pose.yaw();
      room.provenance = Provenance::External;
      room.source_agent = peer.remote_id;
      peer.room_id_map[sr.id] = room.id;
      int rid = room.id;
      graph.rooms.emplace(rid, std::move(room));
      ++report.rooms_added;
    }
  }

  // room-plane edges become factors for rooms that arrived as new vertices
  std::map<int, std::vector<int>> edges_by_room;
  for (const auto& [room_id, plane_id] : shared.edges) {
    edges_by_room[room_id].push_back(plane_id);
  }
  for (const auto& [remote_room, remote_planes] : edges_by_room) {
    auto rit = peer.room_id_map.find(remote_room);
    if (rit == peer.room_id_map.end()) continue;
    Room& room = graph.rooms.at(rit->second);
    if (room.provenance != Provenance::External || room.source_agent != peer.remote_id) continue;
    if (remote_planes.size() != 4) continue;
    std::array<int, 4> locals{};
    bool complete = true;
    for (int k = 0; k < 4; ++k) {
      auto pit = peer.plane_id_map.find(remote_planes[k]);
      if (pit == peer.plane_id_map.end()) {
        complete = false;
        break;
      }
      locals[k] = pit->second;
    }
    if (!complete || room.plane_ids[0] >= 0) continue;
    room.plane_ids = locals;
    FactorEdge f;
    f.kind = FactorKind::RoomPlane;
    f.vertices = {room.id, locals[0], locals[1], locals[2], locals[3]};
    f.information = Eigen::Matrix2d::Identity() / 0.01;
    graph.factors.push_back(std::move(f));
    ++report.edges_added;
  }

  if (!report.empty()) recomputeFloor(graph);
  peer.merged_total.planes_added += report.planes_added;
  peer.merged_total.planes_associated += report.planes_associated;
  peer.merged_total.rooms_added += report.rooms_added;
  peer.merged_total.rooms_associated += report.rooms_associated;
  peer.merged_total.edges_added += report.edges_added;
  return report;
}

/// Per-agent broker: stores peer descriptors, runs the two-step alignment
/// (descriptor match, then fine registration), and merges shared vertices.
class Broker {
 public:
  Broker() = default;
  Broker(int agent_id, DescriptorConfig desc_cfg, RegistrationConfig reg_cfg,
         AssociationConfig assoc_cfg)
      : agent_id_(agent_id), desc_(desc_cfg), reg_(reg_cfg), assoc_(assoc_cfg) {}

  /// Register a local room's published descriptor so incoming peers can be
  /// matched against it.
  void addLocalRoom(int room_id, const RoomDescriptor& descriptor, const PointCloud& room_cloud,
                    const Eigen::Vector2d& center) {
    local_store_[room_id] = descriptor;
    local_grids_[room_id] = buildVoxelGaussians(room_cloud, reg_.voxel, reg_.cov_eigen_floor);
    local_centers_[room_id] = center;
  }

  const LocalDescriptorStore& localStore() const { return local_store_; }
  std::map<int, PeerState>& peers() { return peers_; }
  const std::map<int, PeerState>& peers() const { return peers_; }

  std::optional<InterAgentTransform> transformFor(int peer) const {
    auto it = peers_.find(peer);
    if (it == peers_.end()) return std::nullopt;
    return it->second.transform;
  }

  /// Broker state machine. HELLO registers the peer, ROOM_DESC attempts the
  /// two-step alignment, GRAPH_SHARE merges or buffers. Returns the actions
  /// taken; outgoing replies are carried in the actions for the caller to
  /// send.
  std::vector<BrokerAction> handleMessage(AgentGraph& graph, const BrokerMessage& msg) {
    std::vector<BrokerAction> actions;
    if (msg.sender == agent_id_) return actions;

    if (msg.type == MessageType::Hello && msg.seq != 0) {
      throw ProtocolViolationError("HELLO must be the first message a peer sends (seq 0)");
    }

    PeerState& peer = peers_[msg.sender];
    if (peer.remote_id < 0) {
      peer.remote_id = msg.sender;
      actions.push_back({BrokerAction::PeerRegistered, msg.sender, {}, std::nullopt});
    }
    if (!peer.seen_seqs.insert(msg.seq).second) return actions;  // duplicate delivery

    switch (msg.type) {
      case MessageType::Hello: {
        peer.hello_seen = true;
        if (!peer.hello_replied) {
          peer.hello_replied = true;
          BrokerMessage reply;
          reply.type = MessageType::Hello;
          reply.sender = agent_id_;
          actions.push_back({BrokerAction::Reply, msg.sender, {}, reply});
        }
        break;
      }
      case MessageType::RoomDesc: {
        peer.descriptors[msg.room_desc.room_id] = msg.room_desc;
        actions.push_back({BrokerAction::Stored, msg.sender, {}, std::nullopt});
        attemptAlignment(graph, peer, msg.room_desc, actions);
        break;
      }
      case MessageType::GraphShare: {
        if (peer.transform) {
          MergeReport r = mergeExternal(graph, peer, msg.graph_share, assoc_);
          actions.push_back({BrokerAction::Merged, msg.sender, r, std::nullopt});
        } else {
          peer.buffered_shares.push_back(msg.graph_share);
          actions.push_back({BrokerAction::Buffered, msg.sender, {}, std::nullopt});
        }
        break;
      }
      case MessageType::Ack:
        break;
    }
    return actions;
  }

  /// Re-run descriptor matching for peers still lacking a transform, e.g.
  /// after a new local room entered the store.
  std::vector<BrokerAction> retryAlignments(AgentGraph& graph) {
    std::vector<BrokerAction> actions;
    for (auto& [id, peer] : peers_) {
      if (peer.transform) continue;
      for (const auto& [rid, desc] : peer.descriptors) {
        attemptAlignment(graph, peer, desc, actions);
        if (peer.transform) break;
      }
    }
    return actions;
  }

 private:
  void attemptAlignment(AgentGraph& graph, PeerState& peer, const RoomDescPayload& desc,
                        std::vector<BrokerAction>& actions) {
    RoomDescriptor incoming;
    incoming.matrix = mmToMatrix(desc.matrix_mm, desc.rings, desc.sectors);
    incoming.room_id = desc.room_id;
    incoming.agent_id = peer.remote_id;
    incoming.max_radius = desc.max_radius;

    auto match = matchDescriptor(local_store_, incoming, desc_.match_threshold);
    if (!match) return;

    const VoxelGaussianGrid& grid = local_grids_.at(match->local_room_id);
    PointCloud source = mmToCloud(desc.cloud_mm);
    Pose3 init = seedInitialGuess(*match, desc_.sectors);

    AlignmentResult result;
    try {
      result = vgicpAlign(source, grid, init, reg_);
    } catch (const NoOverlapError&) {
      actions.push_back({BrokerAction::AlignmentRejected, peer.remote_id, {}, std::nullopt});
      return;
    }

    auto lifted = validateAndLift(result, agent_id_, peer.remote_id,
                                  local_centers_.at(match->local_room_id), match->local_room_id,
                                  desc.room_pose, desc.room_id, reg_);
    if (!lifted) {
      actions.push_back({BrokerAction::AlignmentRejected, peer.remote_id, {}, std::nullopt});
      return;
    }

    if (!peer.transform) {
      peer.transform = *lifted;
    } else {
      refineTransform(*peer.transform, *lifted);
    }
    actions.push_back({BrokerAction::AlignmentAccepted, peer.remote_id, {}, std::nullopt});

    while (!peer.buffered_shares.empty()) {
      GraphSharePayload shared = peer.buffered_shares.front();
      peer.buffered_shares.pop_front();
      MergeReport r = mergeExternal(graph, peer, shared, assoc_);
      actions.push_back({BrokerAction::Merged, peer.remote_id, r, std::nullopt});
    }
  }

  int agent_id_ = 0;
  DescriptorConfig desc_;
  RegistrationConfig reg_;
  AssociationConfig assoc_;
  LocalDescriptorStore local_store_;
  std::map<int, VoxelGaussianGrid> local_grids_;
  std::map<int, Eigen::Vector2d> local_centers_;
  std::map<int, PeerState> peers_;
};

/// Build the outgoing ROOM_DESC and GRAPH_SHARE for a freshly completed
/// room. The ROOM_DESC carries the descriptor plus the downsampled room
/// keyframe cloud needed by peers for fine alignment; raw keyframe scans are
/// never shared.
inline std::pair<BrokerMessage, BrokerMessage> publishRoom(const AgentGraph& graph, int room_id,
                                                           const DescriptorConfig& cfg) {
  const Room& room = graph.rooms.at(room_id);
  RoomKeyframe rk = assembleRoomKeyframe(graph, room_id);
  PointCloud down = voxelDownsample(rk.cloud, cfg.downsample_voxel);
  Eigen::MatrixXd desc = scanContext(down, cfg.rings, cfg.sectors, cfg.max_radius);

  BrokerMessage room_desc;
  room_desc.type = MessageType::RoomDesc;
  room_desc.sender = graph.agent_id;
  room_desc.room_desc.room_id = room_id;
  room_desc.room_desc.room_pose =
      Pose3(Eigen::Quaterniond::Identity(),
            Eigen::Vector3d(room.center.x(), room.center.y(), 0.0));
  room_desc.room_desc.rings = cfg.rings;
  room_desc.room_desc.sectors = cfg.sectors;
  room_desc.room_desc.max_radius = cfg.max_radius;
  room_desc.room_desc.matrix_mm = matrixToMm(desc);
  room_desc.room_desc.cloud_mm = cloudToMm(down);

  BrokerMessage share;
  share.type = MessageType::GraphShare;
  share.sender = graph.agent_id;
  share.graph_share.rooms.push_back({room_id, room_desc.room_desc.room_pose});
  for (int pid : room.plane_ids) {
    const PlaneVertex& pv = graph.planes.at(pid);
    share.graph_share.planes.push_back({pid, pv.plane.normal, pv.plane.d});
    share.graph_share.edges.emplace_back(room_id, pid);
  }
  return {room_desc, share};
}

/// Local descriptor + cloud registration entry for the broker, computed the
/// same way as the published messages.
inline RoomDescriptor computeRoomDescriptor(const AgentGraph& graph, int room_id,
                                            const DescriptorConfig& cfg, PointCloud* down_out) {
  RoomKeyframe rk = assembleRoomKeyframe(graph, room_id);
  PointCloud down = voxelDownsample(rk.cloud, cfg.downsample_voxel);
  RoomDescriptor rd;
  rd.matrix = scanContext(down, cfg.rings, cfg.sectors, cfg.max_radius);
  rd.room_id = room_id;
  rd.agent_id = graph.agent_id;
  rd.max_radius = cfg.max_radius;
  if (down_out) *down_out = std::move(down);
  return rd;
}

}  // namespace roomgraph
