#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

#include "roomgraph/errors.hpp"
#include "roomgraph/sgraph.hpp"

namespace roomgraph {

struct RoomDetectionConfig {
  double min_width = 1.5;
  double max_width = 15.0;
  double antiparallel_dot = -0.9;   // oriented normals of a wall pair
  double max_pair_alignment = 0.3;  // |cos| between the two pair axes
  double max_vertical_component = 0.3;
  int min_enclosed_keyframes = 3;
  double dedup_center_dist = 1.0;
};

/// Midpoint of two near-antiparallel oriented plane pairs, projected to the
/// floor. Planes are expected oriented toward the room interior, ordered
/// as {pair1_a, pair1_b, pair2_a, pair2_b}.
inline Eigen::Vector2d computeRoomCenter(const std::array<PlaneParam, 4>& planes) {
  // Greedy antiparallel pairing of plane 0, remaining two must also pair.
  int partner = -1;
  for (int i = 1; i < 4; ++i) {
    if (planes[0].normal.dot(planes[i].normal) < -0.9) {
      if (partner >= 0) throw DegeneratePlanesError("ambiguous antiparallel pairing");
      partner = i;
    }
  }
  if (partner < 0) throw DegeneratePlanesError("no antiparallel partner for first plane");
  std::array<int, 2> others{};
  int k = 0;
  for (int i = 1; i < 4; ++i) {
    if (i != partner) others[k++] = i;
  }
  if (planes[others[0]].normal.dot(planes[others[1]].normal) >= -0.9) {
    throw DegeneratePlanesError("second pair is not antiparallel");
  }

  auto contribution = [](const PlaneParam& a, const PlaneParam& b) -> Eigen::Vector3d {
    return a.normal * (a.d - b.d) * 0.5;
  };
  Eigen::Vector3d c =
      contribution(planes[0], planes[partner]) + contribution(planes[others[0]], planes[others[1]]);
  return Eigen::Vector2d(c.x(), c.y());
}

namespace detail {

struct WallPair {
  int a = -1, b = -1;       // plane vertex ids
  Eigen::Vector2d axis;     // unit, floor projection of the pair normal
  double midline = 0.0;     // axis . x = midline on the mid plane
  double width = 0.0;
};

inline std::optional<WallPair> makePair(const PlaneVertex& pa, const PlaneVertex& pb,
                                        const RoomDetectionConfig& cfg) {
  double dot = pa.plane.normal.dot(pb.plane.normal);
  double width, mid;
  if (dot > -cfg.antiparallel_dot) {  // same canonical direction
    width = std::abs(pa.plane.d - pb.plane.d);
    mid = 0.5 * (pa.plane.d + pb.plane.d);
  } else if (dot < cfg.antiparallel_dot) {  // opposite canonical direction
    width = std::abs(pa.plane.d + pb.plane.d);
    mid = 0.5 * (pa.plane.d - pb.plane.d);
  } else {
    return std::nullopt;
  }
  if (width < cfg.min_width || width > cfg.max_width) return std::nullopt;
  Eigen::Vector2d axis(pa.plane.normal.x(), pa.plane.normal.y());
  double n = axis.norm();
  if (n < 0.5) return std::nullopt;
  WallPair wp;
  wp.a = pa.id;
  wp.b = pb.id;
  wp.axis = axis / n;
  wp.midline = mid / n;
  wp.width = width;
  return wp;
}

}  // namespace detail

/// Search the recently observed planes for two overlapping antiparallel wall
/// pairs enclosing keyframes; on success the room is added to the graph with
/// a room-plane factor and the enclosed keyframes are assigned to it.
inline std::optional<int> detectRoom(AgentGraph& graph, const std::vector<int>& recent_plane_ids,
                                     const RoomDetectionConfig& cfg = {},
                                     double room_sigma = 0.1) {
  std::vector<const PlaneVertex*> candidates;
  for (int id : recent_plane_ids) {
    auto it = graph.planes.find(id);
    if (it == graph.planes.end()) continue;
    if (std::abs(it->second.plane.normal.z()) > cfg.max_vertical_component) continue;
    if (it->second.provenance != Provenance::Local) continue;
    candidates.push_back(&it->second);
  }
  if (candidates.size() < 4) return std::nullopt;

  // keyframe ids observing each plane (from pose-plane factors)
  std::map<int, std::set<int>> observers;
  for (const FactorEdge& f : graph.factors) {
    if (f.kind == FactorKind::PosePlane) observers[f.vertices[1]].insert(f.vertices[0]);
  }

  std::vector<detail::WallPair> pairs;
  for (size_t i = 0; i < candidates.size(); ++i) {
    for (size_t j = i + 1; j < candidates.size(); ++j) {
      if (auto p = detail::makePair(*candidates[i], *candidates[j], cfg)) pairs.push_back(*p);
    }
  }

  for (size_t i = 0; i < pairs.size(); ++i) {
    for (size_t j = i + 1; j < pairs.size(); ++j) {
      const auto& p1 = pairs[i];
      const auto& p2 = pairs[j];
      if (std::abs(p1.axis.dot(p2.axis)) > cfg.max_pair_alignment) continue;
      std::set<int> ids{p1.a, p1.b, p2.a, p2.b};
      if (ids.size() != 4) continue;

      Eigen::Matrix2d m;
      m.row(0) = p1.axis.transpose();
      m.row(1) = p2.axis.transpose();
      Eigen::Vector2d center = m.colPivHouseholderQr().solve(Eigen::Vector2d(p1.midline,
                                                                             p2.midline));
      Eigen::Vector3d center3(center.x(), center.y(), 0.0);

      std::array<int, 4> plane_ids{p1.a, p1.b, p2.a, p2.b};
      std::array<PlaneParam, 4> oriented;
      for (int k = 0; k < 4; ++k) {
        oriented[k] = orientToward(graph.planes.at(plane_ids[k]).plane, center3);
      }
      Eigen::Vector2d refined;
      try {
        refined = computeRoomCenter(oriented);
      } catch (const DegeneratePlanesError&) {
        continue;
      }

      Room room;
      room.center = refined;
      room.plane_ids = plane_ids;
      room.axes = {p1.axis, p2.axis};
      room.widths = {p1.width, p2.width};

      // enclosure: keyframes inside the rectangle, slightly shrunk
      std::vector<int> enclosed;
      for (const auto& [kid, kf] : graph.keyframes) {
        Eigen::Vector2d pos(kf.pose.translation.x(), kf.pose.translation.y());
        if (roomContains(room, pos, -0.2)) enclosed.push_back(kid);
      }
      if (static_cast<int>(enclosed.size()) < cfg.min_enclosed_keyframes) continue;

      // every wall must have been seen from inside the room
      bool all_observed = true;
      for (int pid : plane_ids) {
        bool seen = false;
        for (int kid : enclosed) {
          if (observers[pid].count(kid)) {
            seen = true;
            break;
          }
        }
        if (!seen) {
          all_observed = false;
          break;
        }
      }
      if (!all_observed) continue;

      // dedup against existing rooms
      bool duplicate = false;
      for (const auto& [rid, existing] : graph.rooms) {
        if ((existing.center - refined).norm() < cfg.dedup_center_dist) {
          duplicate = true;
          break;
        }
        int shared = 0;
        for (int pid : plane_ids) {
          if (std::find(existing.plane_ids.begin(), existing.plane_ids.end(), pid) !=
              existing.plane_ids.end()) {
            ++shared;
          }
        }
        if (shared >= 3) {
          duplicate = true;
          break;
        }
      }
      if (duplicate) continue;

      room.id = graph.next_room_id++;
      for (int kid : enclosed) {
        if (!graph.keyframes.at(kid).room_id) {
          graph.keyframes.at(kid).room_id = room.id;
          room.keyframe_ids.push_back(kid);
        }
      }
      if (room.keyframe_ids.empty()) {
        graph.next_room_id--;
        continue;
      }

      FactorEdge f;
      f.kind = FactorKind::RoomPlane;
      f.vertices = {room.id, plane_ids[0], plane_ids[1], plane_ids[2], plane_ids[3]};
      f.information = Eigen::Matrix2d::Identity() / (room_sigma * room_sigma);
      graph.factors.push_back(std::move(f));

      int rid = room.id;
      graph.rooms.emplace(rid, std::move(room));
      recomputeFloor(graph);
      return rid;
    }
  }
  return std::nullopt;
}

/// Assign an existing room to a keyframe position, if any contains it.
inline std::optional<int> roomAt(const AgentGraph& graph, const Eigen::Vector2d& pos) {
  for (const auto& [rid, room] : graph.rooms) {
    if (room.provenance == Provenance::Local && roomContains(room, pos, -0.1)) return rid;
  }
  return std::nullopt;
}

}  // namespace roomgraph
