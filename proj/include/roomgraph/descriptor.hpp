#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "roomgraph/errors.hpp"
#include "roomgraph/sgraph.hpp"

namespace roomgraph {

struct DescriptorConfig {
  int rings = 10;
  int sectors = 60;
  double max_radius = 8.0;
  double downsample_voxel = 0.1;
  double match_threshold = 0.25;  // tau_sc
};

/// Union of a room's keyframe scans expressed in the room frame (origin at
/// the room center, axes parallel to the map axes).
struct RoomKeyframe {
  int room_id = 0;
  PointCloud cloud;
  int source_keyframes = 0;
};

struct RoomDescriptor {
  Eigen::MatrixXd matrix;  // rings x sectors, max point height per bin
  int room_id = 0;
  int agent_id = 0;
  double max_radius = 8.0;
};

struct MatchCandidate {
  int local_room_id = 0;
  int remote_agent_id = 0;
  int remote_room_id = 0;
  double distance = 1.0;
  int shift = 0;  // columns the remote descriptor is rotated by, in [0, sectors)
};

inline RoomKeyframe assembleRoomKeyframe(const AgentGraph& graph, int room_id) {
  auto it = graph.rooms.find(room_id);
  if (it == graph.rooms.end() || it->second.keyframe_ids.empty()) {
    throw EmptyRoomError(room_id);
  }
  const Room& room = it->second;
  Eigen::Vector3d origin(room.center.x(), room.center.y(), 0.0);

  RoomKeyframe out;
  out.room_id = room_id;
  for (int kid : room.keyframe_ids) {
    const Keyframe& kf = graph.keyframes.at(kid);
    for (const Eigen::Vector3d& p : kf.scan) {
      out.cloud.push_back(kf.pose.apply(p) - origin);
    }
    ++out.source_keyframes;
  }
  return out;
}

/// Centroid-per-occupied-voxel downsampling. Output is ordered by voxel
/// index so repeated runs produce identical clouds.
inline PointCloud voxelDownsample(const PointCloud& cloud, double voxel) {
  struct Acc {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    int n = 0;
  };
  std::map<std::tuple<int64_t, int64_t, int64_t>, Acc> grid;
  for (const Eigen::Vector3d& p : cloud) {
    auto key = std::make_tuple(static_cast<int64_t>(std::floor(p.x() / voxel)),
                               static_cast<int64_t>(std::floor(p.y() / voxel)),
                               static_cast<int64_t>(std::floor(p.z() / voxel)));
    Acc& a = grid[key];
    a.sum += p;
    a.n += 1;
  }
  PointCloud out;
  out.reserve(grid.size());
  for (const auto& [key, acc] : grid) out.push_back(acc.sum / acc.n);
  return out;
}

/// Ring x sector max-height image of a cloud around its frame origin.
/// Points at radius >= max_radius are ignored; empty bins stay 0.
inline Eigen::MatrixXd scanContext(const PointCloud& cloud, int rings, int sectors,
                                   double max_radius) {
  Eigen::MatrixXd desc = Eigen::MatrixXd::Zero(rings, sectors);
  for (const Eigen::Vector3d& p : cloud) {
    double rho = std::hypot(p.x(), p.y());
    if (rho >= max_radius) continue;
    int ring = std::min(static_cast<int>(std::floor(rho * rings / max_radius)), rings - 1);
    double theta = std::atan2(p.y(), p.x());
    if (theta < 0.0) theta += 2.0 * M_PI;
    int sector = std::min(static_cast<int>(std::floor(theta * sectors / (2.0 * M_PI))),
                          sectors - 1);
    desc(ring, sector) = std::max(desc(ring, sector), p.z());
  }
  return desc;
}

struct DescriptorDistance {
  double distance = 0.0;
  int shift = 0;
};

/// Min over cyclic column shifts of the mean per-column cosine distance.
/// Column pairs that are both empty are skipped; a column empty on one side
/// only counts as maximally dissimilar.
inline DescriptorDistance scDistance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatchError();
  const int n = static_cast<int>(a.cols());

  std::vector<double> norm_a(n), norm_b(n);
  for (int j = 0; j < n; ++j) {
    norm_a[j] = a.col(j).norm();
    norm_b[j] = b.col(j).norm();
  }
  bool a_zero = std::all_of(norm_a.begin(), norm_a.end(), [](double x) { return x == 0.0; });
  bool b_zero = std::all_of(norm_b.begin(), norm_b.end(), [](double x) { return x == 0.0; });
  if (a_zero && b_zero) return {0.0, 0};

  DescriptorDistance best{std::numeric_limits<double>::infinity(), 0};
  for (int k = 0; k < n; ++k) {
    double sum = 0.0;
    int cols = 0;
    for (int j = 0; j < n; ++j) {
      int jb = (j - k % n + n) % n;
      if (norm_a[j] == 0.0 && norm_b[jb] == 0.0) continue;
      double sim = 0.0;
      if (norm_a[j] > 0.0 && norm_b[jb] > 0.0) {
        // heights are non-negative, so the true similarity is in [0, 1];
        // clamping keeps rounding from pushing the distance negative, and
        // identical columns count as exactly similar
        if (a.col(j) == b.col(jb)) {
          sim = 1.0;
        } else {
          sim = std::clamp(a.col(j).dot(b.col(jb)) / (norm_a[j] * norm_b[jb]), 0.0, 1.0);
        }
      }
      sum += 1.0 - sim;
      ++cols;
    }
    double dist = cols > 0 ? sum / cols : 1.0;
    if (dist < best.distance) {
      best.distance = dist;
      best.shift = k;
    }
  }
  return best;
}

/// Descriptors of the local rooms, keyed by room id.
using LocalDescriptorStore = std::map<int, RoomDescriptor>;

/// Minimum-distance match of an incoming remote descriptor against the
/// local store; empty optional when nothing beats the threshold.
inline std::optional<MatchCandidate> matchDescriptor(const LocalDescriptorStore& store,
                                                     const RoomDescriptor& incoming,
                                                     double threshold) {
  std::optional<MatchCandidate> best;
  for (const auto& [room_id, local] : store) {
    DescriptorDistance d = scDistance(local.matrix, incoming.matrix);
    if (d.distance < threshold && (!best || d.distance < best->distance)) {
      MatchCandidate c;
      c.local_room_id = room_id;
      c.remote_agent_id = incoming.agent_id;
      c.remote_room_id = incoming.room_id;
      c.distance = d.distance;
      c.shift = d.shift;
      best = c;
    }
  }
  return best;
}

}  // namespace roomgraph
