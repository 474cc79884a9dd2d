#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "roomgraph/errors.hpp"
#include "roomgraph/geometry.hpp"

namespace roomgraph {

struct RoomRect {
  int id = 0;
  Eigen::Vector2d center{0.0, 0.0};
  double half_w = 2.0;  // along local x
  double half_d = 2.0;  // along local y
  double yaw = 0.0;
  bool corridor = false;
};

/// Axis-aligned opening cut out of every wall it intersects. `a` and `b`
/// are the ids of the spaces it connects (rooms or corridors).
struct Door {
  Eigen::Vector2d center{0.0, 0.0};
  double half_w = 0.6;
  double half_d = 0.5;
  int a = -1;
  int b = -1;
};

/// Box obstacle inside a room; produces vertical wall returns up to
/// `height`, standing on the floor.
struct ClutterBox {
  Eigen::Vector2d center{0.0, 0.0};
  double half_x = 0.4;
  double half_y = 0.4;
  double height = 1.2;
};

struct Floorplan {
  std::vector<RoomRect> rooms;      // corridors carry corridor = true
  std::vector<Door> doors;
  std::vector<ClutterBox> clutter;
  double wall_height = 3.0;
};

struct WallSegment {
  Eigen::Vector2d p1{0.0, 0.0};
  Eigen::Vector2d p2{0.0, 0.0};
  double z_max = 3.0;
};

struct LidarConfig {
  int rings = 16;
  double elevation_min = -15.0 * M_PI / 180.0;
  double elevation_max = 15.0 * M_PI / 180.0;
  int azimuth_steps = 360;
  double max_range = 30.0;
  double range_sigma = 0.0;
  bool floor_returns = false;
};

struct NoiseModel {
  Eigen::Vector3d odom_sigma_t{0.0, 0.0, 0.0};  // per-axis, per step
  double odom_sigma_yaw = 0.0;                  // radians per step
  double range_sigma = 0.0;
};

namespace detail {

inline std::array<Eigen::Vector2d, 4> rectCorners(const RoomRect& r) {
  Eigen::Rotation2Dd rot(r.yaw);
  std::array<Eigen::Vector2d, 4> c;
  c[0] = r.center + rot * Eigen::Vector2d(-r.half_w, -r.half_d);
  c[1] = r.center + rot * Eigen::Vector2d(r.half_w, -r.half_d);
  c[2] = r.center + rot * Eigen::Vector2d(r.half_w, r.half_d);
  c[3] = r.center + rot * Eigen::Vector2d(-r.half_w, r.half_d);
  return c;
}

inline bool insideDoor(const Door& d, const Eigen::Vector2d& p, double margin = 0.0) {
  return std::abs(p.x() - d.center.x()) <= d.half_w + margin &&
         std::abs(p.y() - d.center.y()) <= d.half_d + margin;
}

inline bool insideRect(const RoomRect& r, const Eigen::Vector2d& p, double margin = 0.0) {
  Eigen::Vector2d rel = Eigen::Rotation2Dd(-r.yaw) * (p - r.center);
  return std::abs(rel.x()) <= r.half_w + margin && std::abs(rel.y()) <= r.half_d + margin;
}

inline bool insideClutter(const ClutterBox& c, const Eigen::Vector2d& p, double margin = 0.0) {
  return std::abs(p.x() - c.center.x()) <= c.half_x + margin &&
         std::abs(p.y() - c.center.y()) <= c.half_y + margin;
}

// Clip one wall edge against the door openings, keeping solid sub-segments.
inline void appendClipped(std::vector<WallSegment>& out, const Eigen::Vector2d& a,
                          const Eigen::Vector2d& b, double z_max,
                          const std::vector<Door>& doors) {
  struct Interval {
    double lo, hi;
  };
  std::vector<Interval> holes;
  Eigen::Vector2d dir = b - a;
  double len = dir.norm();
  if (len < 1e-9) return;
  dir /= len;
  for (const Door& d : doors) {
    // Exact slab intersection of the segment with the axis-aligned door box.
    double lo = 0.0, hi = len;
    bool empty = false;
    for (int axis = 0; axis < 2 && !empty; ++axis) {
      double o = a[axis], v = dir[axis];
      double bmin = d.center[axis] - (axis == 0 ? d.half_w : d.half_d);
      double bmax = d.center[axis] + (axis == 0 ? d.half_w : d.half_d);
      if (std::abs(v) < 1e-12) {
        if (o < bmin - 1e-9 || o > bmax + 1e-9) empty = true;
        continue;
      }
      double t1 = (bmin - o) / v;
      double t2 = (bmax - o) / v;
      if (t1 > t2) std::swap(t1, t2);
      lo = std::max(lo, t1);
      hi = std::min(hi, t2);
      if (lo >= hi) empty = true;
    }
    if (!empty && hi > lo) holes.push_back({lo, hi});
  }
  std::sort(holes.begin(), holes.end(), [](auto& x, auto& y) { return x.lo < y.lo; });
  double cursor = 0.0;
  auto emit = [&](double lo, double hi) {
    if (hi - lo > 0.05) out.push_back({a + lo * dir, a + hi * dir, z_max});
  };
  for (const Interval& h : holes) {
    if (h.lo > cursor) emit(cursor, h.lo);
    cursor = std::max(cursor, h.hi);
  }
  if (cursor < len) emit(cursor, len);
}

}  // namespace detail

/// Expand the plan into ray-cast targets: room/corridor walls (clipped by
/// doors) plus clutter box faces.
inline std::vector<WallSegment> wallSegments(const Floorplan& plan) {
  std::vector<WallSegment> segs;
  for (const RoomRect& r : plan.rooms) {
    auto c = detail::rectCorners(r);
    for (int i = 0; i < 4; ++i) {
      detail::appendClipped(segs, c[i], c[(i + 1) % 4], plan.wall_height, plan.doors);
    }
  }
  for (const ClutterBox& b : plan.clutter) {
    RoomRect rect;
    rect.center = b.center;
    rect.half_w = b.half_x;
    rect.half_d = b.half_y;
    auto c = detail::rectCorners(rect);
    for (int i = 0; i < 4; ++i) segs.push_back({c[i], c[(i + 1) % 4], b.height});
  }
  return segs;
}

inline bool inFreeSpace(const Floorplan& plan, const Eigen::Vector2d& p) {
  bool inside = false;
  for (const RoomRect& r : plan.rooms) {
    if (detail::insideRect(r, p, -1e-6)) {
      inside = true;
      break;
    }
  }
  if (!inside) {
    for (const Door& d : plan.doors) {
      if (detail::insideDoor(d, p)) {
        inside = true;
        break;
      }
    }
  }
  if (!inside) return false;
  for (const ClutterBox& c : plan.clutter) {
    if (detail::insideClutter(c, p, 1e-6)) return false;
  }
  return true;
}

/// Deterministic multi-room plan: a west-to-east row of rooms with jittered
/// extents, separated by solid wall slabs with centered door openings.
inline Floorplan generateFloorplan(int room_count, uint64_t seed) {
  if (room_count < 1) throw InvalidScenarioError("rooms", "room count must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> width(3.6, 6.0);
  std::uniform_real_distribution<double> depth(4.0, 6.4);

  Floorplan plan;
  plan.wall_height = 3.0;
  const double slab = 0.5;  // wall thickness between adjacent rooms
  double cursor = 0.0;
  for (int i = 0; i < room_count; ++i) {
    RoomRect r;
    r.id = i;
    r.half_w = 0.5 * width(rng);
    r.half_d = 0.5 * depth(rng);
    r.center = Eigen::Vector2d(cursor + r.half_w, r.half_d);
    plan.rooms.push_back(r);
    if (i > 0) {
      Door d;
      d.a = i - 1;
      d.b = i;
      d.center = Eigen::Vector2d(cursor - 0.5 * slab,
                                 std::min(plan.rooms[i - 1].half_d, r.half_d));
      d.half_w = 0.5 * slab + 1e-3;
      d.half_d = 0.6;
      plan.doors.push_back(d);
    }
    cursor += 2.0 * r.half_w + slab;
  }
  return plan;
}

/// Ray-cast LiDAR scan from a world-frame sensor pose. Returns points in
/// the sensor frame; one return per (ring, azimuth) that hits geometry
/// within max range.
inline PointCloud simulateScan(const Floorplan& plan, const Pose3& pose, const LidarConfig& cfg,
                               uint64_t noise_seed = 0) {
  Eigen::Vector2d origin2(pose.translation.x(), pose.translation.y());
  if (!inFreeSpace(plan, origin2)) throw PoseInsideWallError();

  std::vector<WallSegment> segs = wallSegments(plan);
  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, cfg.range_sigma);

  Eigen::Matrix3d rot = pose.rotation.toRotationMatrix();
  double z0 = pose.translation.z();

  PointCloud cloud;
  cloud.reserve(static_cast<size_t>(cfg.rings) * cfg.azimuth_steps);
  for (int ring = 0; ring < cfg.rings; ++ring) {
    double elev = cfg.rings == 1 ? 0.5 * (cfg.elevation_min + cfg.elevation_max)
                                 : cfg.elevation_min + (cfg.elevation_max - cfg.elevation_min) *
                                                           ring / (cfg.rings - 1.0);
    double ce = std::cos(elev);
    double se = std::sin(elev);
    for (int az = 0; az < cfg.azimuth_steps; ++az) {
      double a = 2.0 * M_PI * az / cfg.azimuth_steps;
      Eigen::Vector3d dir_s(ce * std::cos(a), ce * std::sin(a), se);
      Eigen::Vector3d dir_w = rot * dir_s;
      Eigen::Vector2d d2(dir_w.x(), dir_w.y());
      double h = d2.norm();

      double best = cfg.max_range;
      bool hit = false;
      if (h > 1e-12) {
        Eigen::Vector2d d2n = d2 / h;
        for (const WallSegment& s : segs) {
          Eigen::Vector2d e = s.p2 - s.p1;
          double denom = d2n.x() * (-e.y()) - d2n.y() * (-e.x());
          if (std::abs(denom) < 1e-12) continue;
          Eigen::Vector2d rhs = s.p1 - origin2;
          double t2 = (rhs.x() * (-e.y()) - rhs.y() * (-e.x())) / denom;
          double u = (d2n.x() * rhs.y() - d2n.y() * rhs.x()) / denom;
          if (t2 <= 1e-9 || u < 0.0 || u > 1.0) continue;
          double t3 = t2 / h;
          double z_hit = z0 + t3 * dir_w.z();
          if (z_hit < 0.0 || z_hit > s.z_max) continue;
          if (t3 < best) {
            best = t3;
            hit = true;
          }
        }
      }
      if (cfg.floor_returns && dir_w.z() < -1e-9) {
        double t3 = -z0 / dir_w.z();
        if (t3 > 1e-9 && t3 < best) {
          best = t3;
          hit = true;
        }
      }
      if (!hit) continue;
      double range = best + (cfg.range_sigma > 0.0 ? noise(rng) : 0.0);
      if (range <= 1e-6 || range > cfg.max_range) continue;
      cloud.push_back(dir_s * range);
    }
  }
  return cloud;
}

inline Pose3 sampleOdometryNoise(const NoiseModel& noise, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::Vector3d dt(noise.odom_sigma_t.x() > 0 ? noise.odom_sigma_t.x() * n01(rng) : 0.0,
                     noise.odom_sigma_t.y() > 0 ? noise.odom_sigma_t.y() * n01(rng) : 0.0,
                     noise.odom_sigma_t.z() > 0 ? noise.odom_sigma_t.z() * n01(rng) : 0.0);
  double dyaw = noise.odom_sigma_yaw > 0 ? noise.odom_sigma_yaw * n01(rng) : 0.0;
  return Pose3(Eigen::Quaterniond(Eigen::AngleAxisd(dyaw, Eigen::Vector3d::UnitZ())), dt);
}

/// Perturb a true relative motion with body-frame noise. Zero sigmas return
/// the input exactly; a fixed seed gives identical output.
inline Pose3 simulateOdometry(const Pose3& true_delta, const NoiseModel& noise, uint64_t seed) {
  std::mt19937_64 rng(seed);
  return true_delta.compose(sampleOdometryNoise(noise, rng));
}

inline Pose3 simulateOdometry(const Pose3& true_delta, const NoiseModel& noise,
                              std::mt19937_64& rng) {
  return true_delta.compose(sampleOdometryNoise(noise, rng));
}

// ---------------------------------------------------------------------------
// JSON round trip for scenario files

inline nlohmann::json floorplanToJson(const Floorplan& plan) {
  nlohmann::json j;
  j["wall_height"] = plan.wall_height;
  j["rooms"] = nlohmann::json::array();
  for (const RoomRect& r : plan.rooms) {
    j["rooms"].push_back({{"id", r.id},
                          {"center", {r.center.x(), r.center.y()}},
                          {"half_w", r.half_w},
                          {"half_d", r.half_d},
                          {"yaw", r.yaw},
                          {"corridor", r.corridor}});
  }
  j["doors"] = nlohmann::json::array();
  for (const Door& d : plan.doors) {
    j["doors"].push_back({{"center", {d.center.x(), d.center.y()}},
                          {"half_w", d.half_w},
                          {"half_d", d.half_d},
                          {"a", d.a},
                          {"b", d.b}});
  }
  j["clutter"] = nlohmann::json::array();
  for (const ClutterBox& c : plan.clutter) {
    j["clutter"].push_back({{"center", {c.center.x(), c.center.y()}},
                            {"half_x", c.half_x},
                            {"half_y", c.half_y},
                            {"height", c.height}});
  }
  return j;
}

inline Floorplan floorplanFromJson(const nlohmann::json& j) {
  Floorplan plan;
  plan.wall_height = j.value("wall_height", 3.0);
  for (const auto& r : j.at("rooms")) {
    RoomRect rect;
    rect.id = r.at("id").get<int>();
    rect.center = Eigen::Vector2d(r.at("center")[0].get<double>(), r.at("center")[1].get<double>());
    rect.half_w = r.at("half_w").get<double>();
    rect.half_d = r.at("half_d").get<double>();
    rect.yaw = r.value("yaw", 0.0);
    rect.corridor = r.value("corridor", false);
    plan.rooms.push_back(rect);
  }
  for (const auto& d : j.value("doors", nlohmann::json::array())) {
    Door door;
    door.center = Eigen::Vector2d(d.at("center")[0].get<double>(), d.at("center")[1].get<double>());
    door.half_w = d.at("half_w").get<double>();
    door.half_d = d.at("half_d").get<double>();
    door.a = d.value("a", -1);
    door.b = d.value("b", -1);
    plan.doors.push_back(door);
  }
  for (const auto& c : j.value("clutter", nlohmann::json::array())) {
    ClutterBox box;
    box.center = Eigen::Vector2d(c.at("center")[0].get<double>(), c.at("center")[1].get<double>());
    box.half_x = c.at("half_x").get<double>();
    box.half_y = c.at("half_y").get<double>();
    box.height = c.at("height").get<double>();
    plan.clutter.push_back(box);
  }
  return plan;
}

}  // namespace roomgraph
