#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "roomgraph/plane_extraction.hpp"
#include "roomgraph/room_detection.hpp"
#include "roomgraph/sgraph.hpp"
#include "roomgraph/world.hpp"

using namespace roomgraph;

namespace {

std::mt19937_64 rng(7);

Pose3 randomDelta() {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::Quaterniond q(1.0, 0.2 * n01(rng), 0.2 * n01(rng), 0.2 * n01(rng));
  q.normalize();
  return Pose3(q, Eigen::Vector3d(n01(rng), n01(rng), 0.3 * n01(rng)));
}

PointCloud dummyScan() { return {Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0)}; }

/// ray-cast a single infinite wall plane from the origin (test oracle)
PointCloud castSingleWall(const PlaneParam& wall, int rings, int azimuths) {
  PointCloud cloud;
  for (int r = 0; r < rings; ++r) {
    double elev = -0.2 + 0.4 * r / std::max(rings - 1, 1);
    for (int a = 0; a < azimuths; ++a) {
      double az = 2.0 * M_PI * a / azimuths;
      Eigen::Vector3d dir(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                          std::sin(elev));
      double denom = wall.normal.dot(dir);
      if (std::abs(denom) < 1e-9) continue;
      double t = wall.d / denom;
      if (t <= 0.1 || t > 25.0) continue;
      cloud.push_back(dir * t);
    }
  }
  return cloud;
}

}  // namespace

TEST_CASE("first keyframe with identity delta sits at the origin") {
  AgentGraph g;
  int id = addKeyframe(g, Pose3::identity(), dummyScan());
  REQUIRE(id == 0);
  REQUIRE((g.keyframes.at(0).pose.matrix() - Eigen::Matrix4d::Identity()).norm() == 0.0);
  REQUIRE(g.factors.empty());
}

TEST_CASE("two unit translations compose to (2,0,0)") {
  AgentGraph g;
  Pose3 step(Eigen::Quaterniond::Identity(), Eigen::Vector3d(1, 0, 0));
  addKeyframe(g, step, dummyScan());
  int id = addKeyframe(g, step, dummyScan());
  REQUIRE((g.keyframes.at(id).pose.translation - Eigen::Vector3d(2, 0, 0)).norm() < 1e-15);
  REQUIRE(g.factors.size() == 1);
  REQUIRE(g.factors[0].kind == FactorKind::Odometry);
}

TEST_CASE("keyframe pose equals the left fold of deltas (matrix oracle)") {
  AgentGraph g;
  Eigen::Matrix4d fold = Eigen::Matrix4d::Identity();
  int last = -1;
  for (int k = 0; k < 10; ++k) {
    Pose3 d = randomDelta();
    fold = fold * d.matrix();
    last = addKeyframe(g, d, dummyScan());
  }
  REQUIRE((g.keyframes.at(last).pose.matrix() - fold).norm() < 1e-9);
}

TEST_CASE("empty scans are rejected") {
  AgentGraph g;
  REQUIRE_THROWS_AS(addKeyframe(g, Pose3::identity(), PointCloud{}), EmptyScanError);
}

TEST_CASE("odometry chain reproduces keyframe poses before optimization") {
  AgentGraph g;
  for (int k = 0; k < 8; ++k) addKeyframe(g, randomDelta(), dummyScan());
  Pose3 chained = g.keyframes.at(0).pose;
  for (const FactorEdge& f : g.factors) {
    if (f.kind != FactorKind::Odometry) continue;
    chained = chained.compose(f.pose_measurement);
  }
  REQUIRE((chained.matrix() - g.keyframes.rbegin()->second.pose.matrix()).norm() < 1e-9);
}

// ---------------------------------------------------------------------------
// compute_room_center

TEST_CASE("axis-aligned room center from oriented walls") {
  std::array<PlaneParam, 4> planes = {
      PlaneParam(Eigen::Vector3d(1, 0, 0), 0.0),    // x = 0 facing +x
      PlaneParam(Eigen::Vector3d(-1, 0, 0), -4.0),  // x = 4 facing -x
      PlaneParam(Eigen::Vector3d(0, 1, 0), 0.0),    // y = 0
      PlaneParam(Eigen::Vector3d(0, -1, 0), -5.0),  // y = 5
  };
  Eigen::Vector2d c = computeRoomCenter(planes);
  REQUIRE((c - Eigen::Vector2d(2.0, 2.5)).norm() < 1e-12);
}

TEST_CASE("identical plane twice is degenerate") {
  PlaneParam p(Eigen::Vector3d(1, 0, 0), 0.0);
  std::array<PlaneParam, 4> planes = {p, p, PlaneParam(Eigen::Vector3d(0, 1, 0), 0.0),
                                      PlaneParam(Eigen::Vector3d(0, -1, 0), -5.0)};
  REQUIRE_THROWS_AS(computeRoomCenter(planes), DegeneratePlanesError);
}

TEST_CASE("random rectangles match the analytic center") {
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::uniform_real_distribution<double> width(1.0, 9.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Vector2d center(u(rng), u(rng));
    double yaw = angle(rng);
    double wx = width(rng), wy = width(rng);
    Eigen::Vector3d ax(std::cos(yaw), std::sin(yaw), 0.0);
    Eigen::Vector3d ay(-std::sin(yaw), std::cos(yaw), 0.0);
    Eigen::Vector3d c3(center.x(), center.y(), 0.0);
    // walls at +-wx/2 along ax and +-wy/2 along ay, oriented inward
    std::array<PlaneParam, 4> planes = {
        PlaneParam(ax, ax.dot(c3 - 0.5 * wx * ax)),
        PlaneParam(-ax, -ax.dot(c3 + 0.5 * wx * ax)),
        PlaneParam(ay, ay.dot(c3 - 0.5 * wy * ay)),
        PlaneParam(-ay, -ay.dot(c3 + 0.5 * wy * ay)),
    };
    REQUIRE((computeRoomCenter(planes) - center).norm() < 1e-9);
  }
}

// ---------------------------------------------------------------------------
// detect_room on a mapped graph

namespace {

/// Build a graph that has mapped the four walls of a rectangle and holds
/// keyframes inside it.
AgentGraph roomGraph(const Eigen::Vector2d& center, double w, double d, double yaw) {
  AgentGraph g;
  Eigen::Vector3d ax(std::cos(yaw), std::sin(yaw), 0.0);
  Eigen::Vector3d ay(-std::sin(yaw), std::cos(yaw), 0.0);
  Eigen::Vector3d c3(center.x(), center.y(), 0.0);
  std::array<PlaneParam, 4> walls = {
      PlaneParam(ax, ax.dot(c3 - 0.5 * w * ax)),
      PlaneParam(-ax, -ax.dot(c3 + 0.5 * w * ax)),
      PlaneParam(ay, ay.dot(c3 - 0.5 * d * ay)),
      PlaneParam(-ay, -ay.dot(c3 + 0.5 * d * ay)),
  };
  // a few keyframes near the center (addKeyframe takes relative deltas)
  Pose3 prev = Pose3::identity();
  for (int k = 0; k < 4; ++k) {
    Pose3 target(Eigen::Quaterniond::Identity(), c3 + 0.2 * k * ax);
    addKeyframe(g, prev.inverse().compose(target), {Eigen::Vector3d(1, 0, 0)});
    prev = target;
  }
  for (const PlaneParam& wall : walls) {
    PlaneVertex pv;
    pv.id = g.next_plane_id++;
    pv.plane = canonicalize(wall);
    pv.observation_count = 4;
    g.planes.emplace(pv.id, pv);
    for (int k = 0; k < 4; ++k) {
      FactorEdge f;
      f.kind = FactorKind::PosePlane;
      f.vertices = {k, pv.id};
      f.plane_measurement = wall;  // frame detail irrelevant for detection
      f.information = Eigen::Matrix3d::Identity();
      g.factors.push_back(f);
    }
  }
  return g;
}

std::vector<int> allPlaneIds(const AgentGraph& g) {
  std::vector<int> ids;
  for (const auto& [id, p] : g.planes) ids.push_back(id);
  return ids;
}

}  // namespace

TEST_CASE("detects an axis-aligned room and centers it") {
  AgentGraph g = roomGraph(Eigen::Vector2d(2.0, 2.5), 4.0, 5.0, 0.0);
  auto room = detectRoom(g, allPlaneIds(g));
  REQUIRE(room.has_value());
  REQUIRE((g.rooms.at(*room).center - Eigen::Vector2d(2.0, 2.5)).norm() < 1e-9);
  REQUIRE(!g.rooms.at(*room).keyframe_ids.empty());
  // enclosed keyframes got assigned
  for (int kid : g.rooms.at(*room).keyframe_ids) {
    REQUIRE(g.keyframes.at(kid).room_id == *room);
  }
  // floor node tracks the mean of room centers
  REQUIRE((g.floor.center - g.rooms.at(*room).center).norm() < 1e-6);
}

TEST_CASE("pairs below the width bound are not rooms") {
  AgentGraph g = roomGraph(Eigen::Vector2d(2.0, 0.25), 4.0, 0.5, 0.0);
  REQUIRE(!detectRoom(g, allPlaneIds(g)).has_value());
}

TEST_CASE("room detection is rotation-equivariant") {
  double yaw = 30.0 * M_PI / 180.0;
  Eigen::Rotation2Dd rot(yaw);
  Eigen::Vector2d base_center(3.0, 1.5);
  Eigen::Vector2d rotated_center = rot * base_center;

  AgentGraph g = roomGraph(rotated_center, 4.0, 5.0, yaw);
  auto room = detectRoom(g, allPlaneIds(g));
  REQUIRE(room.has_value());
  REQUIRE((g.rooms.at(*room).center - rotated_center).norm() < 1e-6);
}

TEST_CASE("re-detection of the same room is suppressed") {
  AgentGraph g = roomGraph(Eigen::Vector2d(2.0, 2.5), 4.0, 5.0, 0.0);
  auto first = detectRoom(g, allPlaneIds(g));
  REQUIRE(first.has_value());
  REQUIRE(!detectRoom(g, allPlaneIds(g)).has_value());
}

// ---------------------------------------------------------------------------
// plane extraction

TEST_CASE("single wall scanned from the origin") {
  PlaneParam wall(Eigen::Vector3d(1, 0, 0), 2.0);  // x = 2
  PointCloud scan = castSingleWall(wall, 16, 360);
  REQUIRE(scan.size() > 400);

  PlaneExtractionConfig cfg;
  cfg.min_support = 100;
  auto planes = extractPlanes(scan, cfg, 3);
  REQUIRE(planes.size() == 1);
  REQUIRE(std::abs(std::abs(planes[0].plane.normal.x()) - 1.0) < 1e-3);
  REQUIRE(std::abs(std::abs(planes[0].plane.d) - 2.0) < 1e-3);
  // sensor-oriented: the origin is on the positive side
  REQUIRE(planes[0].plane.signedDistance(Eigen::Vector3d::Zero()) > 0.0);
}

TEST_CASE("closed rectangular room yields four walls with opposing normals") {
  Floorplan plan;
  RoomRect r;
  r.id = 0;
  r.center = Eigen::Vector2d(0.0, 0.0);
  r.half_w = 2.0;
  r.half_d = 2.5;
  plan.rooms.push_back(r);

  LidarConfig lidar;
  lidar.range_sigma = 0.0;
  PointCloud scan =
      simulateScan(plan, Pose3(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0, 0, 1.2)), lidar);

  PlaneExtractionConfig cfg;
  cfg.min_support = 150;
  auto planes = extractPlanes(scan, cfg, 5);
  REQUIRE(planes.size() == 4);

  int antiparallel_pairs = 0;
  for (size_t i = 0; i < planes.size(); ++i) {
    for (size_t j = i + 1; j < planes.size(); ++j) {
      if (planes[i].plane.normal.dot(planes[j].plane.normal) < -0.999) ++antiparallel_pairs;
    }
  }
  REQUIRE(antiparallel_pairs == 2);
  for (const auto& p : planes) REQUIRE(p.support >= cfg.min_support);
}

TEST_CASE("pure noise yields no planes at high support") {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud noise;
  for (int i = 0; i < 4000; ++i) {
    Eigen::Vector3d p(u(rng), u(rng), u(rng));
    if (p.norm() <= 1.0) noise.push_back(3.0 * p);
  }
  PlaneExtractionConfig cfg;
  cfg.min_support = 200;
  REQUIRE(extractPlanes(noise, cfg, 11).empty());
}
