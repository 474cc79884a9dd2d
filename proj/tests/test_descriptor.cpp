#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "roomgraph/descriptor.hpp"
#include "roomgraph/world.hpp"

using namespace roomgraph;

namespace {

std::mt19937_64 rng(31);

PointCloud rotateZ(const PointCloud& cloud, double yaw) {
  Eigen::Matrix3d r = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  PointCloud out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(r * p);
  return out;
}

/// Room-frame cloud of a single simulated room observed from several poses.
PointCloud roomCloud(const std::vector<Eigen::Vector2d>& viewpoints, double yaw0 = 0.0) {
  Floorplan plan;
  RoomRect r;
  r.center = Eigen::Vector2d(0, 0);
  r.half_w = 2.6;
  r.half_d = 2.0;
  plan.rooms.push_back(r);
  ClutterBox box;
  box.center = Eigen::Vector2d(1.2, -0.7);
  box.half_x = 0.3;
  box.half_y = 0.4;
  box.height = 1.4;
  plan.clutter.push_back(box);

  LidarConfig lidar;
  lidar.range_sigma = 0.0;
  PointCloud out;
  for (const Eigen::Vector2d& vp : viewpoints) {
    Pose3 pose = Pose3::fromYaw(yaw0, Eigen::Vector3d(vp.x(), vp.y(), 1.2));
    for (const Eigen::Vector3d& p : simulateScan(plan, pose, lidar)) {
      out.push_back(pose.apply(p));  // room frame == world frame here
    }
  }
  return out;
}

}  // namespace

TEST_CASE("assembling an empty room fails") {
  AgentGraph g;
  Room room;
  room.id = 0;
  g.rooms.emplace(0, room);
  REQUIRE_THROWS_AS(assembleRoomKeyframe(g, 0), EmptyRoomError);
  REQUIRE_THROWS_AS(assembleRoomKeyframe(g, 99), EmptyRoomError);
}

TEST_CASE("keyframe at the room frame passes its scan through unchanged") {
  AgentGraph g;
  PointCloud scan = {Eigen::Vector3d(1, 2, 0.5), Eigen::Vector3d(-0.5, 0.25, 1.0)};
  Room room;
  room.id = 0;
  room.center = Eigen::Vector2d(3.0, -1.0);
  // keyframe pose == room frame (translation to center, identity rotation)
  addKeyframe(g, Pose3(Eigen::Quaterniond::Identity(), Eigen::Vector3d(3.0, -1.0, 0.0)), scan);
  g.keyframes.at(0).room_id = 0;
  room.keyframe_ids = {0};
  g.rooms.emplace(0, room);

  RoomKeyframe rk = assembleRoomKeyframe(g, 0);
  REQUIRE(rk.cloud.size() == scan.size());
  for (size_t i = 0; i < scan.size(); ++i) REQUIRE((rk.cloud[i] - scan[i]).norm() == 0.0);
  REQUIRE(rk.source_keyframes == 1);
}

TEST_CASE("multi-keyframe assembly matches a per-point matrix oracle") {
  AgentGraph g;
  std::normal_distribution<double> n01(0.0, 1.0);
  PointCloud scan_a, scan_b;
  for (int i = 0; i < 40; ++i) {
    scan_a.emplace_back(n01(rng), n01(rng), std::abs(n01(rng)));
    scan_b.emplace_back(n01(rng), n01(rng), std::abs(n01(rng)));
  }
  Pose3 pose_a = Pose3::fromYaw(0.4, Eigen::Vector3d(1.0, 2.0, 0.0));
  Pose3 pose_b = Pose3::fromYaw(-1.2, Eigen::Vector3d(2.5, 1.0, 0.1));
  addKeyframe(g, pose_a, scan_a);
  addKeyframe(g, pose_a.inverse().compose(pose_b), scan_b);

  Room room;
  room.id = 0;
  room.center = Eigen::Vector2d(1.5, 1.5);
  room.keyframe_ids = {0, 1};
  g.rooms.emplace(0, room);

  RoomKeyframe rk = assembleRoomKeyframe(g, 0);
  REQUIRE(rk.cloud.size() == scan_a.size() + scan_b.size());

  Eigen::Vector3d origin(1.5, 1.5, 0.0);
  for (size_t i = 0; i < scan_a.size(); ++i) {
    Eigen::Vector4d h(scan_a[i].x(), scan_a[i].y(), scan_a[i].z(), 1.0);
    Eigen::Vector3d expect = (pose_a.matrix() * h).head<3>() - origin;
    REQUIRE((rk.cloud[i] - expect).norm() < 1e-12);
  }
  for (size_t i = 0; i < scan_b.size(); ++i) {
    Eigen::Vector4d h(scan_b[i].x(), scan_b[i].y(), scan_b[i].z(), 1.0);
    Eigen::Vector3d expect = (pose_b.matrix() * h).head<3>() - origin;
    REQUIRE((rk.cloud[scan_a.size() + i] - expect).norm() < 1e-12);
  }
}

// ---------------------------------------------------------------------------
// voxel downsampling

TEST_CASE("downsampling an empty cloud is empty") {
  REQUIRE(voxelDownsample({}, 0.1).empty());
}

TEST_CASE("points sharing a voxel collapse to their centroid") {
  PointCloud cloud;
  Eigen::Vector3d base(0.32, 0.71, 1.04);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  std::uniform_real_distribution<double> u(0.001, 0.099);
  for (int i = 0; i < 8; ++i) {
    Eigen::Vector3d p = Eigen::Vector3d(0.3, 0.7, 1.0) + Eigen::Vector3d(u(rng), u(rng), u(rng));
    cloud.push_back(p);
    sum += p;
  }
  (void)base;
  PointCloud down = voxelDownsample(cloud, 0.1);
  REQUIRE(down.size() == 1);
  REQUIRE((down[0] - sum / 8.0).norm() < 1e-12);
}

TEST_CASE("downsample matches a brute-force hash grid and respects bounds") {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  PointCloud cloud;
  for (int i = 0; i < 5000; ++i) cloud.emplace_back(u(rng), u(rng), u(rng));
  const double voxel = 0.25;
  PointCloud down = voxelDownsample(cloud, voxel);

  struct OracleAcc {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    int n = 0;
  };
  std::map<std::tuple<int, int, int>, OracleAcc> oracle;
  for (const auto& p : cloud) {
    auto key = std::make_tuple(int(std::floor(p.x() / voxel)), int(std::floor(p.y() / voxel)),
                               int(std::floor(p.z() / voxel)));
    auto& acc = oracle[key];
    acc.sum += p;
    acc.n += 1;
  }
  REQUIRE(down.size() == oracle.size());
  REQUIRE(down.size() <= cloud.size());
  // bounding box volume bound
  double bbox_cells = std::ceil(4.0 / voxel) * std::ceil(4.0 / voxel) * std::ceil(4.0 / voxel);
  REQUIRE(static_cast<double>(down.size()) <= bbox_cells + 1);
  for (const auto& p : down) {
    auto key = std::make_tuple(int(std::floor(p.x() / voxel)), int(std::floor(p.y() / voxel)),
                               int(std::floor(p.z() / voxel)));
    auto it = oracle.find(key);
    REQUIRE(it != oracle.end());
    REQUIRE((p - it->second.sum / it->second.n).norm() < 1e-9);
  }
}

// ---------------------------------------------------------------------------
// scan context

TEST_CASE("empty cloud gives the zero descriptor") {
  Eigen::MatrixXd d = scanContext({}, 20, 60, 8.0);
  REQUIRE(d.rows() == 20);
  REQUIRE(d.cols() == 60);
  REQUIRE(d.norm() == 0.0);
}

TEST_CASE("single point lands in its ring and sector (direct binning oracle)") {
  Eigen::MatrixXd d = scanContext({Eigen::Vector3d(1.0, 0.0, 0.5)}, 20, 60, 8.0);
  // rho = 1 -> ring floor(1 * 20 / 8) = 2; theta = 0 -> sector 0
  for (int r = 0; r < 20; ++r) {
    for (int s = 0; s < 60; ++s) {
      if (r == 2 && s == 0) {
        REQUIRE(d(r, s) == 0.5);
      } else {
        REQUIRE(d(r, s) == 0.0);
      }
    }
  }
  // points beyond the max radius are ignored
  REQUIRE(scanContext({Eigen::Vector3d(9.0, 0.0, 1.0)}, 20, 60, 8.0).norm() == 0.0);
}

TEST_CASE("rotation by whole sectors cyclically shifts the columns") {
  PointCloud cloud = roomCloud({{0.23, 0.11}, {1.0, 0.53}});
  const int n_s = 60;
  Eigen::MatrixXd base = scanContext(cloud, 20, n_s, 8.0);
  for (int k : {1, 7, 30, 59}) {
    Eigen::MatrixXd rotated = scanContext(rotateZ(cloud, 2.0 * M_PI * k / n_s), 20, n_s, 8.0);
    for (int s = 0; s < n_s; ++s) {
      REQUIRE((rotated.col((s + k) % n_s) - base.col(s)).norm() == 0.0);
    }
  }
}

TEST_CASE("descriptor distance of a matrix to itself is zero at shift zero") {
  PointCloud cloud = roomCloud({{0.5, -0.3}});
  Eigen::MatrixXd d = scanContext(cloud, 20, 60, 8.0);
  auto res = scDistance(d, d);
  REQUIRE(res.distance == 0.0);
  REQUIRE(res.shift == 0);
}

TEST_CASE("left-shifted copies are found at the right shift") {
  PointCloud cloud = roomCloud({{0.21, 0.34}});
  Eigen::MatrixXd a = scanContext(cloud, 20, 60, 8.0);
  for (int k : {3, 17, 42}) {
    Eigen::MatrixXd b(a.rows(), a.cols());
    for (int s = 0; s < a.cols(); ++s) b.col(s) = a.col((s + k) % a.cols());
    auto res = scDistance(a, b);
    REQUIRE(res.distance < 1e-12);
    REQUIRE(res.shift == k);
  }
}

TEST_CASE("dimension mismatch is rejected") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(20, 60);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(10, 60);
  REQUIRE_THROWS_AS(scDistance(a, b), DimensionMismatchError);
}

TEST_CASE("single-column descriptors reduce to one aligned column (exhaustive oracle)") {
  const int n_r = 4, n_s = 8;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_r, n_s);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n_r, n_s);
  a.col(2) << 1.0, 2.0, 0.5, 0.0;
  b.col(5) << 2.0, 4.0, 1.0, 0.0;  // parallel column: cosine similarity 1

  auto res = scDistance(a, b);

  // exhaustive oracle over all shifts
  double best = 1e9;
  int best_k = 0;
  for (int k = 0; k < n_s; ++k) {
    double sum = 0.0;
    int cols = 0;
    for (int j = 0; j < n_s; ++j) {
      Eigen::VectorXd ca = a.col(j);
      Eigen::VectorXd cb = b.col(((j - k) % n_s + n_s) % n_s);
      if (ca.norm() == 0.0 && cb.norm() == 0.0) continue;
      double sim = (ca.norm() > 0 && cb.norm() > 0) ? ca.dot(cb) / (ca.norm() * cb.norm()) : 0.0;
      sum += 1.0 - sim;
      ++cols;
    }
    if (cols && sum / cols < best) {
      best = sum / cols;
      best_k = k;
    }
  }
  REQUIRE(res.distance == Catch::Approx(best).margin(1e-15));
  REQUIRE(res.shift == best_k);
  // aligned parallel columns: distance 0 at the aligning shift
  REQUIRE(res.distance < 1e-12);
  REQUIRE(res.shift == 5);
}

TEST_CASE("yaw invariance: exact for sector multiples, small otherwise") {
  PointCloud cloud = voxelDownsample(roomCloud({{0.19, -0.37}, {-1.0, 0.81}}), 0.1);
  DescriptorConfig cfg;
  Eigen::MatrixXd base = scanContext(cloud, cfg.rings, cfg.sectors, cfg.max_radius);

  for (int k : {1, 13, 31, 59}) {
    Eigen::MatrixXd rot = scanContext(rotateZ(cloud, 2.0 * M_PI * k / cfg.sectors), cfg.rings,
                                      cfg.sectors, cfg.max_radius);
    auto res = scDistance(base, rot);
    REQUIRE(res.distance == 0.0);
  }

  std::uniform_real_distribution<double> yaw(0.0, 2.0 * M_PI);
  for (int trial = 0; trial < 25; ++trial) {
    Eigen::MatrixXd rot =
        scanContext(rotateZ(cloud, yaw(rng)), cfg.rings, cfg.sectors, cfg.max_radius);
    REQUIRE(scDistance(base, rot).distance < 0.05);
  }
}

TEST_CASE("room-centered descriptors from different keyframe subsets agree") {
  PointCloud a = voxelDownsample(roomCloud({{-1.2, -0.8}, {0.3, 0.2}}), 0.1);
  PointCloud b = voxelDownsample(roomCloud({{1.4, 0.9}, {-0.4, 1.0}}), 0.1);
  DescriptorConfig cfg;
  Eigen::MatrixXd da = scanContext(a, cfg.rings, cfg.sectors, cfg.max_radius);
  Eigen::MatrixXd db = scanContext(b, cfg.rings, cfg.sectors, cfg.max_radius);
  REQUIRE(scDistance(da, db).distance < 0.15);
}

TEST_CASE("match candidates respect the threshold and pick the minimum") {
  PointCloud cloud = voxelDownsample(roomCloud({{0.27, -0.16}}), 0.1);
  RoomDescriptor local;
  local.matrix = scanContext(cloud, 10, 60, 8.0);
  local.room_id = 4;
  local.agent_id = 0;

  LocalDescriptorStore store;
  REQUIRE(!matchDescriptor(store, local, 0.25).has_value());

  store[4] = local;
  RoomDescriptor incoming = local;
  incoming.agent_id = 1;
  incoming.room_id = 9;
  auto match = matchDescriptor(store, incoming, 0.25);
  REQUIRE(match.has_value());
  REQUIRE(match->local_room_id == 4);
  REQUIRE(match->remote_agent_id == 1);
  REQUIRE(match->remote_room_id == 9);
  REQUIRE(match->distance == 0.0);

  // a rotated view of the same room still matches, with the yaw encoded in
  // the shift (within one sector)
  double true_yaw = 37.0 * M_PI / 180.0;
  incoming.matrix = scanContext(rotateZ(cloud, true_yaw), 10, 60, 8.0);
  match = matchDescriptor(store, incoming, 0.25);
  REQUIRE(match.has_value());
  double sector = 2.0 * M_PI / 60;
  double seed_yaw = wrapAngle(match->shift * sector);
  REQUIRE(std::abs(wrapAngle(seed_yaw + true_yaw)) <= sector + 1e-9);

  // a clearly different geometry must not match
  PointCloud other;
  for (int i = 0; i < 500; ++i) {
    other.emplace_back(0.02 * i, 0.5 + 0.001 * i, 0.3);
  }
  incoming.matrix = scanContext(other, 10, 60, 8.0);
  REQUIRE(!matchDescriptor(store, incoming, 0.25).has_value());
}
