#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "roomgraph/agent.hpp"
#include "roomgraph/bus.hpp"
#include "roomgraph/errors.hpp"
#include "roomgraph/world.hpp"

namespace roomgraph {

struct AgentScript {
  int id = 0;
  Pose3 start;  // world frame; hidden from the SLAM layer
  std::vector<Eigen::Vector2d> waypoints;
};

struct Scenario {
  Floorplan floorplan;
  std::vector<AgentScript> agents;
  NoiseModel noise;
  LidarConfig lidar;
  DescriptorConfig descriptor;
  RegistrationConfig registration;
  AssociationConfig association;
  OptimizerConfig optimizer;
  PlaneExtractionConfig extraction;
  RoomDetectionConfig room_detection;
  double tick_step = 0.25;
  double sensor_height = 1.2;
  double keyframe_distance = 1.0;
  double keyframe_yaw = 30.0 * M_PI / 180.0;
  double plane_sigma_n = 0.02;
  double plane_sigma_d = 0.05;
  double room_sigma = 0.1;
  int optimize_every = 6;
  bool exchange = true;
  std::string transport = "mem";
  uint64_t seed = 1;
  int max_ticks = 20000;
};

struct TransformReport {
  int peer = -1;
  Pose3 estimate;
  double err_translation = -1.0;  // vs ground truth, meters
  double err_yaw_deg = -1.0;
  double fitness = 0.0;
};

struct AgentReport {
  int id = 0;
  int keyframes = 0;
  double ate_rmse = 0.0;
  int rooms_local = 0;
  int rooms_external = 0;
  int rooms_associated = 0;
  int planes_local = 0;
  int planes_external = 0;
  int planes_associated = 0;
  int coverage_tick = -1;
  std::vector<TransformReport> transforms;
  std::vector<OptimizationReport> optimizations;
};

struct RunReport {
  uint64_t seed = 0;
  std::string floorplan_hash;
  int total_ticks = 0;
  int coverage_ticks = -1;  // max over agents; -1 when never complete
  double overlap_fraction = 0.0;
  uint64_t raw_scan_bytes = 0;
  std::map<std::string, uint64_t> bytes_by_type;
  std::vector<AgentReport> agents;
};

struct ComparisonSummary {
  double tick_ratio = 0.0;  // multi / single
  bool below_threshold = false;
  double overlap_fraction = 0.0;
};

// ---------------------------------------------------------------------------
// Scenario JSON

namespace detail {

template <typename F>
auto field(const nlohmann::json& j, const std::string& path, F&& get) {
  try {
    return get(j);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidScenarioError(path, e.what());
  }
}

}  // namespace detail

inline Scenario scenarioFromJson(const nlohmann::json& j) {
  Scenario s;
  if (j.contains("floorplan")) {
    try {
      s.floorplan = floorplanFromJson(j.at("floorplan"));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidScenarioError("floorplan", e.what());
    }
  } else if (j.contains("floorplan_generate")) {
    const auto& g = j.at("floorplan_generate");
    s.floorplan = generateFloorplan(
        detail::field(g, "floorplan_generate.rooms", [](auto& x) { return x.at("rooms").template get<int>(); }),
        detail::field(g, "floorplan_generate.seed", [](auto& x) { return x.value("seed", uint64_t{1}); }));
  } else {
    throw InvalidScenarioError("floorplan", "either floorplan or floorplan_generate is required");
  }

  if (!j.contains("agents") || !j.at("agents").is_array() || j.at("agents").empty()) {
    throw InvalidScenarioError("agents", "at least one agent is required");
  }
  for (size_t i = 0; i < j.at("agents").size(); ++i) {
    const auto& a = j.at("agents")[i];
    std::string prefix = "agents[" + std::to_string(i) + "]";
    AgentScript script;
    script.id = detail::field(a, prefix + ".id", [](auto& x) { return x.at("id").template get<int>(); });
    auto st = detail::field(a, prefix + ".start",
                            [](auto& x) { return x.at("start").template get<std::vector<double>>(); });
    if (st.size() != 3) throw InvalidScenarioError(prefix + ".start", "expected [x, y, yaw_deg]");
    script.start = Pose3::fromYaw(st[2] * M_PI / 180.0, Eigen::Vector3d(st[0], st[1], 0.0));
    auto wps = detail::field(a, prefix + ".waypoints", [](auto& x) {
      return x.at("waypoints").template get<std::vector<std::vector<double>>>();
    });
    for (size_t w = 0; w < wps.size(); ++w) {
      if (wps[w].size() != 2) {
        throw InvalidScenarioError(prefix + ".waypoints[" + std::to_string(w) + "]",
                                   "expected [x, y]");
      }
      script.waypoints.emplace_back(wps[w][0], wps[w][1]);
    }
    s.agents.push_back(std::move(script));
  }

  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    auto t = detail::field(n, "noise.odom_sigma_t", [](auto& x) {
      return x.value("odom_sigma_t", std::vector<double>{0.0, 0.0, 0.0});
    });
    if (t.size() != 3) throw InvalidScenarioError("noise.odom_sigma_t", "expected 3 sigmas");
    s.noise.odom_sigma_t = Eigen::Vector3d(t[0], t[1], t[2]);
    s.noise.odom_sigma_yaw =
        detail::field(n, "noise.odom_sigma_yaw_deg",
                      [](auto& x) { return x.value("odom_sigma_yaw_deg", 0.0); }) *
        M_PI / 180.0;
    s.noise.range_sigma =
        detail::field(n, "noise.range_sigma", [](auto& x) { return x.value("range_sigma", 0.0); });
  }
  s.lidar.range_sigma = s.noise.range_sigma;

  if (j.contains("lidar")) {
    const auto& l = j.at("lidar");
    s.lidar.rings = l.value("rings", 16);
    s.lidar.azimuth_steps = l.value("azimuth_steps", 360);
    s.lidar.max_range = l.value("max_range", 30.0);
    s.lidar.floor_returns = l.value("floor_returns", false);
  }
  if (j.contains("keyframe")) {
    s.keyframe_distance = j.at("keyframe").value("distance", 1.0);
    s.keyframe_yaw = j.at("keyframe").value("yaw_deg", 30.0) * M_PI / 180.0;
  }
  if (j.contains("descriptor")) {
    const auto& d = j.at("descriptor");
    s.descriptor.rings = d.value("rings", 10);
    s.descriptor.sectors = d.value("sectors", 60);
    s.descriptor.max_radius = d.value("max_radius", 8.0);
    s.descriptor.downsample_voxel = d.value("voxel", 0.1);
    s.descriptor.match_threshold = d.value("tau", 0.25);
  }
  if (j.contains("registration")) {
    const auto& r = j.at("registration");
    s.registration.voxel = r.value("voxel", 0.5);
    s.registration.cov_eigen_floor = r.value("eigen_floor", 1e-3);
    s.registration.fitness_threshold = r.value("d_t", 0.05);
    s.registration.min_inlier_fraction = r.value("min_inlier", 0.6);
    s.registration.max_iterations = r.value("max_iterations", 50);
  }
  if (j.contains("association")) {
    const auto& a = j.at("association");
    s.association.max_normal_angle = a.value("theta_a_deg", 10.0) * M_PI / 180.0;
    s.association.max_d_difference = a.value("delta_d", 0.35);
    s.association.max_room_center_dist = a.value("r_d", 1.0);
    s.association.equality_sigma_n = a.value("equality_sigma_n", 0.01);
    s.association.equality_sigma_d = a.value("equality_sigma_d", 0.02);
    s.association.equality_sigma_room = a.value("equality_sigma_room", 0.05);
  }
  if (j.contains("extraction")) {
    const auto& e = j.at("extraction");
    s.extraction.inlier_dist = e.value("inlier_dist", 0.05);
    s.extraction.min_support = e.value("min_support", 150);
    s.extraction.max_planes = e.value("max_planes", 8);
    s.extraction.max_range = e.value("max_range", 12.0);
  }
  if (j.contains("optimizer")) {
    s.optimizer.max_iterations = j.at("optimizer").value("max_iterations", 100);
    s.optimizer.huber_delta = j.at("optimizer").value("huber_delta", 1.0);
  }
  s.tick_step = j.value("tick_step", 0.25);
  s.sensor_height = j.value("sensor_height", 1.2);
  s.plane_sigma_n = j.value("plane_sigma_n", 0.02);
  s.plane_sigma_d = j.value("plane_sigma_d", 0.05);
  s.room_sigma = j.value("room_sigma", 0.1);
  s.optimize_every = j.value("optimize_every", 6);
  s.exchange = j.value("exchange", true);
  s.transport = j.value("transport", std::string("mem"));
  if (s.transport != "mem" && s.transport != "socket") {
    throw InvalidScenarioError("transport", "must be 'mem' or 'socket'");
  }
  s.seed = j.value("seed", uint64_t{1});
  s.max_ticks = j.value("max_ticks", 20000);

  for (const AgentScript& a : s.agents) {
    Eigen::Vector2d p(a.start.translation.x(), a.start.translation.y());
    if (!inFreeSpace(s.floorplan, p)) {
      throw InvalidScenarioError("agents[" + std::to_string(a.id) + "].start",
                                 "start pose lies outside free space");
    }
    for (size_t w = 0; w < a.waypoints.size(); ++w) {
      if (!inFreeSpace(s.floorplan, a.waypoints[w])) {
        throw InvalidScenarioError(
            "agents[" + std::to_string(a.id) + "].waypoints[" + std::to_string(w) + "]",
            "waypoint lies outside free space");
      }
    }
  }
  return s;
}

inline Scenario loadScenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidScenarioError("file", "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidScenarioError("file", e.what());
  }
  return scenarioFromJson(j);
}

// ---------------------------------------------------------------------------
// Runner

namespace detail {

struct TrajectoryState {
  Eigen::Vector2d position{0, 0};
  double heading = 0.0;
  size_t next_waypoint = 0;
  bool done = false;
};

inline Pose3 advance(TrajectoryState& t, const AgentScript& script, double step) {
  while (!t.done) {
    if (t.next_waypoint >= script.waypoints.size()) {
      t.done = true;
      break;
    }
    Eigen::Vector2d target = script.waypoints[t.next_waypoint];
    Eigen::Vector2d to = target - t.position;
    double dist = to.norm();
    if (dist < 1e-9) {
      ++t.next_waypoint;
      continue;
    }
    double move = std::min(step, dist);
    t.heading = std::atan2(to.y(), to.x());
    t.position += to / dist * move;
    if (move >= dist - 1e-9) ++t.next_waypoint;
    break;
  }
  return Pose3::fromYaw(t.heading, Eigen::Vector3d(t.position.x(), t.position.y(), 0.0));
}

inline double ateRmse(const std::vector<Pose3>& truth, const AgentGraph& graph) {
  size_t n = std::min(truth.size(), graph.keyframes.size());
  if (n < 2) return 0.0;
  Eigen::MatrixXd est(3, n), gt(3, n);
  size_t col = 0;
  for (const auto& [id, kf] : graph.keyframes) {
    if (col >= n) break;
    est.col(col) = kf.pose.translation;
    gt.col(col) = truth[col].translation;
    ++col;
  }
  Eigen::Matrix4d align = Eigen::umeyama(est, gt, false);
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    Eigen::Vector3d aligned =
        align.topLeftCorner<3, 3>() * est.col(i) + align.topRightCorner<3, 1>();
    sum += (aligned - gt.col(i)).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(n));
}

inline int trueRoomAt(const Floorplan& plan, const Eigen::Vector2d& p) {
  for (const RoomRect& r : plan.rooms) {
    if (!r.corridor && insideRect(r, p, -0.05)) return r.id;
  }
  return -1;
}

}  // namespace detail

struct RunOptions {
  std::string out_dir;
  std::optional<std::string> transport;
  std::optional<uint64_t> seed;
  bool no_descriptors = false;
};

inline nlohmann::json reportToJson(const RunReport& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["floorplan_hash"] = r.floorplan_hash;
  j["total_ticks"] = r.total_ticks;
  j["coverage_ticks"] = r.coverage_ticks;
  j["overlap_fraction"] = r.overlap_fraction;
  j["raw_scan_bytes"] = r.raw_scan_bytes;
  j["bytes_by_type"] = r.bytes_by_type;
  j["agents"] = nlohmann::json::array();
  for (const AgentReport& a : r.agents) {
    nlohmann::json transforms = nlohmann::json::array();
    for (const TransformReport& t : a.transforms) {
      transforms.push_back({{"peer", t.peer},
                            {"pose", poseToJson(t.estimate)},
                            {"err_translation", t.err_translation},
                            {"err_yaw_deg", t.err_yaw_deg},
                            {"fitness", t.fitness}});
    }
    nlohmann::json opts = nlohmann::json::array();
    for (const OptimizationReport& o : a.optimizations) {
      opts.push_back({{"initial_cost", o.initial_cost},
                      {"final_cost", o.final_cost},
                      {"iterations", o.iterations}});
    }
    j["agents"].push_back({{"id", a.id},
                           {"keyframes", a.keyframes},
                           {"ate_rmse", a.ate_rmse},
                           {"rooms_local", a.rooms_local},
                           {"rooms_external", a.rooms_external},
                           {"rooms_associated", a.rooms_associated},
                           {"planes_local", a.planes_local},
                           {"planes_external", a.planes_external},
                           {"planes_associated", a.planes_associated},
                           {"coverage_tick", a.coverage_tick},
                           {"transforms", transforms},
                           {"optimizations", opts}});
  }
  return j;
}

inline RunReport reportFromJson(const nlohmann::json& j) {
  RunReport r;
  r.seed = j.at("seed").get<uint64_t>();
  r.floorplan_hash = j.at("floorplan_hash").get<std::string>();
  r.total_ticks = j.at("total_ticks").get<int>();
  r.coverage_ticks = j.at("coverage_ticks").get<int>();
  r.overlap_fraction = j.at("overlap_fraction").get<double>();
  r.raw_scan_bytes = j.at("raw_scan_bytes").get<uint64_t>();
  for (auto it = j.at("bytes_by_type").begin(); it != j.at("bytes_by_type").end(); ++it) {
    r.bytes_by_type[it.key()] = it.value().get<uint64_t>();
  }
  for (const auto& a : j.at("agents")) {
    AgentReport ar;
    ar.id = a.at("id").get<int>();
    ar.keyframes = a.at("keyframes").get<int>();
    ar.ate_rmse = a.at("ate_rmse").get<double>();
    ar.rooms_local = a.at("rooms_local").get<int>();
    ar.rooms_external = a.at("rooms_external").get<int>();
    ar.rooms_associated = a.at("rooms_associated").get<int>();
    ar.coverage_tick = a.at("coverage_tick").get<int>();
    r.agents.push_back(std::move(ar));
  }
  return r;
}

/// Run a scenario end to end. In-memory transport is deterministic for a
/// fixed seed; socket transport runs the same pipeline over localhost TCP.
inline RunReport run(const Scenario& scenario_in, const RunOptions& options = {}) {
  Scenario scenario = scenario_in;
  if (options.seed) scenario.seed = *options.seed;
  if (options.transport) scenario.transport = *options.transport;
  if (options.no_descriptors) scenario.exchange = false;

  const int num_agents = static_cast<int>(scenario.agents.size());
  int total_rooms = 0;
  for (const RoomRect& r : scenario.floorplan.rooms) total_rooms += r.corridor ? 0 : 1;

  // agents
  std::vector<std::unique_ptr<Agent>> agents;
  for (const AgentScript& script : scenario.agents) {
    AgentParams p;
    p.id = script.id;
    p.descriptor = scenario.descriptor;
    p.registration = scenario.registration;
    p.extraction = scenario.extraction;
    p.room_detection = scenario.room_detection;
    p.association = scenario.association;
    p.optimizer = scenario.optimizer;
    p.noise = scenario.noise;
    p.keyframe_distance = scenario.keyframe_distance;
    p.keyframe_yaw = scenario.keyframe_yaw;
    p.plane_sigma_n = scenario.plane_sigma_n;
    p.plane_sigma_d = scenario.plane_sigma_d;
    p.room_sigma = scenario.room_sigma;
    p.optimize_every_keyframes = scenario.optimize_every;
    p.exchange = scenario.exchange;
    p.seed = scenario.seed * 7919 + static_cast<uint64_t>(script.id) * 104729 + 13;
    agents.push_back(std::make_unique<Agent>(p));
  }

  bool socket_mode = scenario.transport == "socket";
  std::unique_ptr<MemoryBus> bus;
  std::vector<std::unique_ptr<TcpTransport>> tcp;
  if (!socket_mode) {
    bus = std::make_unique<MemoryBus>();
    for (const AgentScript& a : scenario.agents) bus->registerAgent(a.id);
  } else {
    std::vector<int> ids;
    for (const AgentScript& a : scenario.agents) ids.push_back(a.id);
    for (const AgentScript& a : scenario.agents) {
      tcp.push_back(std::make_unique<TcpTransport>(a.id, ids));
    }
  }

  auto transportIndex = [&](int id) {
    for (int i = 0; i < num_agents; ++i) {
      if (scenario.agents[i].id == id) return i;
    }
    return 0;
  };
  // each agent sends through its own transport
  auto sendFrom = [&](int from, const BrokerMessage& m) {
    for (const AgentScript& a : scenario.agents) {
      if (a.id == from) continue;
      if (socket_mode) {
        tcp[transportIndex(from)]->send(a.id, m);
      } else {
        bus->send(a.id, m);
      }
    }
  };

  // HELLO broadcast (seq 0 per sender)
  if (scenario.exchange && num_agents > 1) {
    for (int i = 0; i < num_agents; ++i) {
      BrokerMessage hello = agents[i]->makeHello();
      agents[i]->markHelloSent();
      sendFrom(hello.sender, hello);
    }
  }

  std::vector<detail::TrajectoryState> traj(num_agents);
  for (int i = 0; i < num_agents; ++i) {
    traj[i].position = Eigen::Vector2d(scenario.agents[i].start.translation.x(),
                                       scenario.agents[i].start.translation.y());
    traj[i].heading = scenario.agents[i].start.yaw();
  }

  RunReport report;
  report.seed = scenario.seed;
  report.floorplan_hash =
      std::to_string(std::hash<std::string>{}(canonicalJson(floorplanToJson(scenario.floorplan))));

  std::vector<int> coverage_tick(num_agents, -1);
  int shared_ticks = 0;
  int tick = 0;

  auto routeIncoming = [&](int idx) {
    std::vector<BrokerMessage> incoming =
        socket_mode ? tcp[idx]->drain(scenario.agents[idx].id)
                    : bus->drain(scenario.agents[idx].id);
    for (const BrokerMessage& m : incoming) {
      for (const BrokerMessage& reply : agents[idx]->handleIncoming(m)) {
        sendFrom(reply.sender, reply);
      }
    }
  };

  for (; tick < scenario.max_ticks; ++tick) {
    bool all_done = true;
    for (int i = 0; i < num_agents; ++i) {
      if (!traj[i].done) all_done = false;
    }
    if (all_done) break;

    for (int i = 0; i < num_agents; ++i) {
      if (traj[i].done) continue;
      Pose3 ground = detail::advance(traj[i], scenario.agents[i], scenario.tick_step);
      Pose3 sensor_pose(ground.rotation,
                        ground.translation + Eigen::Vector3d(0, 0, scenario.sensor_height));
      uint64_t scan_seed = scenario.seed * 1000003 + static_cast<uint64_t>(i) * 7907 +
                           static_cast<uint64_t>(tick) * 31;
      PointCloud scan = simulateScan(scenario.floorplan, sensor_pose, scenario.lidar, scan_seed);
      report.raw_scan_bytes += scan.size() * 3 * sizeof(double);
      for (const BrokerMessage& m : agents[i]->tick(sensor_pose, scan)) {
        sendFrom(m.sender, m);
      }
    }
    if (scenario.exchange && num_agents > 1) {
      for (int i = 0; i < num_agents; ++i) routeIncoming(i);
    }

    // coverage + overlap bookkeeping on ground truth
    std::map<int, int> room_occupancy;
    for (int i = 0; i < num_agents; ++i) {
      if (coverage_tick[i] < 0 && agents[i]->censusRoomCount() >= total_rooms) {
        coverage_tick[i] = tick;
      }
      int rid = detail::trueRoomAt(scenario.floorplan, traj[i].position);
      if (rid >= 0) room_occupancy[rid] += 1;
    }
    for (const auto& [rid, n] : room_occupancy) {
      if (n >= 2) {
        ++shared_ticks;
        break;
      }
    }
  }

  // final flush + a few delivery rounds
  for (int i = 0; i < num_agents; ++i) {
    for (const BrokerMessage& m : agents[i]->finish()) sendFrom(m.sender, m);
  }
  for (int round = 0; round < 4 && scenario.exchange && num_agents > 1; ++round) {
    if (socket_mode) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    for (int i = 0; i < num_agents; ++i) routeIncoming(i);
  }
  for (int i = 0; i < num_agents; ++i) {
    if (coverage_tick[i] < 0 && agents[i]->censusRoomCount() >= total_rooms) {
      coverage_tick[i] = tick;
    }
  }

  // reports
  report.total_ticks = tick;
  report.overlap_fraction = tick > 0 ? static_cast<double>(shared_ticks) / tick : 0.0;
  const ByteAccounting* acct = nullptr;
  if (!socket_mode) {
    acct = &bus->accounting();
    report.bytes_by_type = acct->bytes_by_type;
  } else {
    for (const auto& t : tcp) {
      for (const auto& [k, v] : t->accounting().bytes_by_type) report.bytes_by_type[k] += v;
    }
  }

  int worst_coverage = 0;
  for (int i = 0; i < num_agents; ++i) {
    const AgentGraph& g = agents[i]->graph();
    AgentReport ar;
    ar.id = scenario.agents[i].id;
    ar.keyframes = static_cast<int>(g.keyframes.size());
    ar.ate_rmse = detail::ateRmse(agents[i]->keyframeTruth(), g);
    ar.rooms_local = g.countRooms(Provenance::Local);
    ar.rooms_external = g.countRooms(Provenance::External);
    for (const auto& [id, pv] : g.planes) {
      if (pv.provenance == Provenance::Local) {
        ++ar.planes_local;
      } else {
        ++ar.planes_external;
      }
    }
    for (const auto& [pid, peer] : agents[i]->broker().peers()) {
      ar.rooms_associated += peer.merged_total.rooms_associated;
      ar.planes_associated += peer.merged_total.planes_associated;
      if (peer.transform) {
        TransformReport tr;
        tr.peer = pid;
        tr.estimate = peer.transform->transform;
        tr.fitness = peer.transform->fitness;
        // ground truth: world poses of both map frames (= first keyframe truth)
        int j = transportIndex(pid);
        if (!agents[i]->keyframeTruth().empty() && !agents[j]->keyframeTruth().empty()) {
          Pose3 gt = agents[i]->keyframeTruth().front().inverse().compose(
              agents[j]->keyframeTruth().front());
          tr.err_translation = (tr.estimate.translation - gt.translation).norm();
          tr.err_yaw_deg = std::abs(wrapAngle(tr.estimate.yaw() - gt.yaw())) * 180.0 / M_PI;
        }
        ar.transforms.push_back(tr);
      }
    }
    ar.coverage_tick = coverage_tick[i];
    worst_coverage = std::max(worst_coverage, coverage_tick[i]);
    ar.optimizations = agents[i]->optimizationReports();
    report.agents.push_back(std::move(ar));
  }
  bool all_covered = true;
  for (int i = 0; i < num_agents; ++i) {
    if (coverage_tick[i] < 0) all_covered = false;
  }
  report.coverage_ticks = all_covered ? worst_coverage : -1;

  // artifacts
  if (!options.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(options.out_dir);
    std::ofstream(fs::path(options.out_dir) / "report.json")
        << canonicalJson(reportToJson(report)) << "\n";
    for (int i = 0; i < num_agents; ++i) {
      const AgentGraph& g = agents[i]->graph();
      std::string id = std::to_string(scenario.agents[i].id);
      std::ofstream(fs::path(options.out_dir) / ("graph_agent_" + id + ".json"))
          << canonicalJson(graphToJson(g)) << "\n";
      // plot-ready merged map: room clouds with provenance + plane list
      std::ofstream pts(fs::path(options.out_dir) / ("map_agent_" + id + "_points.csv"));
      pts << "x,y,z,room_id,provenance\n";
      for (const auto& [rid, room] : g.rooms) {
        if (room.provenance != Provenance::Local || room.keyframe_ids.empty()) continue;
        RoomKeyframe rk = assembleRoomKeyframe(g, rid);
        PointCloud down = voxelDownsample(rk.cloud, scenario.descriptor.downsample_voxel);
        for (const Eigen::Vector3d& p : down) {
          pts << p.x() + room.center.x() << ',' << p.y() + room.center.y() << ',' << p.z() << ','
              << rid << ",local\n";
        }
      }
    }
  }
  return report;
}

/// Coverage comparison between a single-agent and a multi-agent run over the
/// same floorplan.
inline ComparisonSummary compare(const RunReport& single, const RunReport& multi) {
  if (single.floorplan_hash != multi.floorplan_hash) {
    throw MismatchedWorldsError("reports were produced on different floorplans");
  }
  ComparisonSummary c;
  if (single.coverage_ticks > 0 && multi.coverage_ticks > 0) {
    c.tick_ratio = static_cast<double>(multi.coverage_ticks) /
                   static_cast<double>(single.coverage_ticks);
  } else {
    c.tick_ratio = std::numeric_limits<double>::quiet_NaN();
  }
  c.below_threshold = c.tick_ratio < 0.75;
  c.overlap_fraction = multi.overlap_fraction;
  return c;
}

}  // namespace roomgraph
