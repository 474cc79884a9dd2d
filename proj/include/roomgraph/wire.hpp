#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "roomgraph/errors.hpp"
#include "roomgraph/geometry.hpp"
#include "roomgraph/sgraph.hpp"

namespace roomgraph {

enum class MessageType { Hello, RoomDesc, GraphShare, Ack };

inline std::string messageTypeName(MessageType t) {
  switch (t) {
    case MessageType::Hello: return "HELLO";
    case MessageType::RoomDesc: return "ROOM_DESC";
    case MessageType::GraphShare: return "GRAPH_SHARE";
    case MessageType::Ack: return "ACK";
  }
  return "UNKNOWN";
}

/// Clouds and descriptor matrices travel as integer millimeters; poses and
/// plane parameters keep full double precision.
struct RoomDescPayload {
  int room_id = 0;
  Pose3 room_pose;  // SE(3) center pose in the sender map frame
  int rings = 0;
  int sectors = 0;
  double max_radius = 0.0;
  std::vector<int64_t> matrix_mm;  // row-major rings x sectors
  std::vector<int64_t> cloud_mm;   // x, y, z triplets, room frame

  bool operator==(const RoomDescPayload&) const = default;
};

struct SharedRoom {
  int id = 0;
  Pose3 pose;
  bool operator==(const SharedRoom&) const = default;
};

struct SharedPlane {
  int id = 0;
  Eigen::Vector3d normal{1, 0, 0};
  double d = 0.0;
  bool operator==(const SharedPlane& o) const {
    return id == o.id && normal == o.normal && d == o.d;
  }
};

struct GraphSharePayload {
  std::vector<SharedRoom> rooms;
  std::vector<SharedPlane> planes;
  std::vector<std::pair<int, int>> edges;  // (room id, plane id)
  bool operator==(const GraphSharePayload&) const = default;
};

struct BrokerMessage {
  int version = 1;
  MessageType type = MessageType::Hello;
  int sender = 0;
  uint64_t seq = 0;
  RoomDescPayload room_desc;    // valid when type == RoomDesc
  GraphSharePayload graph_share;  // valid when type == GraphShare
  uint64_t ack_seq = 0;         // valid when type == Ack

  bool operator==(const BrokerMessage&) const = default;
};

inline bool operator==(const Pose3& a, const Pose3& b) {
  return a.rotation.coeffs() == b.rotation.coeffs() && a.translation == b.translation;
}

// ---------------------------------------------------------------------------
// Canonical JSON: sorted object keys (nlohmann objects iterate sorted),
// floats with 17 significant digits, no whitespace.

namespace detail {

inline void canonicalDump(const nlohmann::json& j, std::string& out) {
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      out.push_back('{');
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        canonicalDump(nlohmann::json(it.key()), out);
        out.push_back(':');
        canonicalDump(it.value(), out);
      }
      out.push_back('}');
      break;
    }
    case nlohmann::json::value_t::array: {
      out.push_back('[');
      for (size_t i = 0; i < j.size(); ++i) {
        if (i) out.push_back(',');
        canonicalDump(j[i], out);
      }
      out.push_back(']');
      break;
    }
    case nlohmann::json::value_t::string: {
      out.push_back('"');
      for (char c : j.get_ref<const std::string&>()) {
        switch (c) {
          case '"': out += "\\\""; break;
          case '\\': out += "\\\\"; break;
          case '\n': out += "\\n"; break;
          case '\r': out += "\\r"; break;
          case '\t': out += "\\t"; break;
          default:
            if (static_cast<unsigned char>(c) < 0x20) {
              char buf[8];
              std::snprintf(buf, sizeof(buf), "\\u%04x", c);
              out += buf;
            } else {
              out.push_back(c);
            }
        }
      }
      out.push_back('"');
      break;
    }
    case nlohmann::json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) throw MalformedPayloadError("non-finite number in payload");
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out += buf;
      break;
    }
    case nlohmann::json::value_t::number_integer:
      out += std::to_string(j.get<int64_t>());
      break;
    case nlohmann::json::value_t::number_unsigned:
      out += std::to_string(j.get<uint64_t>());
      break;
    case nlohmann::json::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      break;
    default:
      out += "null";
  }
}

inline nlohmann::json messageToJson(const BrokerMessage& m) {
  nlohmann::json j;
  j["version"] = m.version;
  j["type"] = messageTypeName(m.type);
  j["sender"] = m.sender;
  j["seq"] = m.seq;
  switch (m.type) {
    case MessageType::Hello:
      j["payload"] = nlohmann::json::object();
      break;
    case MessageType::RoomDesc: {
      const RoomDescPayload& p = m.room_desc;
      j["payload"] = {{"room_id", p.room_id},   {"pose", poseToJson(p.room_pose)},
                      {"rings", p.rings},       {"sectors", p.sectors},
                      {"max_radius", p.max_radius}, {"matrix_mm", p.matrix_mm},
                      {"cloud_mm", p.cloud_mm}};
      break;
    }
    case MessageType::GraphShare: {
      nlohmann::json rooms = nlohmann::json::array();
      for (const SharedRoom& r : m.graph_share.rooms) {
        rooms.push_back({{"id", r.id}, {"pose", poseToJson(r.pose)}});
      }
      nlohmann::json planes = nlohmann::json::array();
      for (const SharedPlane& p : m.graph_share.planes) {
        planes.push_back({{"id", p.id},
                          {"nx", p.normal.x()},
                          {"ny", p.normal.y()},
                          {"nz", p.normal.z()},
                          {"d", p.d}});
      }
      nlohmann::json edges = nlohmann::json::array();
      for (const auto& [r, p] : m.graph_share.edges) edges.push_back({r, p});
      j["payload"] = {{"rooms", rooms}, {"planes", planes}, {"edges", edges}};
      break;
    }
    case MessageType::Ack:
      j["payload"] = {{"ack_seq", m.ack_seq}};
      break;
  }
  return j;
}

inline MessageType messageTypeFromName(const std::string& name) {
  if (name == "HELLO") return MessageType::Hello;
  if (name == "ROOM_DESC") return MessageType::RoomDesc;
  if (name == "GRAPH_SHARE") return MessageType::GraphShare;
  if (name == "ACK") return MessageType::Ack;
  throw MalformedPayloadError("unknown message type '" + name + "'");
}

}  // namespace detail

inline std::string canonicalJson(const nlohmann::json& j) {
  std::string out;
  detail::canonicalDump(j, out);
  return out;
}

/// Frame a message: 4-byte big-endian payload length, then canonical JSON.
inline std::vector<uint8_t> encodeMessage(const BrokerMessage& m) {
  std::string body = canonicalJson(detail::messageToJson(m));
  std::vector<uint8_t> out;
  out.reserve(body.size() + 4);
  uint32_t n = static_cast<uint32_t>(body.size());
  out.push_back(static_cast<uint8_t>((n >> 24) & 0xff));
  out.push_back(static_cast<uint8_t>((n >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((n >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>(n & 0xff));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

inline BrokerMessage decodeMessage(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 4) throw TruncatedFrameError();
  uint32_t n = (static_cast<uint32_t>(bytes[0]) << 24) | (static_cast<uint32_t>(bytes[1]) << 16) |
               (static_cast<uint32_t>(bytes[2]) << 8) | static_cast<uint32_t>(bytes[3]);
  if (bytes.size() < 4u + n) throw TruncatedFrameError();

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin() + 4, bytes.begin() + 4 + n);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedPayloadError(e.what());
  }

  try {
    BrokerMessage m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw UnsupportedVersionError(m.version);
    m.type = detail::messageTypeFromName(j.at("type").get<std::string>());
    m.sender = j.at("sender").get<int>();
    m.seq = j.at("seq").get<uint64_t>();
    const nlohmann::json& p = j.at("payload");
    switch (m.type) {
      case MessageType::Hello:
        break;
      case MessageType::RoomDesc: {
        m.room_desc.room_id = p.at("room_id").get<int>();
        m.room_desc.room_pose = poseFromJson(p.at("pose"));
        m.room_desc.rings = p.at("rings").get<int>();
        m.room_desc.sectors = p.at("sectors").get<int>();
        m.room_desc.max_radius = p.at("max_radius").get<double>();
        m.room_desc.matrix_mm = p.at("matrix_mm").get<std::vector<int64_t>>();
        m.room_desc.cloud_mm = p.at("cloud_mm").get<std::vector<int64_t>>();
        if (m.room_desc.matrix_mm.size() !=
            static_cast<size_t>(m.room_desc.rings) * m.room_desc.sectors) {
          throw MalformedPayloadError("descriptor matrix size mismatch");
        }
        if (m.room_desc.cloud_mm.size() % 3 != 0) {
          throw MalformedPayloadError("cloud array not a multiple of 3");
        }
        break;
      }
      case MessageType::GraphShare: {
        for (const auto& r : p.at("rooms")) {
          m.graph_share.rooms.push_back({r.at("id").get<int>(), poseFromJson(r.at("pose"))});
        }
        for (const auto& pl : p.at("planes")) {
          SharedPlane sp;
          sp.id = pl.at("id").get<int>();
          sp.normal = Eigen::Vector3d(pl.at("nx").get<double>(), pl.at("ny").get<double>(),
                                      pl.at("nz").get<double>());
          sp.d = pl.at("d").get<double>();
          m.graph_share.planes.push_back(sp);
        }
        for (const auto& e : p.at("edges")) {
          m.graph_share.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        }
        break;
      }
      case MessageType::Ack:
        m.ack_seq = p.at("ack_seq").get<uint64_t>();
        break;
    }
    return m;
  } catch (const UnsupportedVersionError&) {
    throw;
  } catch (const MalformedPayloadError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedPayloadError(e.what());
  }
}

// quantization helpers (1 mm resolution)

inline std::vector<int64_t> cloudToMm(const PointCloud& cloud) {
  std::vector<int64_t> out;
  out.reserve(cloud.size() * 3);
  for (const Eigen::Vector3d& p : cloud) {
    out.push_back(std::llround(p.x() * 1000.0));
    out.push_back(std::llround(p.y() * 1000.0));
    out.push_back(std::llround(p.z() * 1000.0));
  }
  return out;
}

inline PointCloud mmToCloud(const std::vector<int64_t>& mm) {
  PointCloud out;
  out.reserve(mm.size() / 3);
  for (size_t i = 0; i + 2 < mm.size(); i += 3) {
    out.emplace_back(mm[i] * 1e-3, mm[i + 1] * 1e-3, mm[i + 2] * 1e-3);
  }
  return out;
}

inline std::vector<int64_t> matrixToMm(const Eigen::MatrixXd& m) {
  std::vector<int64_t> out;
  out.reserve(m.size());
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) out.push_back(std::llround(m(r, c) * 1000.0));
  }
  return out;
}

inline Eigen::MatrixXd mmToMatrix(const std::vector<int64_t>& mm, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = mm[static_cast<size_t>(r) * cols + c] * 1e-3;
  }
  return m;
}

}  // namespace roomgraph
