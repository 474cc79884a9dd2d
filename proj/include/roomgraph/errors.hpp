#pragma once

#include <stdexcept>
#include <string>

namespace roomgraph {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyScanError : Error {
  EmptyScanError() : Error("keyframe scan has no points") {}
};

struct DegeneratePlanesError : Error {
  explicit DegeneratePlanesError(const std::string& what) : Error(what) {}
};

struct EmptyRoomError : Error {
  explicit EmptyRoomError(int room_id)
      : Error("room " + std::to_string(room_id) + " has no assigned keyframes") {}
};

struct PoseInsideWallError : Error {
  PoseInsideWallError() : Error("sensor pose lies inside solid geometry") {}
};

struct DimensionMismatchError : Error {
  DimensionMismatchError() : Error("descriptor dimensions differ") {}
};

struct NoOverlapError : Error {
  NoOverlapError() : Error("source cloud does not overlap the target voxel grid") {}
};

struct SingularSystemError : Error {
  explicit SingularSystemError(const std::string& what) : Error(what) {}
};

struct MissingTransformError : Error {
  explicit MissingTransformError(int agent_id)
      : Error("no inter-agent transform established for peer " + std::to_string(agent_id)) {}
};

struct ProtocolViolationError : Error {
  explicit ProtocolViolationError(const std::string& what) : Error(what) {}
};

struct TruncatedFrameError : Error {
  TruncatedFrameError() : Error("wire frame shorter than its declared length") {}
};

struct MalformedPayloadError : Error {
  explicit MalformedPayloadError(const std::string& what) : Error(what) {}
};

struct UnsupportedVersionError : Error {
  explicit UnsupportedVersionError(int version)
      : Error("unsupported protocol version " + std::to_string(version)) {}
};

struct PeerUnreachableError : Error {
  explicit PeerUnreachableError(const std::string& what) : Error(what) {}
};

struct InvalidScenarioError : Error {
  explicit InvalidScenarioError(const std::string& field, const std::string& what)
      : Error("scenario field '" + field + "': " + what) {}
};

struct MismatchedWorldsError : Error {
  explicit MismatchedWorldsError(const std::string& what) : Error(what) {}
};

}  // namespace roomgraph
