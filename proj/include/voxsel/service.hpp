#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "voxsel/pipeline.hpp"

namespace voxsel {

struct ServiceOptions {
  std::filesystem::path cache_dir;   // feature cache shared by all sessions; empty = memory only
  std::filesystem::path static_dir;  // served under "/" when set
  SegmentParams params;              // defaults for new sessions
  FeatureConfig features;
  int workers = 1;
};

// HTTP front end over segment(). Every session owns its scene, scribbles and
// latest segmentation; at most one segment job runs per session.
// No authentication: bind to localhost.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and returns the port (an ephemeral one when `port` is 0).
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void listen();
  // bind() + listen() on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Pose syntax for GET /render: "view:K", "interp:A,B,S" or twelve numbers
// (row-major camera-to-world rotation, then the camera center). Intrinsics
// come from the reference camera except for "view:K".
Camera parse_pose(const std::string& pose, const std::vector<Camera>& rig);

}  // namespace voxsel
