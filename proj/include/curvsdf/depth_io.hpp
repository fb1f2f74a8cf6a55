#pragma once

#include <string>
#include <utility>
#include <vector>

#include "curvsdf/camera.hpp"

namespace curvsdf {

/// Intrinsics plus the raw-tick-to-meter scale of the associated depth files.
struct CameraConfig {
    Intrinsics intrinsics;
    double depth_scale = 5000.0;  // ticks per meter, TUM convention
};

CameraConfig load_intrinsics(const std::string& path);
void save_intrinsics(const CameraConfig& cfg, const std::string& path);

/// Load a 16-bit grayscale PNG or binary 16-bit PGM depth image.
/// Raw tick 0 marks an invalid pixel; otherwise depth = raw / depth_scale.
DepthFrame load_depth_frame(const std::string& path, double depth_scale, const Intrinsics& intrinsics);

/// Write depth back to 16-bit PNG or PGM (chosen by extension); invalid pixels become tick 0.
void save_depth_frame(const DepthFrame& frame, double depth_scale, const std::string& path);

struct TrajectoryEntry {
    double timestamp = 0;
    Pose pose;
};

/// TUM trajectory text: "timestamp tx ty tz qx qy qz qw", '#' comments.
std::vector<TrajectoryEntry> load_trajectory(const std::string& path);
void save_trajectory(const std::vector<TrajectoryEntry>& traj, const std::string& path);

}  // namespace curvsdf
