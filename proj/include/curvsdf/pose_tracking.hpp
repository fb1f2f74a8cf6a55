#pragma once

#include "curvsdf/grid.hpp"

namespace curvsdf {

struct PoseEstimate {
    Pose pose;
    double final_cost = 0;
    int iterations = 0;
    bool converged = false;
};

struct TrackingOptions {
    int max_iters = 20;
    double tol = 1e-6;          // stop when the twist update norm drops below this
    double damping = 1e-4;      // Levenberg fallback on singular / ascending steps
    int max_points = 20000;     // frame subsampling cap
    double w_saturation = 5.0;  // residual weight saturation, as in the sampler
};

/// Trilinear signed-distance interpolation over the 8 surrounding voxels.
/// Returns false when any corner voxel is unobserved or outside the truncation band.
bool trilinear_psi(const VoxelGrid& grid, const Vec3& p, double& psi, double& weight);

/// Frame-to-model Gauss-Newton alignment minimizing sum w_j psi(R p_j + t)^2
/// over a left-multiplied SE(3) twist, using stored voxel gradients as Jacobians.
PoseEstimate estimate_pose(const VoxelGrid& grid, const DepthFrame& frame, const Pose& init,
                           const TrackingOptions& opts = {});

/// Rodrigues exponential of an axis-angle vector.
Mat3 so3_exp(const Vec3& omega);

}  // namespace curvsdf
