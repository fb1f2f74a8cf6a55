#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "curvsdf/grid.hpp"

namespace curvsdf {

enum class Stratum : uint8_t { Low = 0, Median = 1, High = 2, Unobserved = 3 };

struct TrainingSample {
    Vec3 p = Vec3::Zero();         // query point
    double psi = 0;                // interpolated target signed distance
    double w = 0;                  // interpolated target uncertainty in [0,1]
    Vec3 g = Vec3::Zero();         // unit field gradient of the containing voxel (zero if w == 0)
    double H = 0;                  // inherited mean curvature
    Vec3 pull_target = Vec3::Zero();  // voxel surface point v - g_hat * psi_v (pulling loss)
    Stratum stratum = Stratum::Unobserved;
};

struct CurvatureThresholds {
    double lo = 0;
    double hi = 0;
};

struct SamplerOptions {
    double w_saturation = 5.0;  // accumulated-weight saturation for the [0,1] confidence factor
};

/// Single-voxel Taylor interpolation: psi_p = psi_v + <g_hat, p - v>,
/// w_p = clamp((v_s - |psi_p|) / v_s, 0, 1) * confidence(v). Reads exactly one voxel.
TrainingSample interpolate_sample(const VoxelGrid& grid, const Vec3& p, const SamplerOptions& opts = {});

/// Mean-curvature cutoffs at q_lo / q_hi of the observed-voxel curvature range
/// (linear range interpolation; rank percentile behind the flag).
CurvatureThresholds curvature_thresholds(const VoxelGrid& grid, double q_lo = 0.3, double q_hi = 0.7,
                                         bool rank_percentile = false);

/// Exactly m samples from each curvature stratum plus m_unobs unobserved-space samples,
/// by rejection from the uniform distribution over the grid bounds. Deterministic per seed.
std::vector<TrainingSample> stratified_batch(const VoxelGrid& grid, int m, const CurvatureThresholds& thresholds,
                                             int m_unobs, uint64_t seed, const SamplerOptions& opts = {});

/// Plain uniform batch over the grid bounds (baseline for sampling comparisons).
/// Samples are still labeled by stratum when thresholds are given.
std::vector<TrainingSample> uniform_batch(const VoxelGrid& grid, int count, uint64_t seed,
                                          const CurvatureThresholds* thresholds = nullptr,
                                          const SamplerOptions& opts = {});

/// Debug CSV: px,py,pz,psi,w,gx,gy,gz,H,stratum.
void dump_batch_csv(const std::vector<TrainingSample>& batch, const std::string& path);

}  // namespace curvsdf
