#pragma once

#include <optional>
#include <string>
#include <vector>

#include "curvsdf/camera.hpp"
#include "curvsdf/diffgeo.hpp"

namespace curvsdf {

struct Voxel {
    double psi = 0;    // signed distance, positive inside the surface
    double w = 0;      // accumulated uncertainty weight
    Vec3 g = Vec3::Zero();  // distance-field gradient (unnormalized running average)
    double H = 0;      // mean curvature (1/m)
    double K = 0;      // Gaussian curvature (1/m^2)
};

/// Dense truncated signed-distance grid augmented with per-voxel gradient and curvature.
class VoxelGrid {
  public:
    VoxelGrid() = default;
    VoxelGrid(const Vec3& center, int nx, int ny, int nz, double voxel_size, int truncation);

    const Vec3& center() const { return center_; }
    double voxel_size() const { return vs_; }
    int truncation() const { return T_; }
    double band() const { return vs_ * T_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    size_t size() const { return voxels_.size(); }

    Eigen::Vector3i offset() const { return {nx_ / 2, ny_ / 2, nz_ / 2}; }

    Vec3 voxel_center(int i, int j, int k) const {
        Eigen::Vector3i o = offset();
        return center_ + vs_ * Vec3(i - o.x(), j - o.y(), k - o.z());
    }

    /// One-step voxel lookup: round((p - c) / v_s) plus the center offset.
    std::optional<Eigen::Vector3i> locate(const Vec3& p) const;

    /// Axis-aligned bounds covering all voxel cells.
    void bounds(Vec3& lo, Vec3& hi) const;

    const Voxel& at(int i, int j, int k) const {
        ++reads_;
        return voxels_[index(i, j, k)];
    }
    Voxel& at(int i, int j, int k) { return voxels_[index(i, j, k)]; }

    uint64_t read_count() const { return reads_; }
    void reset_read_count() const { reads_ = 0; }

    const std::vector<Voxel>& voxels() const { return voxels_; }
    std::vector<Voxel>& voxels() { return voxels_; }

    size_t index(int i, int j, int k) const {
        return (static_cast<size_t>(k) * ny_ + j) * nx_ + i;
    }

  private:
    Vec3 center_ = Vec3::Zero();
    double vs_ = 0;
    int nx_ = 0, ny_ = 0, nz_ = 0;
    int T_ = 0;
    std::vector<Voxel> voxels_;
    mutable uint64_t reads_ = 0;
};

inline VoxelGrid create_grid(const Vec3& center, int nx, int ny, int nz, double voxel_size, int truncation) {
    return VoxelGrid(center, nx, ny, nz, voxel_size, truncation);
}

struct IntegrateOptions {
    // The printed weight rule keeps full weight where the signed distance is
    // non-positive and decays it on the positive (inside) side; flip_decay_side
    // swaps the two readings.
    bool flip_decay_side = false;
};

/// Fuse one depth frame into the grid by weighted running averages.
void integrate_frame(VoxelGrid& grid, const DepthFrame& frame, const NormalMap& normals,
                     const CurvatureMaps& curvatures, const IntegrateOptions& opts = {});

struct SurfacePointSet {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;    // unit field gradients
    std::vector<double> mean_curvature;
    std::vector<double> gauss_curvature;
    std::vector<double> weights;

    size_t size() const { return positions.size(); }
};

/// One surface point per sufficiently observed in-band voxel: x = v - g_hat * psi.
SurfacePointSet extract_points(const VoxelGrid& grid, double w_min);

void save_grid(const VoxelGrid& grid, const std::string& path);
VoxelGrid load_grid(const std::string& path);

/// ASCII PLY with normal and quality properties.
void save_points_ply(const SurfacePointSet& points, const std::string& path);

}  // namespace curvsdf
