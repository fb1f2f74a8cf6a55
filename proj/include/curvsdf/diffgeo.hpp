#pragma once

#include "curvsdf/camera.hpp"

namespace curvsdf {

/// Metric first/second depth derivatives of the Monge patch z = D(x, y),
/// where (x, y) are lateral camera-frame coordinates in meters.
struct DerivativeMaps {
    Image<double> dm, dn;          // dz/dx, dz/dy (dimensionless slopes)
    Image<double> dmm, dnn, dmn;   // second partials (1/m)
    Image<uint8_t> valid;
};

struct CurvatureMaps {
    Image<double> H;  // mean curvature (1/m)
    Image<double> K;  // Gaussian curvature (1/m^2)
    Image<uint8_t> valid;
};

struct NormalMap {
    Image<Vec3> n;  // unit, camera frame, oriented toward the camera
    Image<uint8_t> valid;
};

struct DiffGeoOptions {
    // Neighbor depth jumps beyond this (meters) are treated as occlusion edges
    // and invalidate the stencil; callers typically pass 10 * voxel_size.
    double max_depth_jump = 0.1;
};

DerivativeMaps depth_derivatives(const DepthFrame& frame, const DiffGeoOptions& opts = {});
CurvatureMaps curvature_maps(const DerivativeMaps& deriv);
NormalMap normal_map(const DepthFrame& frame, const DiffGeoOptions& opts = {});

/// Affine-scaled PGM heatmap dump of a scalar map for debugging.
void dump_heatmap_pgm(const Image<double>& map, const Image<uint8_t>& valid, const std::string& path);

}  // namespace curvsdf
