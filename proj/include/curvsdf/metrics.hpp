#pragma once

#include "curvsdf/mesh_extract.hpp"

namespace curvsdf {

struct PointSample {
    std::vector<Vec3> points;
    std::string source;
    uint64_t seed = 0;
};

/// Area-weighted surface sampling: triangles drawn proportionally to area,
/// uniform barycentric placement inside each. Deterministic per seed.
PointSample sample_mesh(const UncertainMesh& mesh, int n, uint64_t seed, const std::string& source = "");

/// Symmetric mean nearest-neighbor distance (not squared).
double chamfer(const PointSample& a, const PointSample& b);

/// Max of the two directed nearest-neighbor maxima.
double hausdorff(const PointSample& a, const PointSample& b);

/// Reference O(N*M) nearest-neighbor sweep, kept for cross-checking the
/// grid-accelerated path.
double chamfer_bruteforce(const PointSample& a, const PointSample& b);
double hausdorff_bruteforce(const PointSample& a, const PointSample& b);

struct MetricsRow {
    std::string dataset;
    std::string method;
    std::string resolution;
    double cd = 0;
    double hd = 0;
    int n = 0;
    uint64_t seed = 0;
};

/// CSV with a cd_definition column naming the symmetric-mean variant used.
void save_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

}  // namespace curvsdf
