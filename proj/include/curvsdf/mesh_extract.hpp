#pragma once

#include "curvsdf/neural.hpp"

namespace curvsdf {

/// Lattice of signed-distance and uncertainty values over an axis-aligned box.
/// Node (i,j,k) sits at lo + (i,j,k)/(res-1) * (hi-lo) componentwise.
struct ScalarField {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    int nx = 0, ny = 0, nz = 0;
    std::vector<double> psi;
    std::vector<double> w;

    size_t node(int i, int j, int k) const { return (static_cast<size_t>(k) * ny + j) * nx + i; }
    Vec3 position(int i, int j, int k) const {
        return Vec3(lo.x() + (hi.x() - lo.x()) * i / (nx - 1), lo.y() + (hi.y() - lo.y()) * j / (ny - 1),
                    lo.z() + (hi.z() - lo.z()) * k / (nz - 1));
    }
    void validate() const;
};

ScalarField evaluate_field(const NeuralField& net, const Vec3& lo, const Vec3& hi, int nx, int ny, int nz);

struct UncertainMesh {
    std::vector<Vec3> vertices;
    std::vector<double> uncertainty;  // per vertex, interpolated from node w
    std::vector<Eigen::Vector3i> triangles;
};

/// Marching cubes on the psi = 0 level set. A lattice node is invalid when
/// w <= tau; every triangle touching an edge with an invalid endpoint is
/// dropped, which opens the surface where observations are missing.
UncertainMesh marching_cubes_uncertain(const ScalarField& field, double tau);

void save_mesh_ply(const UncertainMesh& mesh, const std::string& path, bool binary = false);
void save_mesh_obj(const UncertainMesh& mesh, const std::string& path);
UncertainMesh load_mesh_ply(const std::string& path);

}  // namespace curvsdf
