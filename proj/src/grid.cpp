#include "curvsdf/grid.hpp"

#include <cstring>
#include <fstream>

namespace curvsdf {

VoxelGrid::VoxelGrid(const Vec3& center, int nx, int ny, int nz, double voxel_size, int truncation)
    : center_(center), vs_(voxel_size), nx_(nx), ny_(ny), nz_(nz), T_(truncation) {
    if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("grid dims must be >= 1");
    if (voxel_size <= 0) throw std::invalid_argument("voxel size must be positive");
    if (truncation < 1) throw std::invalid_argument("truncation must be >= 1 voxel");
    voxels_.resize(static_cast<size_t>(nx) * ny * nz);
}

std::optional<Eigen::Vector3i> VoxelGrid::locate(const Vec3& p) const {
    Vec3 q = (p - center_) / vs_;
    Eigen::Vector3i idx(static_cast<int>(std::lround(q.x())), static_cast<int>(std::lround(q.y())),
                        static_cast<int>(std::lround(q.z())));
    idx += offset();
    if (idx.x() < 0 || idx.x() >= nx_ || idx.y() < 0 || idx.y() >= ny_ || idx.z() < 0 || idx.z() >= nz_)
        return std::nullopt;
    return idx;
}

void VoxelGrid::bounds(Vec3& lo, Vec3& hi) const {
    Eigen::Vector3i o = offset();
    lo = center_ - vs_ * (o.cast<double>() + Vec3::Constant(0.5));
    hi = center_ + vs_ * (Vec3(nx_ - 1 - o.x(), ny_ - 1 - o.y(), nz_ - 1 - o.z()) + Vec3::Constant(0.5));
}

void integrate_frame(VoxelGrid& grid, const DepthFrame& frame, const NormalMap& normals,
                     const CurvatureMaps& curvatures, const IntegrateOptions& opts) {
    const Intrinsics& K = frame.intrinsics;
    const Pose inv = frame.pose.inverse();
    const double band = grid.band();

    for (int k = 0; k < grid.nz(); ++k) {
        for (int j = 0; j < grid.ny(); ++j) {
            for (int i = 0; i < grid.nx(); ++i) {
                Vec3 v = grid.voxel_center(i, j, k);
                Vec3 p_cam = inv.R * v + inv.t;
                if (p_cam.z() <= 1e-9) continue;
                int m = static_cast<int>(std::lround(K.fx * p_cam.x() / p_cam.z() + K.cx));
                int n = static_cast<int>(std::lround(K.fy * p_cam.y() / p_cam.z() + K.cy));
                if (!frame.depth.inside(m, n) || !frame.valid.at(m, n)) continue;
                if (!normals.valid.at(m, n) || !curvatures.valid.at(m, n)) continue;

                Vec3 x = frame.pose.to_world(frame.point_camera(m, n));
                Vec3 n_world = frame.pose.R * normals.n.at(m, n);  // camera-facing surface normal
                double d = (x - v).dot(n_world);                    // point-to-plane, positive inside

                // the ray through the voxel rarely hits the nearest surface point;
                // walk the projective seed toward the foot point v + d*n until the
                // association is stable, and drop observations whose walk runs off
                // the valid map (occluded voxels seen past a silhouette)
                bool stable = false;
                for (int it = 0; it < 8; ++it) {
                    Vec3 foot = v + d * n_world;
                    Vec3 f_cam = inv.R * foot + inv.t;
                    if (f_cam.z() <= 1e-9) break;
                    int m2 = static_cast<int>(std::lround(K.fx * f_cam.x() / f_cam.z() + K.cx));
                    int n2 = static_cast<int>(std::lround(K.fy * f_cam.y() / f_cam.z() + K.cy));
                    if (m2 == m && n2 == n) {
                        stable = true;
                        break;
                    }
                    if (!frame.depth.inside(m2, n2) || !frame.valid.at(m2, n2) || !normals.valid.at(m2, n2) ||
                        !curvatures.valid.at(m2, n2))
                        break;
                    m = m2;
                    n = n2;
                    x = frame.pose.to_world(frame.point_camera(m, n));
                    n_world = frame.pose.R * normals.n.at(m, n);
                    double d2 = (x - v).dot(n_world);
                    if (std::abs(d2 - d) < 0.05 * grid.voxel_size()) {
                        d = d2;
                        stable = true;
                        break;
                    }
                    d = d2;
                }
                if (!stable) continue;

                double w_upd;
                if (!opts.flip_decay_side) {
                    if (d <= 0)
                        w_upd = (d >= -band) ? 1.0 : 0.0;
                    else
                        w_upd = (d <= band) ? 1.0 - d / band : 0.0;
                } else {
                    if (d >= 0)
                        w_upd = (d <= band) ? 1.0 : 0.0;
                    else
                        w_upd = (d >= -band) ? 1.0 + d / band : 0.0;
                }
                if (w_upd <= 0) continue;

                Voxel& vox = grid.at(i, j, k);
                double denom = vox.w + w_upd;
                vox.psi = (vox.w * vox.psi + w_upd * d) / denom;
                // store the distance-field gradient: points inward under the
                // positive-inside convention, i.e. opposite the observed normal
                vox.g = (vox.w * vox.g - w_upd * n_world) / denom;
                vox.H = (vox.w * vox.H + w_upd * curvatures.H.at(m, n)) / denom;
                vox.K = (vox.w * vox.K + w_upd * curvatures.K.at(m, n)) / denom;
                vox.w = denom;
                if (vox.g.norm() < 1e-12) vox = Voxel{};  // opposing normals cancelled out
            }
        }
    }
}

SurfacePointSet extract_points(const VoxelGrid& grid, double w_min) {
    if (w_min <= 0) throw std::invalid_argument("w_min must be positive");
    SurfacePointSet out;
    for (int k = 0; k < grid.nz(); ++k) {
        for (int j = 0; j < grid.ny(); ++j) {
            for (int i = 0; i < grid.nx(); ++i) {
                const Voxel& vox = grid.at(i, j, k);
                if (vox.w < w_min || std::abs(vox.psi) >= grid.band()) continue;
                double gn = vox.g.norm();
                if (gn <= 0) continue;
                Vec3 ghat = vox.g / gn;
                out.positions.push_back(grid.voxel_center(i, j, k) - ghat * vox.psi);
                out.normals.push_back(ghat);
                out.mean_curvature.push_back(vox.H);
                out.gauss_curvature.push_back(vox.K);
                out.weights.push_back(vox.w);
            }
        }
    }
    return out;
}

namespace {

constexpr char kMagic[4] = {'C', 'S', 'D', 'F'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated grid file");
    return v;
}

}  // namespace

void save_grid(const VoxelGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, grid.center().x());
    put(out, grid.center().y());
    put(out, grid.center().z());
    put(out, grid.voxel_size());
    put(out, static_cast<int32_t>(grid.nx()));
    put(out, static_cast<int32_t>(grid.ny()));
    put(out, static_cast<int32_t>(grid.nz()));
    put(out, static_cast<int32_t>(grid.truncation()));
    for (const Voxel& v : grid.voxels()) {
        put(out, static_cast<float>(v.psi));
        put(out, static_cast<float>(v.w));
        put(out, static_cast<float>(v.g.x()));
        put(out, static_cast<float>(v.g.y()));
        put(out, static_cast<float>(v.g.z()));
        put(out, static_cast<float>(v.H));
        put(out, static_cast<float>(v.K));
    }
    if (!out) throw std::runtime_error("write error: " + path);
}

VoxelGrid load_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bad grid magic: " + path);
    uint32_t version = get<uint32_t>(in);
    if (version != kVersion) throw std::runtime_error("unsupported grid version: " + path);
    double cx = get<double>(in), cy = get<double>(in), cz = get<double>(in);
    Vec3 center(cx, cy, cz);
    double vs = get<double>(in);
    int nx = get<int32_t>(in), ny = get<int32_t>(in), nz = get<int32_t>(in), T = get<int32_t>(in);
    VoxelGrid grid(center, nx, ny, nz, vs, T);
    for (Voxel& v : grid.voxels()) {
        v.psi = get<float>(in);
        v.w = get<float>(in);
        v.g.x() = get<float>(in);
        v.g.y() = get<float>(in);
        v.g.z() = get<float>(in);
        v.H = get<float>(in);
        v.K = get<float>(in);
    }
    return grid;
}

void save_points_ply(const SurfacePointSet& points, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n"
           "property float nx\nproperty float ny\nproperty float nz\n"
           "property float quality\nend_header\n";
    out.precision(9);
    for (size_t i = 0; i < points.size(); ++i) {
        out << points.positions[i].x() << " " << points.positions[i].y() << " " << points.positions[i].z() << " "
            << points.normals[i].x() << " " << points.normals[i].y() << " " << points.normals[i].z() << " "
            << points.weights[i] << "\n";
    }
}

}  // namespace curvsdf
