#include "curvsdf/render.hpp"

#include <limits>

namespace curvsdf {

TriMesh TriMesh::uv_sphere(const Vec3& center, double radius, int rings, int segments) {
    TriMesh mesh;
    // rings+1 latitude rows including both poles
    for (int i = 0; i <= rings; ++i) {
        double phi = M_PI * i / rings;
        for (int j = 0; j < segments; ++j) {
            double theta = 2.0 * M_PI * j / segments;
            mesh.vertices.push_back(center + radius * Vec3(std::sin(phi) * std::cos(theta),
                                                           std::sin(phi) * std::sin(theta), std::cos(phi)));
        }
    }
    auto idx = [segments](int i, int j) { return i * segments + (j % segments); };
    for (int i = 0; i < rings; ++i) {
        for (int j = 0; j < segments; ++j) {
            int a = idx(i, j), b = idx(i + 1, j), c = idx(i + 1, j + 1), d = idx(i, j + 1);
            if (i > 0) mesh.triangles.push_back({a, b, d});
            if (i < rings - 1) mesh.triangles.push_back({b, c, d});
        }
    }
    return mesh;
}

DepthFrame render_depth(const Shape& shape, const Pose& pose, const Intrinsics& intrinsics,
                        const RenderOptions& opts) {
    if (intrinsics.fx == 0 || intrinsics.fy == 0) throw std::invalid_argument("render_depth: degenerate intrinsics");
    DepthFrame frame;
    frame.intrinsics = intrinsics;
    frame.pose = pose;
    frame.depth = Image<double>(intrinsics.width, intrinsics.height, 0.0);
    frame.valid = Image<uint8_t>(intrinsics.width, intrinsics.height, 0);

    for (int n = 0; n < intrinsics.height; ++n) {
        for (int m = 0; m < intrinsics.width; ++m) {
            Vec3 dir_cam((m - intrinsics.cx) / intrinsics.fx, (n - intrinsics.cy) / intrinsics.fy, 1.0);
            double dn = dir_cam.norm();
            Vec3 dir = pose.R * (dir_cam / dn);
            double s = 0.0;
            for (int step = 0; step < opts.max_steps && s < opts.max_range; ++step) {
                double d = shape.distance(pose.t + s * dir);
                if (d < opts.step_tol) {
                    frame.depth.at(m, n) = s / dn;  // distance along the optical axis
                    frame.valid.at(m, n) = 1;
                    break;
                }
                s += d;
            }
        }
    }
    return frame;
}

namespace {

// Moller-Trumbore; returns ray parameter or negative on miss.
double ray_triangle(const Vec3& orig, const Vec3& dir, const Vec3& v0, const Vec3& v1, const Vec3& v2) {
    const double eps = 1e-12;
    Vec3 e1 = v1 - v0, e2 = v2 - v0;
    Vec3 pvec = dir.cross(e2);
    double det = e1.dot(pvec);
    if (std::abs(det) < eps) return -1.0;
    double inv_det = 1.0 / det;
    Vec3 tvec = orig - v0;
    double u = tvec.dot(pvec) * inv_det;
    if (u < 0.0 || u > 1.0) return -1.0;
    Vec3 qvec = tvec.cross(e1);
    double v = dir.dot(qvec) * inv_det;
    if (v < 0.0 || u + v > 1.0) return -1.0;
    return e2.dot(qvec) * inv_det;
}

}  // namespace

DepthFrame render_depth(const TriMesh& mesh, const Pose& pose, const Intrinsics& intrinsics) {
    if (intrinsics.fx == 0 || intrinsics.fy == 0) throw std::invalid_argument("render_depth: degenerate intrinsics");
    DepthFrame frame;
    frame.intrinsics = intrinsics;
    frame.pose = pose;
    frame.depth = Image<double>(intrinsics.width, intrinsics.height, 0.0);
    frame.valid = Image<uint8_t>(intrinsics.width, intrinsics.height, 0);

    for (int n = 0; n < intrinsics.height; ++n) {
        for (int m = 0; m < intrinsics.width; ++m) {
            Vec3 dir_cam((m - intrinsics.cx) / intrinsics.fx, (n - intrinsics.cy) / intrinsics.fy, 1.0);
            Vec3 dir = pose.R * dir_cam;  // parameterized so the ray parameter equals camera z
            double best = std::numeric_limits<double>::infinity();
            for (const auto& tri : mesh.triangles) {
                double z = ray_triangle(pose.t, dir, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                                        mesh.vertices[tri[2]]);
                if (z > 1e-9 && z < best) best = z;
            }
            if (std::isfinite(best)) {
                frame.depth.at(m, n) = best;
                frame.valid.at(m, n) = 1;
            }
        }
    }
    return frame;
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    Vec3 z = (target - eye).normalized();
    Vec3 x = up.cross(z);
    if (x.norm() < 1e-9) x = Vec3(1, 0, 0).cross(z);
    if (x.norm() < 1e-9) x = Vec3(0, 1, 0).cross(z);
    x.normalize();
    Vec3 y = z.cross(x);
    Pose pose;
    pose.R.col(0) = x;
    pose.R.col(1) = y;
    pose.R.col(2) = z;
    pose.t = eye;
    return pose;
}

}  // namespace curvsdf
