#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "curvsdf/camera.hpp"

namespace curvsdf {

/// Analytic shape as a (conventional, positive-outside) signed distance function in world frame.
class Shape {
  public:
    virtual ~Shape() = default;
    virtual double distance(const Vec3& p) const = 0;
};

class SphereShape : public Shape {
  public:
    SphereShape(const Vec3& center, double radius) : center_(center), radius_(radius) {}
    double distance(const Vec3& p) const override { return (p - center_).norm() - radius_; }
    const Vec3& center() const { return center_; }
    double radius() const { return radius_; }

  private:
    Vec3 center_;
    double radius_;
};

/// Torus around the z axis through `center`: major radius R, tube radius r.
class TorusShape : public Shape {
  public:
    TorusShape(const Vec3& center, double major, double minor) : center_(center), major_(major), minor_(minor) {}
    double distance(const Vec3& p) const override {
        Vec3 q = p - center_;
        double ring = std::sqrt(q.x() * q.x() + q.y() * q.y()) - major_;
        return std::sqrt(ring * ring + q.z() * q.z()) - minor_;
    }
    const Vec3& center() const { return center_; }
    double major() const { return major_; }
    double minor() const { return minor_; }

  private:
    Vec3 center_;
    double major_, minor_;
};

class BoxShape : public Shape {
  public:
    BoxShape(const Vec3& center, const Vec3& half_extent) : center_(center), half_(half_extent) {}
    double distance(const Vec3& p) const override {
        Vec3 d = (p - center_).cwiseAbs() - half_;
        Vec3 outside = d.cwiseMax(0.0);
        return outside.norm() + std::min(d.maxCoeff(), 0.0);
    }

  private:
    Vec3 center_, half_;
};

/// Half-space {p | n.p <= d} (surface plane n.p = d, n pointing outside).
class HalfSpaceShape : public Shape {
  public:
    HalfSpaceShape(const Vec3& normal, double offset) : n_(normal.normalized()), d_(offset) {}
    double distance(const Vec3& p) const override { return n_.dot(p) - d_; }

  private:
    Vec3 n_;
    double d_;
};

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    static TriMesh uv_sphere(const Vec3& center, double radius, int rings, int segments);
};

struct RenderOptions {
    double step_tol = 1e-6;   // sphere-tracing hit tolerance in meters
    int max_steps = 256;
    double max_range = 100.0; // meters along the ray
};

/// Render a synthetic depth frame of an analytic shape by sphere tracing.
DepthFrame render_depth(const Shape& shape, const Pose& pose, const Intrinsics& intrinsics,
                        const RenderOptions& opts = {});

/// Render a triangle mesh by brute-force ray-triangle intersection.
DepthFrame render_depth(const TriMesh& mesh, const Pose& pose, const Intrinsics& intrinsics);

/// Camera pose at `eye` looking toward `target` (camera z axis points at the target).
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, -1, 0));

}  // namespace curvsdf
