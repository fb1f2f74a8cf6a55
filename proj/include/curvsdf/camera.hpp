#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace curvsdf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Simple dense image container, indexed by column m and row n.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    T& at(int m, int n) { return data[static_cast<size_t>(n) * width + m]; }
    const T& at(int m, int n) const { return data[static_cast<size_t>(n) * width + m]; }
    bool inside(int m, int n) const { return m >= 0 && m < width && n >= 0 && n < height; }
};

struct Intrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const {
        if (fx <= 0 || fy <= 0) throw std::invalid_argument("intrinsics: focal lengths must be positive");
        if (cx < 0 || cx >= width || cy < 0 || cy >= height)
            throw std::invalid_argument("intrinsics: principal point outside image");
    }

    Mat3 matrix() const {
        Mat3 Q;
        Q << fx, 0, cx, 0, fy, cy, 0, 0, 1;
        return Q;
    }
};

/// Rigid camera-to-world transform.
struct Pose {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    Vec3 to_world(const Vec3& p_cam) const { return R * p_cam + t; }
    Vec3 to_camera(const Vec3& p_world) const { return R.transpose() * (p_world - t); }

    Pose inverse() const { return Pose{R.transpose(), -(R.transpose() * t)}; }

    bool is_valid_rotation(double tol = 1e-9) const {
        return (R.transpose() * R - Mat3::Identity()).norm() < tol * 10 && std::abs(R.determinant() - 1.0) < tol * 10;
    }

    static Pose from_quaternion(double qx, double qy, double qz, double qw, const Vec3& t) {
        Eigen::Quaterniond q(qw, qx, qy, qz);
        q.normalize();
        return Pose{q.toRotationMatrix(), t};
    }
};

struct DepthFrame {
    Image<double> depth;          // meters, 0 on invalid pixels
    Image<uint8_t> valid;
    Intrinsics intrinsics;
    Pose pose;                    // camera-to-world

    int width() const { return depth.width; }
    int height() const { return depth.height; }
    bool is_valid(int m, int n) const { return depth.inside(m, n) && valid.at(m, n); }

    /// Camera-frame 3D point of a pixel: Q^-1 (m,n,1)^T z.
    Vec3 point_camera(int m, int n) const {
        double z = depth.at(m, n);
        return Vec3((m - intrinsics.cx) * z / intrinsics.fx, (n - intrinsics.cy) * z / intrinsics.fy, z);
    }
};

/// Back-project a valid pixel to the world frame: x = R Q^-1 (m,n,1)^T z + t.
inline Vec3 backproject(const DepthFrame& frame, int m, int n) {
    if (!frame.is_valid(m, n)) throw std::invalid_argument("backproject: invalid pixel");
    return frame.pose.to_world(frame.point_camera(m, n));
}

}  // namespace curvsdf
