#include <doctest.h>

#include <random>

#include "curvsdf/pose_tracking.hpp"
#include "curvsdf/render.hpp"

using namespace curvsdf;

namespace {

double rotation_error_deg(const Mat3& a, const Mat3& b) {
    double c = std::clamp(0.5 * ((a * b.transpose()).trace() - 1.0), -1.0, 1.0);
    return std::acos(c) * 180.0 / M_PI;
}

// a box with unequal extents pins all six pose degrees of freedom; a sphere
// would leave rotations about its center unobservable
VoxelGrid fused_box_grid(double vs = 0.025, int dims = 64) {
    VoxelGrid grid(Vec3::Zero(), dims, dims, dims, vs, 5);
    BoxShape box(Vec3::Zero(), Vec3(0.30, 0.35, 0.40));
    Intrinsics in;
    in.width = in.height = 160;
    in.fx = in.fy = 160;
    in.cx = in.cy = 79.5;
    DiffGeoOptions dg{10 * vs};
    for (int sx = -1; sx <= 1; sx += 2)
        for (int sy = -1; sy <= 1; sy += 2)
            for (int sz = -1; sz <= 1; sz += 2) {
                Vec3 eye = 2.0 * Vec3(sx, sy, sz).normalized();
                DepthFrame frame = render_depth(box, look_at(eye, Vec3::Zero()), in);
                integrate_frame(grid, frame, normal_map(frame, dg), curvature_maps(depth_derivatives(frame, dg)));
            }
    return grid;
}

DepthFrame box_frame(const Pose& pose) {
    Intrinsics in;
    in.width = in.height = 160;
    in.fx = in.fy = 160;
    in.cx = in.cy = 79.5;
    BoxShape box(Vec3::Zero(), Vec3(0.30, 0.35, 0.40));
    return render_depth(box, pose, in);
}

Pose perturbed(const Pose& pose, double deg, double mm, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    Vec3 axis = Vec3(u(rng), u(rng), u(rng)).normalized();
    Vec3 dt = Vec3(u(rng), u(rng), u(rng)).normalized() * (mm / 1000.0);
    Pose out;
    out.R = so3_exp(axis * deg * M_PI / 180.0) * pose.R;
    out.t = pose.t + dt;
    return out;
}

}  // namespace

TEST_CASE("axis-angle exponential reproduces known rotations") {
    CHECK((so3_exp(Vec3::Zero()) - Mat3::Identity()).norm() < 1e-12);
    Mat3 r90 = so3_exp(Vec3(0, 0, M_PI / 2));
    CHECK((r90 * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() < 1e-12);
    // rotation matrices stay orthonormal
    Mat3 r = so3_exp(Vec3(0.3, -0.7, 1.1));
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0));
}

TEST_CASE("trilinear interpolation is exact on a linear voxel field") {
    int dims = 16;
    double vs = 0.1;
    Vec3 a = Vec3(0.3, -0.2, 0.5).normalized();
    VoxelGrid g(Vec3::Zero(), dims, dims, dims, vs, 20);  // wide band so all voxels count
    for (int k = 0; k < dims; ++k)
        for (int j = 0; j < dims; ++j)
            for (int i = 0; i < dims; ++i) {
                Voxel& v = g.at(i, j, k);
                v.psi = a.dot(g.voxel_center(i, j, k));
                v.w = 1;
                v.g = a;
            }
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int t = 0; t < 500; ++t) {
        Vec3 p(u(rng), u(rng), u(rng));
        double psi, w;
        REQUIRE(trilinear_psi(g, p, psi, w));
        CHECK(std::abs(psi - a.dot(p)) < 1e-12);
    }
    double psi, w;
    CHECK(!trilinear_psi(g, Vec3(10, 0, 0), psi, w));
}

TEST_CASE("a frame with exactly zero residuals converges immediately") {
    // linear field grid whose zero set is the plane z = 0; trilinear interpolation
    // reproduces the plane exactly, and a constant-depth frame lands right on it
    int dims = 24;
    double vs = 0.05;
    VoxelGrid g(Vec3::Zero(), dims, dims, dims, vs, 5);
    for (int k = 0; k < dims; ++k)
        for (int j = 0; j < dims; ++j)
            for (int i = 0; i < dims; ++i) {
                Voxel& v = g.at(i, j, k);
                v.psi = g.voxel_center(i, j, k).z();
                v.w = 1;
                v.g = Vec3(0, 0, 1);
            }

    DepthFrame frame;
    frame.intrinsics.width = frame.intrinsics.height = 64;
    frame.intrinsics.fx = frame.intrinsics.fy = 64;
    frame.intrinsics.cx = frame.intrinsics.cy = 31.5;
    frame.depth = Image<double>(64, 64, 1.0);  // ray z=1 in camera frame hits z=0 in world
    frame.valid = Image<uint8_t>(64, 64, 1);
    Pose truth;
    truth.t = Vec3(0, 0, -1);
    frame.pose = truth;

    PoseEstimate est = estimate_pose(g, frame, truth);
    CHECK(est.converged);
    CHECK(est.final_cost < 1e-16);
    CHECK(rotation_error_deg(est.pose.R, truth.R) < 1e-8);
    CHECK((est.pose.t - truth.t).norm() < 1e-8);
}

TEST_CASE("perturbed poses are recovered on a clean fused box") {
    VoxelGrid grid = fused_box_grid();
    Pose truth = look_at(Vec3(1.1, 0.9, -1.3), Vec3::Zero());
    DepthFrame frame = box_frame(truth);

    for (uint64_t seed : {1, 2, 3}) {
        Pose init = perturbed(truth, 2.0, 20.0, seed);  // 2 degrees + 2 cm
        PoseEstimate est = estimate_pose(grid, frame, init);
        CHECK(est.iterations <= 20);
        CHECK(rotation_error_deg(est.pose.R, truth.R) <= 0.2);
        CHECK((est.pose.t - truth.t).norm() <= 0.002);
    }
}

TEST_CASE("accepted steps never increase the tracking cost") {
    VoxelGrid grid = fused_box_grid();
    Pose truth = look_at(Vec3(1.0, 0.7, -1.5), Vec3::Zero());
    DepthFrame frame = box_frame(truth);
    Pose init = perturbed(truth, 2.0, 20.0, 9);

    TrackingOptions no_steps;
    no_steps.max_iters = 0;
    double initial_cost = estimate_pose(grid, frame, init, no_steps).final_cost;
    PoseEstimate est = estimate_pose(grid, frame, init);
    CHECK(est.final_cost <= initial_cost + 1e-12);
}

TEST_CASE("tracking against an empty grid reports missing correspondences") {
    VoxelGrid g(Vec3::Zero(), 16, 16, 16, 0.05, 5);
    DepthFrame frame = box_frame(look_at(Vec3(0, 0, -2), Vec3::Zero()));
    CHECK_THROWS_AS(estimate_pose(g, frame, frame.pose), std::runtime_error);
}

TEST_CASE("depth noise degrades pose recovery gracefully") {
    VoxelGrid grid = fused_box_grid();
    Pose truth = look_at(Vec3(1.1, 0.8, -1.4), Vec3::Zero());
    DepthFrame clean = box_frame(truth);
    Pose init = perturbed(truth, 2.0, 20.0, 4);

    PoseEstimate base = estimate_pose(grid, clean, init);
    double base_err = (base.pose.t - truth.t).norm() + rotation_error_deg(base.pose.R, truth.R) * M_PI / 180.0;

    DepthFrame noisy = clean;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0, 1);
    for (size_t i = 0; i < noisy.depth.data.size(); ++i)
        if (noisy.valid.data[i]) noisy.depth.data[i] *= 1.0 + 0.005 * gauss(rng);
    PoseEstimate est = estimate_pose(grid, noisy, init);
    double noisy_err = (est.pose.t - truth.t).norm() + rotation_error_deg(est.pose.R, truth.R) * M_PI / 180.0;

    CHECK(noisy_err <= 5.0 * std::max(base_err, 1e-4));
}
