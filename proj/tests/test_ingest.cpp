#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "curvsdf/depth_io.hpp"
#include "curvsdf/render.hpp"

using namespace curvsdf;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
    fs::path dir = fs::temp_directory_path() / "curvsdf_tests";
    fs::create_directories(dir);
    return dir;
}

Intrinsics simple_intrinsics(int w, int h, double fx = 0, double cx = -1, double cy = -1) {
    Intrinsics in;
    in.width = w;
    in.height = h;
    in.fx = in.fy = (fx > 0) ? fx : w;
    in.cx = (cx >= 0) ? cx : 0.5 * (w - 1);
    in.cy = (cy >= 0) ? cy : 0.5 * (h - 1);
    return in;
}

DepthFrame constant_frame(int w, int h, double depth, const Intrinsics& in) {
    DepthFrame f;
    f.depth = Image<double>(w, h, depth);
    f.valid = Image<uint8_t>(w, h, 1);
    f.intrinsics = in;
    return f;
}

}  // namespace

TEST_CASE("depth file round trip scales raw ticks and keeps the zero sentinel") {
    Intrinsics in = simple_intrinsics(8, 6);
    DepthFrame f = constant_frame(8, 6, 1.0, in);  // tick 5000 at scale 5000
    f.depth.at(3, 2) = 0;
    f.valid.at(3, 2) = 0;
    f.depth.at(5, 4) = 0.25;

    for (const char* name : {"roundtrip.png", "roundtrip.pgm"}) {
        fs::path path = tmp_dir() / name;
        save_depth_frame(f, 5000.0, path.string());
        DepthFrame g = load_depth_frame(path.string(), 5000.0, in);
        CHECK(g.depth.at(0, 0) == doctest::Approx(1.0));
        CHECK(g.valid.at(3, 2) == 0);
        CHECK(g.depth.at(3, 2) == 0.0);
        CHECK(g.depth.at(5, 4) == doctest::Approx(0.25));
    }
}

TEST_CASE("depth load rejects intrinsics with mismatched dimensions") {
    Intrinsics in = simple_intrinsics(8, 6);
    DepthFrame f = constant_frame(8, 6, 1.0, in);
    fs::path path = tmp_dir() / "mismatch.png";
    save_depth_frame(f, 5000.0, path.string());
    CHECK_THROWS(load_depth_frame(path.string(), 5000.0, simple_intrinsics(4, 3)));
}

TEST_CASE("trajectory parses identity and translation lines") {
    fs::path path = tmp_dir() / "traj.txt";
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "1.0 1 2 3 0 0 0 1\n";
        out << "0.0 0 0 0 0 0 0 1\n";  // out of order on purpose
    }
    auto traj = load_trajectory(path.string());
    REQUIRE(traj.size() == 2);
    CHECK(traj[0].timestamp == 0.0);  // sorted by timestamp
    CHECK((traj[0].pose.R - Mat3::Identity()).norm() < 1e-12);
    CHECK(traj[0].pose.t.norm() < 1e-12);
    CHECK((traj[1].pose.R - Mat3::Identity()).norm() < 1e-12);
    CHECK((traj[1].pose.t - Vec3(1, 2, 3)).norm() < 1e-12);
}

TEST_CASE("trajectory rejects malformed and empty files") {
    fs::path bad = tmp_dir() / "traj_bad.txt";
    {
        std::ofstream out(bad);
        out << "0.0 0 0 0 0 0 1\n";  // 7 fields
    }
    CHECK_THROWS(load_trajectory(bad.string()));

    fs::path empty = tmp_dir() / "traj_empty.txt";
    std::ofstream(empty) << "# only comments\n";
    CHECK_THROWS(load_trajectory(empty.string()));
}

TEST_CASE("trajectory save/load round trip is exact to 1e-9") {
    std::vector<TrajectoryEntry> traj;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 16; ++i) {
        Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
        q.normalize();
        traj.push_back({static_cast<double>(i), Pose{q.toRotationMatrix(), Vec3(u(rng), u(rng), u(rng))}});
    }
    fs::path path = tmp_dir() / "traj_rt.txt";
    save_trajectory(traj, path.string());
    auto back = load_trajectory(path.string());
    REQUIRE(back.size() == traj.size());
    for (size_t i = 0; i < traj.size(); ++i) {
        CHECK((back[i].pose.R - traj[i].pose.R).norm() < 1e-9);
        CHECK((back[i].pose.t - traj[i].pose.t).norm() < 1e-9);
    }
}

TEST_CASE("intrinsics json round trip") {
    CameraConfig cfg;
    cfg.intrinsics = simple_intrinsics(640, 480, 525.0, 319.5, 239.5);
    cfg.depth_scale = 5000.0;
    fs::path path = tmp_dir() / "intr.json";
    save_intrinsics(cfg, path.string());
    CameraConfig back = load_intrinsics(path.string());
    CHECK(back.intrinsics.fx == doctest::Approx(525.0));
    CHECK(back.intrinsics.cx == doctest::Approx(319.5));
    CHECK(back.intrinsics.width == 640);
    CHECK(back.depth_scale == doctest::Approx(5000.0));
}

TEST_CASE("backprojection matches hand-computed pixels") {
    Intrinsics in;
    in.width = 8;
    in.height = 8;
    in.fx = in.fy = 1;
    in.cx = in.cy = 0;
    DepthFrame f = constant_frame(8, 8, 2.0, in);

    CHECK((backproject(f, 0, 0) - Vec3(0, 0, 2)).norm() < 1e-12);

    f.intrinsics.fx = f.intrinsics.fy = 2;
    CHECK((backproject(f, 2, 0) - Vec3(2, 0, 2)).norm() < 1e-12);

    f.intrinsics.fx = f.intrinsics.fy = 1;
    f.pose.t = Vec3(0, 0, 1);
    CHECK((backproject(f, 0, 0) - Vec3(0, 0, 3)).norm() < 1e-12);
}

TEST_CASE("rendered plane hits depth 1 at the center pixel") {
    Intrinsics in = simple_intrinsics(32, 32, 32, 15.5, 15.5);
    HalfSpaceShape plane(Vec3(0, 0, -1), -1.0);  // surface z = 1, outside toward camera
    DepthFrame f = render_depth(plane, Pose{}, in);
    // principal point sits between pixels; any near-center pixel views the plane near-axially
    REQUIRE(f.valid.at(15, 15));
    CHECK(f.depth.at(15, 15) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("rendered sphere center depth matches ray-sphere intersection") {
    Intrinsics in = simple_intrinsics(33, 33, 33, 16, 16);
    SphereShape sphere(Vec3(0, 0, 3), 1.0);
    DepthFrame f = render_depth(sphere, Pose{}, in);
    REQUIRE(f.valid.at(16, 16));
    CHECK(std::abs(f.depth.at(16, 16) - 2.0) < 1e-4);
}

TEST_CASE("camera looking away from the shape yields an all-invalid frame") {
    Intrinsics in = simple_intrinsics(16, 16);
    SphereShape sphere(Vec3(0, 0, -3), 1.0);  // behind the camera
    DepthFrame f = render_depth(sphere, Pose{}, in);
    for (uint8_t v : f.valid.data) CHECK(v == 0);
}

TEST_CASE("plane render/backproject round trip stays on the plane") {
    Intrinsics in = simple_intrinsics(48, 48);
    Vec3 n = Vec3(0.2, -0.1, -1).normalized();
    double d = n.dot(Vec3(0, 0, 1.5));  // plane through (0,0,1.5)
    HalfSpaceShape plane(n, d);
    Pose pose = look_at(Vec3(0.3, 0.2, -0.5), Vec3(0, 0, 1.5));
    DepthFrame f = render_depth(plane, pose, in);
    int checked = 0;
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x)
            if (f.valid.at(x, y)) {
                Vec3 p = backproject(f, x, y);
                CHECK(std::abs(n.dot(p) - d) < 1e-5);
                ++checked;
            }
    CHECK(checked > 100);
}

TEST_CASE("mesh and analytic renders of the same sphere agree per pixel") {
    Intrinsics in = simple_intrinsics(40, 40);
    Vec3 center(0, 0, 2.5);
    SphereShape sphere(center, 0.8);
    TriMesh mesh = TriMesh::uv_sphere(center, 0.8, 80, 140);  // > 10k triangles
    REQUIRE(mesh.triangles.size() >= 10000);

    DepthFrame fa = render_depth(sphere, Pose{}, in);
    DepthFrame fm = render_depth(mesh, Pose{}, in);
    int compared = 0;
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x)
            if (fa.valid.at(x, y) && fm.valid.at(x, y)) {
                if (fa.depth.at(x, y) > 2.1) continue;  // grazing rays amplify chord error
                CHECK(std::abs(fa.depth.at(x, y) - fm.depth.at(x, y)) < 1e-3);
                ++compared;
            }
    CHECK(compared > 200);
}
