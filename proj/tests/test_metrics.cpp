#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "curvsdf/metrics.hpp"

using namespace curvsdf;
namespace fs = std::filesystem;

namespace {

UncertainMesh mesh_of(std::vector<Vec3> verts, std::vector<Eigen::Vector3i> tris) {
    UncertainMesh m;
    m.vertices = std::move(verts);
    m.uncertainty.assign(m.vertices.size(), 1.0);
    m.triangles = std::move(tris);
    return m;
}

// axis-aligned square [0,s]^2 at height z, two triangles
UncertainMesh square_mesh(double s, double z, double x0 = 0.0) {
    return mesh_of({{x0, 0, z}, {x0 + s, 0, z}, {x0 + s, s, z}, {x0, s, z}}, {{0, 1, 2}, {0, 2, 3}});
}

PointSample sample_of(std::vector<Vec3> pts) {
    PointSample s;
    s.points = std::move(pts);
    return s;
}

PointSample random_points(int n, uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    PointSample s;
    for (int i = 0; i < n; ++i) s.points.emplace_back(u(rng), u(rng), u(rng));
    return s;
}

}  // namespace

TEST_CASE("mesh samples stay inside their source triangle") {
    Vec3 A(0, 0, 0), B(2, 0, 1), C(0.5, 1.5, -0.3);
    UncertainMesh m = mesh_of({A, B, C}, {{0, 1, 2}});
    PointSample s = sample_mesh(m, 1000, 11, "tri");
    REQUIRE(s.points.size() == 1000);
    CHECK(s.source == "tri");
    CHECK(s.seed == 11);

    // barycentric certificate: p = A + u AB + v AC with u,v >= 0, u+v <= 1
    Eigen::Matrix<double, 3, 2> M;
    M.col(0) = B - A;
    M.col(1) = C - A;
    for (const Vec3& p : s.points) {
        Eigen::Vector2d uv = (M.transpose() * M).ldlt().solve(M.transpose() * (p - A));
        CHECK((A + M * uv - p).norm() < 1e-9);  // in the triangle plane
        CHECK(uv.x() >= -1e-9);
        CHECK(uv.y() >= -1e-9);
        CHECK(uv.x() + uv.y() <= 1.0 + 1e-9);
    }
}

TEST_CASE("triangle selection is proportional to area") {
    // area 1 triangle near x=0, area 3 triangle shifted to x>=10
    UncertainMesh m = mesh_of({{0, 0, 0}, {2, 0, 0}, {0, 1, 0}, {10, 0, 0}, {12, 0, 0}, {10, 3, 0}},
                              {{0, 1, 2}, {3, 4, 5}});
    PointSample s = sample_mesh(m, 10000, 5);
    int big = 0;
    for (const Vec3& p : s.points)
        if (p.x() >= 9.0) ++big;
    CHECK(std::abs(big / 10000.0 - 0.75) <= 0.03);
}

TEST_CASE("sampling is deterministic per seed") {
    UncertainMesh m = square_mesh(1.0, 0.0);
    PointSample a = sample_mesh(m, 500, 42);
    PointSample b = sample_mesh(m, 500, 42);
    PointSample c = sample_mesh(m, 500, 43);
    REQUIRE(a.points.size() == b.points.size());
    bool all_equal = true, any_diff = false;
    for (size_t i = 0; i < a.points.size(); ++i) {
        if (a.points[i] != b.points[i]) all_equal = false;
        if (a.points[i] != c.points[i]) any_diff = true;
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("degenerate meshes are rejected") {
    UncertainMesh empty;
    CHECK_THROWS(sample_mesh(empty, 10, 0));
    UncertainMesh flat = mesh_of({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2}});  // zero area
    CHECK_THROWS(sample_mesh(flat, 10, 0));
}

TEST_CASE("chamfer of a sample with itself is zero") {
    PointSample s = random_points(200, 3);
    CHECK(chamfer(s, s) == 0.0);
    CHECK(hausdorff(s, s) == 0.0);
}

TEST_CASE("parallel planes measure their separation") {
    const double d = 0.35;
    PointSample a = sample_mesh(square_mesh(2.0, 0.0), 20000, 1);
    PointSample b = sample_mesh(square_mesh(2.0, d), 20000, 2);
    CHECK(std::abs(chamfer(a, b) - d) / d < 0.02);
}

TEST_CASE("accelerated distances equal the brute-force sweep") {
    PointSample a = random_points(1000, 7);
    PointSample b = random_points(1000, 8);
    CHECK(std::abs(chamfer(a, b) - chamfer_bruteforce(a, b)) < 1e-12);
    CHECK(std::abs(hausdorff(a, b) - hausdorff_bruteforce(a, b)) < 1e-12);

    // clustered points stress the grid's cell-shell search
    PointSample c = random_points(500, 9, 0.01);
    c.points.emplace_back(5, 5, 5);
    CHECK(std::abs(chamfer(a, c) - chamfer_bruteforce(a, c)) < 1e-12);
    CHECK(std::abs(hausdorff(a, c) - hausdorff_bruteforce(a, c)) < 1e-12);
}

TEST_CASE("a single outlier sets the hausdorff distance") {
    PointSample sphere;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < 5000; ++i) {
        Vec3 v(gauss(rng), gauss(rng), gauss(rng));
        sphere.points.push_back(v.normalized());
    }
    PointSample with_outlier = sphere;
    with_outlier.points.push_back(Vec3(0, 0, 2.0));  // distance 1 from the surface

    CHECK(std::abs(hausdorff(sphere, with_outlier) - 1.0) < 0.02);
    CHECK(hausdorff(sphere, with_outlier) >= chamfer(sphere, with_outlier));
}

TEST_CASE("distances are symmetric and rigid-invariant") {
    PointSample a = random_points(400, 12);
    PointSample b = random_points(400, 13);
    CHECK(chamfer(a, b) == doctest::Approx(chamfer(b, a)).epsilon(1e-12));
    CHECK(hausdorff(a, b) == doctest::Approx(hausdorff(b, a)).epsilon(1e-12));

    Eigen::AngleAxisd rot(0.83, Vec3(0.2, -0.5, 0.4).normalized());
    Vec3 t(1.5, -0.7, 0.3);
    PointSample ar = a, br = b;
    for (Vec3& p : ar.points) p = rot * p + t;
    for (Vec3& p : br.points) p = rot * p + t;
    CHECK(std::abs(chamfer(ar, br) - chamfer(a, b)) < 1e-9);
    CHECK(std::abs(hausdorff(ar, br) - hausdorff(a, b)) < 1e-9);
}

TEST_CASE("metrics csv names its columns and the distance definition") {
    MetricsRow row;
    row.dataset = "synthetic";
    row.method = "curvsdf";
    row.resolution = "64";
    row.cd = 0.0123;
    row.hd = 0.2;
    row.n = 1000;
    row.seed = 7;
    fs::path path = fs::temp_directory_path() / "curvsdf_tests" / "metrics.csv";
    fs::create_directories(path.parent_path());
    save_metrics_csv({row}, path.string());

    std::ifstream in(path);
    std::string header, line;
    REQUIRE(std::getline(in, header));
    CHECK(header.find("dataset") != std::string::npos);
    CHECK(header.find("cd_definition") != std::string::npos);
    REQUIRE(std::getline(in, line));
    CHECK(line.find("synthetic") != std::string::npos);
    CHECK(line.find("mean") != std::string::npos);  // symmetric-mean variant recorded per row
}
