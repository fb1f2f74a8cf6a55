#include "curvsdf/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <random>

namespace curvsdf {

PointSample sample_mesh(const UncertainMesh& mesh, int n, uint64_t seed, const std::string& source) {
    if (n < 1) throw std::invalid_argument("sample_mesh: need n >= 1");
    std::vector<double> cdf;
    cdf.reserve(mesh.triangles.size());
    double total = 0;
    for (const auto& t : mesh.triangles) {
        Vec3 ab = mesh.vertices[t.y()] - mesh.vertices[t.x()];
        Vec3 ac = mesh.vertices[t.z()] - mesh.vertices[t.x()];
        total += 0.5 * ab.cross(ac).norm();
        cdf.push_back(total);
    }
    if (cdf.empty() || total <= 0) throw std::invalid_argument("sample_mesh: mesh has no positive-area triangles");

    PointSample out;
    out.source = source;
    out.seed = seed;
    out.points.reserve(n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int s = 0; s < n; ++s) {
        double pick = u01(rng) * total;
        size_t ti = std::lower_bound(cdf.begin(), cdf.end(), pick) - cdf.begin();
        if (ti >= cdf.size()) ti = cdf.size() - 1;
        const auto& t = mesh.triangles[ti];
        double u = u01(rng), v = u01(rng);
        if (u + v > 1) {
            u = 1 - u;
            v = 1 - v;
        }
        const Vec3& a = mesh.vertices[t.x()];
        out.points.push_back(a + u * (mesh.vertices[t.y()] - a) + v * (mesh.vertices[t.z()] - a));
    }
    return out;
}

namespace {

// uniform hash grid over the reference set; shell sweep guarantees the exact
// nearest neighbor, so results match the brute-force path bit for bit
class NearestGrid {
  public:
    explicit NearestGrid(const std::vector<Vec3>& pts) : pts_(pts) {
        lo_ = hi_ = pts[0];
        for (const Vec3& p : pts) {
            lo_ = lo_.cwiseMin(p);
            hi_ = hi_.cwiseMax(p);
        }
        double diag = (hi_ - lo_).norm();
        double target = std::cbrt(static_cast<double>(pts.size()));
        cell_ = std::max(diag / std::max(target, 1.0), 1e-12);
        for (int a = 0; a < 3; ++a) dims_[a] = static_cast<int>((hi_[a] - lo_[a]) / cell_) + 1;
        cells_.resize(static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2]);
        for (size_t i = 0; i < pts.size(); ++i) cells_[cell_index(coords(pts[i]))].push_back(i);
    }

    double nearest_dist(const Vec3& q) const {
        Eigen::Vector3i qc = coords(q);
        double best = std::numeric_limits<double>::infinity();
        int max_shell = std::max({dims_[0], dims_[1], dims_[2]}) + 1;
        for (int s = 0; s <= max_shell; ++s) {
            if (s > 0 && best <= (s - 1) * cell_) break;
            scan_shell(q, qc, s, best);
        }
        return best;
    }

  private:
    Eigen::Vector3i coords(const Vec3& p) const {
        Eigen::Vector3i c;
        for (int a = 0; a < 3; ++a)
            c[a] = std::clamp(static_cast<int>((p[a] - lo_[a]) / cell_), 0, dims_[a] - 1);
        return c;
    }
    size_t cell_index(const Eigen::Vector3i& c) const {
        return (static_cast<size_t>(c.z()) * dims_[1] + c.y()) * dims_[0] + c.x();
    }

    void scan_cell(const Vec3& q, int x, int y, int z, double& best) const {
        if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) return;
        for (size_t i : cells_[cell_index({x, y, z})]) best = std::min(best, (pts_[i] - q).norm());
    }

    void scan_shell(const Vec3& q, const Eigen::Vector3i& qc, int s, double& best) const {
        if (s == 0) {
            scan_cell(q, qc.x(), qc.y(), qc.z(), best);
            return;
        }
        for (int dz = -s; dz <= s; ++dz)
            for (int dy = -s; dy <= s; ++dy)
                for (int dx = -s; dx <= s; ++dx)
                    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) == s)
                        scan_cell(q, qc.x() + dx, qc.y() + dy, qc.z() + dz, best);
    }

    const std::vector<Vec3>& pts_;
    Vec3 lo_, hi_;
    double cell_;
    int dims_[3];
    std::vector<std::vector<size_t>> cells_;
};

void directed_stats(const std::vector<Vec3>& from, const std::vector<Vec3>& to, double& mean, double& max) {
    NearestGrid grid(to);
    double sum = 0;
    max = 0;
    for (const Vec3& p : from) {
        double d = grid.nearest_dist(p);
        sum += d;
        max = std::max(max, d);
    }
    mean = sum / static_cast<double>(from.size());
}

void directed_stats_brute(const std::vector<Vec3>& from, const std::vector<Vec3>& to, double& mean, double& max) {
    double sum = 0;
    max = 0;
    for (const Vec3& p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& q : to) best = std::min(best, (p - q).norm());
        sum += best;
        max = std::max(max, best);
    }
    mean = sum / static_cast<double>(from.size());
}

void check_nonempty(const PointSample& a, const PointSample& b, const char* op) {
    if (a.points.empty() || b.points.empty()) throw std::invalid_argument(std::string(op) + ": empty point sample");
}

}  // namespace

double chamfer(const PointSample& a, const PointSample& b) {
    check_nonempty(a, b, "chamfer");
    double m_ab, x_ab, m_ba, x_ba;
    directed_stats(a.points, b.points, m_ab, x_ab);
    directed_stats(b.points, a.points, m_ba, x_ba);
    return 0.5 * (m_ab + m_ba);
}

double hausdorff(const PointSample& a, const PointSample& b) {
    check_nonempty(a, b, "hausdorff");
    double m_ab, x_ab, m_ba, x_ba;
    directed_stats(a.points, b.points, m_ab, x_ab);
    directed_stats(b.points, a.points, m_ba, x_ba);
    return std::max(x_ab, x_ba);
}

double chamfer_bruteforce(const PointSample& a, const PointSample& b) {
    check_nonempty(a, b, "chamfer");
    double m_ab, x_ab, m_ba, x_ba;
    directed_stats_brute(a.points, b.points, m_ab, x_ab);
    directed_stats_brute(b.points, a.points, m_ba, x_ba);
    return 0.5 * (m_ab + m_ba);
}

double hausdorff_bruteforce(const PointSample& a, const PointSample& b) {
    check_nonempty(a, b, "hausdorff");
    double m_ab, x_ab, m_ba, x_ba;
    directed_stats_brute(a.points, b.points, m_ab, x_ab);
    directed_stats_brute(b.points, a.points, m_ba, x_ba);
    return std::max(x_ab, x_ba);
}

void save_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "dataset,method,resolution,cd,hd,n,seed,cd_definition\n";
    out.precision(12);
    for (const auto& r : rows)
        out << r.dataset << "," << r.method << "," << r.resolution << "," << r.cd << "," << r.hd << "," << r.n << ","
            << r.seed << ",symmetric_mean_distance\n";
}

}  // namespace curvsdf
