#include "curvsdf/pose_tracking.hpp"

namespace curvsdf {

Mat3 so3_exp(const Vec3& omega) {
    double theta = omega.norm();
    Mat3 Omega;
    Omega << 0, -omega.z(), omega.y(), omega.z(), 0, -omega.x(), -omega.y(), omega.x(), 0;
    if (theta < 1e-12) return Mat3::Identity() + Omega;
    return Mat3::Identity() + std::sin(theta) / theta * Omega +
           (1.0 - std::cos(theta)) / (theta * theta) * Omega * Omega;
}

bool trilinear_psi(const VoxelGrid& grid, const Vec3& p, double& psi, double& weight) {
    // base corner: voxel whose center is the lower corner of the surrounding cell
    Vec3 q = (p - grid.center()) / grid.voxel_size();
    Eigen::Vector3i o = grid.offset();
    int i0 = static_cast<int>(std::floor(q.x())) + o.x();
    int j0 = static_cast<int>(std::floor(q.y())) + o.y();
    int k0 = static_cast<int>(std::floor(q.z())) + o.z();
    if (i0 < 0 || i0 + 1 >= grid.nx() || j0 < 0 || j0 + 1 >= grid.ny() || k0 < 0 || k0 + 1 >= grid.nz())
        return false;
    double fx = q.x() - std::floor(q.x());
    double fy = q.y() - std::floor(q.y());
    double fz = q.z() - std::floor(q.z());

    psi = 0;
    weight = 0;
    for (int dk = 0; dk < 2; ++dk) {
        for (int dj = 0; dj < 2; ++dj) {
            for (int di = 0; di < 2; ++di) {
                const Voxel& v = grid.at(i0 + di, j0 + dj, k0 + dk);
                if (v.w <= 0 || std::abs(v.psi) > grid.band()) return false;
                double c = (di ? fx : 1 - fx) * (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz);
                psi += c * v.psi;
                weight += c * v.w;
            }
        }
    }
    return true;
}

namespace {

struct NormalEquations {
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    double cost = 0;
    int count = 0;
};

NormalEquations accumulate(const VoxelGrid& grid, const std::vector<Vec3>& points, const Pose& pose,
                           const TrackingOptions& opts, bool with_jacobian) {
    NormalEquations ne;
    for (const Vec3& p : points) {
        Vec3 q = pose.to_world(p);
        double psi, w_acc;
        if (!trilinear_psi(grid, q, psi, w_acc)) continue;
        double w = std::min(w_acc, opts.w_saturation) / opts.w_saturation;
        ne.cost += w * psi * psi;
        ++ne.count;
        if (!with_jacobian) continue;

        auto idx = grid.locate(q);
        if (!idx) continue;
        const Voxel& vox = grid.at(idx->x(), idx->y(), idx->z());
        double gn = vox.g.norm();
        if (gn <= 0) continue;
        Vec3 ghat = vox.g / gn;
        Eigen::Matrix<double, 6, 1> J;
        J.head<3>() = ghat;
        J.tail<3>() = q.cross(ghat);
        ne.H += w * J * J.transpose();
        ne.g += w * psi * J;
    }
    return ne;
}

Pose apply_twist(const Eigen::Matrix<double, 6, 1>& xi, const Pose& pose) {
    Mat3 dR = so3_exp(xi.tail<3>());
    return Pose{dR * pose.R, dR * pose.t + xi.head<3>()};
}

}  // namespace

PoseEstimate estimate_pose(const VoxelGrid& grid, const DepthFrame& frame, const Pose& init,
                           const TrackingOptions& opts) {
    // subsample the frame point cloud (camera coordinates)
    std::vector<Vec3> points;
    int valid_count = 0;
    for (size_t i = 0; i < frame.valid.data.size(); ++i)
        valid_count += frame.valid.data[i];
    int stride = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(valid_count) / opts.max_points))));
    for (int n = 0; n < frame.height(); n += stride)
        for (int m = 0; m < frame.width(); m += stride)
            if (frame.valid.at(m, n)) points.push_back(frame.point_camera(m, n));

    PoseEstimate est;
    est.pose = init;

    NormalEquations ne = accumulate(grid, points, est.pose, opts, true);
    if (ne.count < 100) throw std::runtime_error("estimate_pose: insufficient valid correspondences");
    double cost = ne.cost;

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        est.iterations = iter + 1;
        double lambda = 0;
        Eigen::Matrix<double, 6, 1> xi;
        Pose candidate;
        double new_cost = 0;
        bool accepted = false;
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::Matrix<double, 6, 6> H = ne.H + lambda * Eigen::Matrix<double, 6, 6>::Identity();
            xi = H.ldlt().solve(-ne.g);
            if (xi.allFinite()) {
                candidate = apply_twist(xi, est.pose);
                NormalEquations trial = accumulate(grid, points, candidate, opts, false);
                if (trial.count >= 100 && trial.cost <= cost + 1e-15) {
                    new_cost = trial.cost;
                    accepted = true;
                    break;
                }
            }
            lambda = (lambda == 0) ? opts.damping : lambda * 10;
        }
        if (!accepted) {
            if (!xi.allFinite()) throw std::runtime_error("estimate_pose: singular normal equations");
            break;  // no descending step found; keep the current pose
        }
        est.pose = candidate;
        cost = new_cost;
        if (xi.norm() < opts.tol) {
            est.converged = true;
            break;
        }
        ne = accumulate(grid, points, est.pose, opts, true);
        if (ne.count < 100) throw std::runtime_error("estimate_pose: insufficient valid correspondences");
    }
    est.final_cost = cost;
    return est;
}

}  // namespace curvsdf
