#include "curvsdf/sampler.hpp"

#include <algorithm>
#include <fstream>

namespace curvsdf {

namespace {

const char* stratum_name(Stratum s) {
    switch (s) {
        case Stratum::Low: return "low";
        case Stratum::Median: return "median";
        case Stratum::High: return "high";
        default: return "unobserved";
    }
}

Stratum classify(double H, const CurvatureThresholds& th) {
    if (H < th.lo) return Stratum::Low;
    if (H < th.hi) return Stratum::Median;
    return Stratum::High;
}

}  // namespace

TrainingSample interpolate_sample(const VoxelGrid& grid, const Vec3& p, const SamplerOptions& opts) {
    auto idx = grid.locate(p);
    if (!idx) throw std::out_of_range("interpolate_sample: point outside grid bounds");

    TrainingSample s;
    s.p = p;
    const Voxel& vox = grid.at(idx->x(), idx->y(), idx->z());
    if (vox.w <= 0) return s;  // unobserved: psi undefined-as-0, w = 0

    Vec3 v = grid.voxel_center(idx->x(), idx->y(), idx->z());
    Vec3 ghat = vox.g.normalized();
    s.psi = vox.psi + ghat.dot(p - v);
    double confidence = std::min(vox.w, opts.w_saturation) / opts.w_saturation;
    s.w = std::clamp((grid.voxel_size() - std::abs(s.psi)) / grid.voxel_size(), 0.0, 1.0) * confidence;
    s.g = ghat;
    s.H = vox.H;
    s.pull_target = v - ghat * vox.psi;
    return s;
}

CurvatureThresholds curvature_thresholds(const VoxelGrid& grid, double q_lo, double q_hi, bool rank_percentile) {
    std::vector<double> values;
    for (const Voxel& v : grid.voxels())
        if (v.w > 0) values.push_back(v.H);
    if (values.empty()) throw std::runtime_error("curvature_thresholds: no observed voxels");

    CurvatureThresholds th;
    if (rank_percentile) {
        std::sort(values.begin(), values.end());
        auto rank = [&values](double q) {
            double pos = q * (values.size() - 1);
            size_t i = static_cast<size_t>(pos);
            double frac = pos - i;
            return (i + 1 < values.size()) ? values[i] * (1 - frac) + values[i + 1] * frac : values.back();
        };
        th.lo = rank(q_lo);
        th.hi = rank(q_hi);
    } else {
        auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
        th.lo = *lo_it + q_lo * (*hi_it - *lo_it);
        th.hi = *lo_it + q_hi * (*hi_it - *lo_it);
    }
    return th;
}

std::vector<TrainingSample> stratified_batch(const VoxelGrid& grid, int m, const CurvatureThresholds& thresholds,
                                             int m_unobs, uint64_t seed, const SamplerOptions& opts) {
    if (m < 0 || m_unobs < 0) throw std::invalid_argument("stratified_batch: negative counts");
    Vec3 lo, hi;
    grid.bounds(lo, hi);
    std::mt19937_64 rng(seed);

    // cells of observed voxels grouped by curvature class; drawing a cell
    // uniformly and a point uniformly inside it, then rejecting w = 0 points,
    // matches global uniform rejection restricted to that stratum but skips
    // the (possibly enormous) misses on rare strata
    std::array<std::vector<size_t>, 3> cells;
    for (int k = 0; k < grid.nz(); ++k)
        for (int j = 0; j < grid.ny(); ++j)
            for (int i = 0; i < grid.nx(); ++i) {
                const Voxel& v = grid.at(i, j, k);
                if (v.w > 0) cells[static_cast<int>(classify(v.H, thresholds))].push_back(grid.index(i, j, k));
            }

    auto fail = [](Stratum s) {
        throw std::runtime_error(std::string("stratified_batch: stratum '") + stratum_name(s) +
                                 "' unreachable within attempt budget");
    };

    std::vector<TrainingSample> out;
    out.reserve(3 * m + m_unobs);
    const double half = 0.5 * grid.voxel_size();
    std::uniform_real_distribution<double> uo(-half, half);
    for (int b = 0; b < 3; ++b) {
        if (m > 0 && cells[b].empty()) fail(static_cast<Stratum>(b));
        std::uniform_int_distribution<size_t> pick(0, cells[b].empty() ? 0 : cells[b].size() - 1);
        long budget = 20000L * std::max(m, 1);
        int kept = 0;
        while (kept < m && budget-- > 0) {
            size_t idx = cells[b][pick(rng)];
            int i = static_cast<int>(idx % grid.nx());
            int j = static_cast<int>((idx / grid.nx()) % grid.ny());
            int k = static_cast<int>(idx / (static_cast<size_t>(grid.nx()) * grid.ny()));
            Vec3 p = grid.voxel_center(i, j, k) + Vec3(uo(rng), uo(rng), uo(rng));
            TrainingSample s = interpolate_sample(grid, p, opts);
            if (s.w <= 0) continue;  // interpolated outside the reliable band
            s.stratum = static_cast<Stratum>(b);
            out.push_back(s);
            ++kept;
        }
        if (kept < m) fail(static_cast<Stratum>(b));
    }

    std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y()), uz(lo.z(), hi.z());
    long budget = 20000L * std::max(m_unobs, 1);
    int kept = 0;
    while (kept < m_unobs && budget-- > 0) {
        TrainingSample s = interpolate_sample(grid, Vec3(ux(rng), uy(rng), uz(rng)), opts);
        if (s.w > 0) continue;
        out.push_back(s);
        ++kept;
    }
    if (kept < m_unobs) fail(Stratum::Unobserved);
    return out;
}

std::vector<TrainingSample> uniform_batch(const VoxelGrid& grid, int count, uint64_t seed,
                                          const CurvatureThresholds* thresholds, const SamplerOptions& opts) {
    Vec3 lo, hi;
    grid.bounds(lo, hi);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y()), uz(lo.z(), hi.z());
    std::vector<TrainingSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        TrainingSample s = interpolate_sample(grid, Vec3(ux(rng), uy(rng), uz(rng)), opts);
        if (s.w > 0 && thresholds) s.stratum = classify(s.H, *thresholds);
        out.push_back(s);
    }
    return out;
}

void dump_batch_csv(const std::vector<TrainingSample>& batch, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "px,py,pz,psi,w,gx,gy,gz,H,stratum\n";
    out.precision(12);
    for (const auto& s : batch) {
        out << s.p.x() << "," << s.p.y() << "," << s.p.z() << "," << s.psi << "," << s.w << "," << s.g.x() << ","
            << s.g.y() << "," << s.g.z() << "," << s.H << "," << stratum_name(s.stratum) << "\n";
    }
}

}  // namespace curvsdf
