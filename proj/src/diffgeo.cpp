#include "curvsdf/diffgeo.hpp"

#include <fstream>

namespace curvsdf {

namespace {

// Pixel-space central differences of a scalar map, mapped to metric (x, y)
// derivatives through the Jacobian of (m, n) -> (x, y) at each pixel.
struct MetricDiff {
    Image<double> fx_map, fy_map;  // df/dx, df/dy
    Image<uint8_t> valid;
};

MetricDiff metric_gradient(const Image<double>& f, const Image<uint8_t>& valid_in, const DepthFrame& frame,
                           double max_jump) {
    const int w = f.width, h = f.height;
    const Intrinsics& K = frame.intrinsics;
    MetricDiff out;
    out.fx_map = Image<double>(w, h, 0.0);
    out.fy_map = Image<double>(w, h, 0.0);
    out.valid = Image<uint8_t>(w, h, 0);

    for (int n = 1; n < h - 1; ++n) {
        for (int m = 1; m < w - 1; ++m) {
            if (!valid_in.at(m, n) || !valid_in.at(m - 1, n) || !valid_in.at(m + 1, n) ||
                !valid_in.at(m, n - 1) || !valid_in.at(m, n + 1))
                continue;
            double z = frame.depth.at(m, n);
            if (std::abs(frame.depth.at(m - 1, n) - z) > max_jump ||
                std::abs(frame.depth.at(m + 1, n) - z) > max_jump ||
                std::abs(frame.depth.at(m, n - 1) - z) > max_jump ||
                std::abs(frame.depth.at(m, n + 1) - z) > max_jump)
                continue;

            double fm = 0.5 * (f.at(m + 1, n) - f.at(m - 1, n));
            double fn = 0.5 * (f.at(m, n + 1) - f.at(m, n - 1));
            double zm = 0.5 * (frame.depth.at(m + 1, n) - frame.depth.at(m - 1, n));
            double zn = 0.5 * (frame.depth.at(m, n + 1) - frame.depth.at(m, n - 1));

            // x = (m-cx) z / fx, y = (n-cy) z / fy, differenced the same way as f
            // so that fields linear in x or y come out exact
            double xm = 0.5 *
                        ((m + 1 - K.cx) * frame.depth.at(m + 1, n) - (m - 1 - K.cx) * frame.depth.at(m - 1, n)) /
                        K.fx;
            double xn = (m - K.cx) * zn / K.fx;
            double ym = (n - K.cy) * zm / K.fy;
            double yn = 0.5 *
                        ((n + 1 - K.cy) * frame.depth.at(m, n + 1) - (n - 1 - K.cy) * frame.depth.at(m, n - 1)) /
                        K.fy;
            double det = xm * yn - xn * ym;
            if (std::abs(det) < 1e-15) continue;
            // [fm; fn] = J^T [fx; fy] with J = [[xm, xn], [ym, yn]]
            out.fx_map.at(m, n) = (yn * fm - ym * fn) / det;
            out.fy_map.at(m, n) = (-xn * fm + xm * fn) / det;
            out.valid.at(m, n) = 1;
        }
    }
    return out;
}

}  // namespace

DerivativeMaps depth_derivatives(const DepthFrame& frame, const DiffGeoOptions& opts) {
    MetricDiff first = metric_gradient(frame.depth, frame.valid, frame, opts.max_depth_jump);
    MetricDiff gxx = metric_gradient(first.fx_map, first.valid, frame, opts.max_depth_jump);
    MetricDiff gyy = metric_gradient(first.fy_map, first.valid, frame, opts.max_depth_jump);

    const int w = frame.width(), h = frame.height();
    DerivativeMaps out;
    out.dm = first.fx_map;
    out.dn = first.fy_map;
    out.dmm = Image<double>(w, h, 0.0);
    out.dnn = Image<double>(w, h, 0.0);
    out.dmn = Image<double>(w, h, 0.0);
    out.valid = Image<uint8_t>(w, h, 0);
    for (int n = 0; n < h; ++n) {
        for (int m = 0; m < w; ++m) {
            if (!gxx.valid.at(m, n) || !gyy.valid.at(m, n)) continue;
            out.dmm.at(m, n) = gxx.fx_map.at(m, n);
            out.dnn.at(m, n) = gyy.fy_map.at(m, n);
            // symmetric cross derivative by construction
            out.dmn.at(m, n) = 0.5 * (gxx.fy_map.at(m, n) + gyy.fx_map.at(m, n));
            out.valid.at(m, n) = 1;
        }
    }
    return out;
}

CurvatureMaps curvature_maps(const DerivativeMaps& deriv) {
    const int w = deriv.dm.width, h = deriv.dm.height;
    CurvatureMaps out;
    out.H = Image<double>(w, h, 0.0);
    out.K = Image<double>(w, h, 0.0);
    out.valid = deriv.valid;
    for (int n = 0; n < h; ++n) {
        for (int m = 0; m < w; ++m) {
            if (!deriv.valid.at(m, n)) continue;
            double dm = deriv.dm.at(m, n), dn = deriv.dn.at(m, n);
            double dmm = deriv.dmm.at(m, n), dnn = deriv.dnn.at(m, n), dmn = deriv.dmn.at(m, n);
            double g = 1.0 + dm * dm + dn * dn;
            out.K.at(m, n) = (dmm * dnn - dmn * dmn) / (g * g);
            out.H.at(m, n) =
                ((1.0 + dm * dm) * dnn - 2.0 * dm * dn * dmn + (1.0 + dn * dn) * dmm) / (2.0 * std::pow(g, 1.5));
        }
    }
    return out;
}

NormalMap normal_map(const DepthFrame& frame, const DiffGeoOptions& opts) {
    MetricDiff first = metric_gradient(frame.depth, frame.valid, frame, opts.max_depth_jump);
    const int w = frame.width(), h = frame.height();
    NormalMap out;
    out.n = Image<Vec3>(w, h, Vec3::Zero());
    out.valid = Image<uint8_t>(w, h, 0);
    for (int n = 0; n < h; ++n) {
        for (int m = 0; m < w; ++m) {
            if (!first.valid.at(m, n)) continue;
            Vec3 normal(-first.fx_map.at(m, n), -first.fy_map.at(m, n), 1.0);
            normal.normalize();
            if (normal.dot(frame.point_camera(m, n)) > 0) normal = -normal;  // face the camera
            out.n.at(m, n) = normal;
            out.valid.at(m, n) = 1;
        }
    }
    return out;
}

void dump_heatmap_pgm(const Image<double>& map, const Image<uint8_t>& valid, const std::string& path) {
    double lo = 0, hi = 0;
    bool any = false;
    for (size_t i = 0; i < map.data.size(); ++i) {
        if (!valid.data[i]) continue;
        if (!any || map.data[i] < lo) lo = map.data[i];
        if (!any || map.data[i] > hi) hi = map.data[i];
        any = true;
    }
    double span = (hi > lo) ? hi - lo : 1.0;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P5\n# affine scale: value = " << lo << " + (tick/65535) * " << span << "; tick 0 = invalid\n"
        << map.width << " " << map.height << "\n65535\n";
    for (size_t i = 0; i < map.data.size(); ++i) {
        uint16_t tick = 0;
        if (valid.data[i]) {
            double t = (map.data[i] - lo) / span;
            tick = static_cast<uint16_t>(1 + t * 65534);
        }
        out.put(static_cast<char>(tick >> 8));
        out.put(static_cast<char>(tick & 0xff));
    }
}

}  // namespace curvsdf
