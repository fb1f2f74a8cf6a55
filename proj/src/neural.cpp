#include "curvsdf/neural.hpp"

#include <cstring>
#include <fstream>
#include <random>

namespace curvsdf {

namespace {

using Eigen::ArrayXXd;
using Eigen::Matrix3Xd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ForwardCache {
    std::vector<MatrixXd> Z;      // post-activation per trunk stage
    std::vector<ArrayXXd> mask;   // ReLU derivative per trunk stage
    VectorXd psi;
    VectorXd r;   // pre-squash uncertainty
    VectorXd unc;
};

const MatrixXd& stage_input(const Matrix3Xd& points, const ForwardCache& c, size_t t, const MatrixXd& p_as_mat) {
    return t == 0 ? p_as_mat : c.Z[t - 1];
}

ForwardCache run_forward(const NeuralField& net, const Matrix3Xd& points) {
    ForwardCache c;
    const size_t K = net.W.size();
    c.Z.resize(K);
    c.mask.resize(K);
    MatrixXd p_as_mat = points;
    for (size_t t = 0; t < K; ++t) {
        MatrixXd a = net.W[t] * (t == 0 ? p_as_mat : c.Z[t - 1]);
        a.colwise() += net.b[t];
        c.mask[t] = (a.array() > 0.0).cast<double>();
        c.Z[t] = a.cwiseMax(0.0);
    }
    c.psi = (net.w_dist.transpose() * c.Z[K - 1]).transpose();
    c.psi.array() += net.b_dist;
    c.r = (net.w_unc.transpose() * c.Z[K - 1]).transpose();
    c.r.array() += net.b_unc;
    c.unc = (1.0 / (1.0 + (-c.r.array()).exp())).matrix();
    return c;
}

// reverse chain for d psi / d input; also yields the per-stage masked
// sensitivities needed by the double-backprop path
Matrix3Xd input_grad_chain(const NeuralField& net, const ForwardCache& c, std::vector<MatrixXd>& S) {
    const size_t K = net.W.size();
    const Eigen::Index N = c.psi.size();
    S.resize(K);
    MatrixXd V = net.w_dist.replicate(1, N);
    for (size_t t = K; t-- > 0;) {
        S[t] = (V.array() * c.mask[t]).matrix();
        V = net.W[t].transpose() * S[t];
    }
    return V;  // 3 x N
}

FieldGrads zero_grads(const NeuralField& net) {
    FieldGrads g;
    g.W.reserve(net.W.size());
    g.b.reserve(net.b.size());
    for (const auto& W : net.W) g.W.emplace_back(MatrixXd::Zero(W.rows(), W.cols()));
    for (const auto& b : net.b) g.b.emplace_back(VectorXd::Zero(b.size()));
    g.w_dist = VectorXd::Zero(net.w_dist.size());
    g.w_unc = VectorXd::Zero(net.w_unc.size());
    return g;
}

// backprop of sum_i dpsi_i * psi_i through the trunk and distance head
void backprop_psi(const NeuralField& net, const ForwardCache& c, const Matrix3Xd& points, const VectorXd& dpsi,
                  FieldGrads& g) {
    const size_t K = net.W.size();
    MatrixXd p_as_mat = points;
    g.w_dist += c.Z[K - 1] * dpsi;
    g.b_dist += dpsi.sum();
    MatrixXd C = net.w_dist * dpsi.transpose();
    for (size_t t = K; t-- > 0;) {
        MatrixXd St = (C.array() * c.mask[t]).matrix();
        g.W[t] += St * stage_input(points, c, t, p_as_mat).transpose();
        g.b[t] += St.rowwise().sum();
        if (t > 0) C = net.W[t].transpose() * St;
    }
}

// backprop of sum_i <dG_i, grad_p psi_i>; ReLU masks are treated as locally
// constant, so biases receive no contribution on this path
void backprop_input_grad(const NeuralField& net, const ForwardCache& c, const std::vector<MatrixXd>& S,
                         const Matrix3Xd& points, const Matrix3Xd& dG, FieldGrads& g) {
    const size_t K = net.W.size();
    MatrixXd U = dG;
    for (size_t t = 0; t < K; ++t) {
        g.W[t] += S[t] * U.transpose();
        U = ((net.W[t] * U).array() * c.mask[t]).matrix();
    }
    g.w_dist += U.rowwise().sum();
}

}  // namespace

NeuralField init_network(int layers, int width, uint64_t seed, double init_radius) {
    if (layers < 2) throw std::invalid_argument("init_network: need at least 2 layers");
    if (width < 1) throw std::invalid_argument("init_network: width must be >= 1");

    NeuralField net;
    net.layers = layers;
    net.width = width;
    net.seed = seed;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const int K = layers - 1;
    for (int t = 0; t < K; ++t) {
        int fan_in = (t == 0) ? 3 : width;
        MatrixXd W(width, fan_in);
        // scale by the output width so each stage preserves the input norm in
        // expectation; together with the head below this makes f(p) ~ r - |p|
        double std_dev = std::sqrt(2.0 / width);
        for (int i = 0; i < W.rows(); ++i)
            for (int j = 0; j < W.cols(); ++j) W(i, j) = std_dev * gauss(rng);
        net.W.push_back(std::move(W));
        net.b.push_back(VectorXd::Zero(width));
    }
    // geometric head: f(p) ~ init_radius - |p| (positive inside a sphere)
    net.w_dist = VectorXd(width);
    double head = std::sqrt(M_PI / width);
    for (int i = 0; i < width; ++i) net.w_dist(i) = -head * (1.0 + 0.01 * gauss(rng));
    net.b_dist = init_radius;
    net.w_unc = VectorXd(width);
    for (int i = 0; i < width; ++i) net.w_unc(i) = gauss(rng) / std::sqrt(static_cast<double>(width));
    net.b_unc = 0.0;
    return net;
}

void forward(const NeuralField& net, const Matrix3Xd& points, VectorXd& psi, VectorXd& unc) {
    if (!points.allFinite()) throw std::invalid_argument("forward: non-finite input");
    ForwardCache c = run_forward(net, points);
    psi = std::move(c.psi);
    unc = std::move(c.unc);
}

std::pair<double, double> forward(const NeuralField& net, const Vec3& p) {
    VectorXd psi, unc;
    forward(net, p, psi, unc);
    return {psi(0), unc(0)};
}

Matrix3Xd input_gradient(const NeuralField& net, const Matrix3Xd& points) {
    if (!points.allFinite()) throw std::invalid_argument("input_gradient: non-finite input");
    ForwardCache c = run_forward(net, points);
    std::vector<MatrixXd> S;
    return input_grad_chain(net, c, S);
}

Vec3 input_gradient(const NeuralField& net, const Vec3& p) {
    return input_gradient(net, Matrix3Xd(p)).col(0);
}

LossReport loss_and_grads(const NeuralField& net, const std::vector<TrainingSample>& batch,
                          const LossWeights& weights, FieldGrads& grads) {
    if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
    weights.validate();
    const LossWeights tw = weights.effective();
    const Eigen::Index N = static_cast<Eigen::Index>(batch.size());

    Matrix3Xd P(3, N);
    for (Eigen::Index i = 0; i < N; ++i) P.col(i) = batch[i].p;

    ForwardCache c = run_forward(net, P);
    std::vector<MatrixXd> S;
    Matrix3Xd G = input_grad_chain(net, c, S);

    std::vector<Eigen::Index> observed;
    for (Eigen::Index i = 0; i < N; ++i)
        if (batch[i].w > 0) observed.push_back(i);
    const double np = static_cast<double>(observed.size());

    LossReport report;
    VectorXd dpsi = VectorXd::Zero(N);
    VectorXd dr = VectorXd::Zero(N);
    Matrix3Xd dG = Matrix3Xd::Zero(3, N);
    const double eps = 1e-12;

    if ((weights.mode == LossMode::Full || weights.mode == LossMode::PointCloud) && np > 0) {
        for (Eigen::Index i : observed) {
            if (weights.mode == LossMode::Full) {
                double diff = c.psi(i) - batch[i].psi;
                report.l_x += std::abs(diff) / np;
                dpsi(i) += (diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0)) / np;
            }

            Vec3 gi = G.col(i);
            double gn = gi.norm();
            if (gn > eps) {
                Vec3 ghat = gi / gn;
                report.l_n += (1.0 - ghat.dot(batch[i].g)) / np;
                dG.col(i) += tw.tau_n / np * (-(batch[i].g - ghat * ghat.dot(batch[i].g)) / gn);
            } else {
                report.l_n += 1.0 / np;
            }
        }
    } else if (weights.mode == LossMode::NeuralPull && np > 0) {
        for (Eigen::Index i : observed) {
            Vec3 gi = G.col(i);
            double gn = gi.norm();
            if (gn <= eps) continue;
            Vec3 ghat = gi / gn;
            Vec3 rvec = batch[i].pull_target - (batch[i].p - ghat * c.psi(i));
            double cn = rvec.norm();
            report.l_x += cn / np;
            if (cn > eps) {
                Vec3 rhat = rvec / cn;
                dpsi(i) += ghat.dot(rhat) / np;
                dG.col(i) += c.psi(i) / gn * (rhat - ghat * ghat.dot(rhat)) / np;
            }
        }
    }

    for (Eigen::Index i = 0; i < N; ++i) {
        double wdiff = c.unc(i) - batch[i].w;
        report.l_w += std::abs(wdiff) / N;
        dr(i) = tw.tau_w / N * (wdiff > 0 ? 1.0 : (wdiff < 0 ? -1.0 : 0.0)) * c.unc(i) * (1.0 - c.unc(i));

        double sq = G.col(i).squaredNorm() - 1.0;
        report.l_e += std::abs(sq) / N;
        dG.col(i) += tw.tau_e / N * (sq > 0 ? 2.0 : -2.0) * G.col(i);
    }

    grads = zero_grads(net);
    backprop_psi(net, c, P, dpsi, grads);
    backprop_input_grad(net, c, S, P, dG, grads);
    grads.w_unc = c.Z[net.W.size() - 1] * dr;
    grads.b_unc = dr.sum();

    // Eq. 11 replacement of the geometric term: |f| at the voxel surface points
    if (weights.mode == LossMode::PointCloud && np > 0) {
        Matrix3Xd X(3, static_cast<Eigen::Index>(observed.size()));
        for (size_t k = 0; k < observed.size(); ++k) X.col(static_cast<Eigen::Index>(k)) = batch[observed[k]].pull_target;
        ForwardCache cx = run_forward(net, X);
        VectorXd dpsix(X.cols());
        for (Eigen::Index k = 0; k < X.cols(); ++k) {
            report.l_x += std::abs(cx.psi(k)) / np;
            dpsix(k) = (cx.psi(k) > 0 ? 1.0 : (cx.psi(k) < 0 ? -1.0 : 0.0)) / np;
        }
        backprop_psi(net, cx, X, dpsix, grads);
    }

    report.total = report.l_x + tw.tau_n * report.l_n + tw.tau_w * report.l_w + tw.tau_e * report.l_e;
    return report;
}

namespace {

struct AdamState {
    FieldGrads m, v;
    int step = 0;
};

void adam_update_tensor(MatrixXd& param, const MatrixXd& grad, MatrixXd& m, MatrixXd& v, double lr, int step) {
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1 - b1) * grad;
    v = (b2 * v.array() + (1 - b2) * grad.array().square()).matrix();
    double c1 = 1.0 - std::pow(b1, step), c2 = 1.0 - std::pow(b2, step);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

void adam_update_scalar(double& param, double grad, double& m, double& v, double lr, int step) {
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    double c1 = 1.0 - std::pow(b1, step), c2 = 1.0 - std::pow(b2, step);
    param -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
}

}  // namespace

TrainResult train(NeuralField& net, const VoxelGrid& grid, const TrainConfig& config) {
    config.weights.validate();
    if (config.epochs < 0 || config.batch <= 0) throw std::invalid_argument("train: invalid config");
    TrainResult result;
    if (config.epochs == 0) return result;

    CurvatureThresholds thresholds = curvature_thresholds(grid, config.q_lo, config.q_hi, config.rank_percentile);
    int m = config.per_stratum > 0 ? config.per_stratum : config.batch / 4;
    int m_unobs = std::max(0, config.batch - 3 * m);

    AdamState state;
    state.m = zero_grads(net);
    state.v = zero_grads(net);
    // scalar moments for the two head biases
    double mb_d = 0, vb_d = 0, mb_u = 0, vb_u = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        uint64_t es = config.seed + 0x9E3779B97F4A7C15ULL * (static_cast<uint64_t>(epoch) + 1);
        std::vector<TrainingSample> batch =
            config.sampling == SamplingStrategy::Stratified
                ? stratified_batch(grid, m, thresholds, m_unobs, es, config.sampler)
                : uniform_batch(grid, config.batch, es, &thresholds, config.sampler);

        FieldGrads grads;
        LossReport report = loss_and_grads(net, batch, config.weights, grads);
        if (!std::isfinite(report.total)) throw std::runtime_error("train: loss diverged (non-finite)");
        result.history.push_back(report);

        int quarter = std::max(1, config.epochs / 4);
        double lr = config.lr * std::pow(config.decay, epoch / quarter);
        ++state.step;
        for (size_t t = 0; t < net.W.size(); ++t) {
            adam_update_tensor(net.W[t], grads.W[t], state.m.W[t], state.v.W[t], lr, state.step);
            state.m.b[t] = 0.9 * state.m.b[t] + 0.1 * grads.b[t];
            state.v.b[t] = (0.999 * state.v.b[t].array() + 0.001 * grads.b[t].array().square()).matrix();
            double c1 = 1.0 - std::pow(0.9, state.step), c2 = 1.0 - std::pow(0.999, state.step);
            net.b[t].array() -= lr * (state.m.b[t].array() / c1) / ((state.v.b[t].array() / c2).sqrt() + 1e-8);
        }
        {
            state.m.w_dist = 0.9 * state.m.w_dist + 0.1 * grads.w_dist;
            state.v.w_dist = (0.999 * state.v.w_dist.array() + 0.001 * grads.w_dist.array().square()).matrix();
            state.m.w_unc = 0.9 * state.m.w_unc + 0.1 * grads.w_unc;
            state.v.w_unc = (0.999 * state.v.w_unc.array() + 0.001 * grads.w_unc.array().square()).matrix();
            double c1 = 1.0 - std::pow(0.9, state.step), c2 = 1.0 - std::pow(0.999, state.step);
            net.w_dist.array() -= lr * (state.m.w_dist.array() / c1) / ((state.v.w_dist.array() / c2).sqrt() + 1e-8);
            net.w_unc.array() -= lr * (state.m.w_unc.array() / c1) / ((state.v.w_unc.array() / c2).sqrt() + 1e-8);
            adam_update_scalar(net.b_dist, grads.b_dist, mb_d, vb_d, lr, state.step);
            adam_update_scalar(net.b_unc, grads.b_unc, mb_u, vb_u, lr, state.step);
        }
    }
    return result;
}

namespace {

constexpr char kNetMagic[4] = {'C', 'N', 'E', 'T'};
constexpr uint32_t kNetVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated network checkpoint");
    return v;
}

void put_block(std::ostream& out, const MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put(out, static_cast<float>(m(i, j)));
}

void get_block(std::istream& in, MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<float>(in);
}

}  // namespace

void save_network(const NeuralField& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kNetMagic, 4);
    put(out, kNetVersion);
    put(out, static_cast<int32_t>(net.layers));
    put(out, static_cast<int32_t>(net.width));
    put(out, net.seed);
    for (size_t t = 0; t < net.W.size(); ++t) {
        put_block(out, net.W[t]);
        put_block(out, net.b[t]);
    }
    put_block(out, net.w_dist);
    put(out, static_cast<float>(net.b_dist));
    put_block(out, net.w_unc);
    put(out, static_cast<float>(net.b_unc));
}

NeuralField load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kNetMagic, 4) != 0) throw std::runtime_error("bad checkpoint magic: " + path);
    if (get<uint32_t>(in) != kNetVersion) throw std::runtime_error("unsupported checkpoint version: " + path);
    NeuralField net;
    net.layers = get<int32_t>(in);
    net.width = get<int32_t>(in);
    net.seed = get<uint64_t>(in);
    const int K = net.layers - 1;
    for (int t = 0; t < K; ++t) {
        MatrixXd W(net.width, t == 0 ? 3 : net.width);
        get_block(in, W);
        net.W.push_back(std::move(W));
        MatrixXd b(net.width, 1);
        get_block(in, b);
        net.b.push_back(b.col(0));
    }
    MatrixXd wd(net.width, 1), wu(net.width, 1);
    get_block(in, wd);
    net.w_dist = wd.col(0);
    net.b_dist = get<float>(in);
    get_block(in, wu);
    net.w_unc = wu.col(0);
    net.b_unc = get<float>(in);
    return net;
}

void save_loss_history(const std::vector<LossReport>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "epoch,l_x,l_n,l_w,l_e,total\n";
    out.precision(12);
    for (size_t i = 0; i < history.size(); ++i) {
        const LossReport& r = history[i];
        out << i << "," << r.l_x << "," << r.l_n << "," << r.l_w << "," << r.l_e << "," << r.total << "\n";
    }
}

}  // namespace curvsdf
