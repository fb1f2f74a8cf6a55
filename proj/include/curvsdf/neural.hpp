#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "curvsdf/sampler.hpp"

namespace curvsdf {

enum class LossMode : uint8_t { Full = 0, PointCloud = 1, NeuralPull = 2 };

struct LossWeights {
    double tau_n = 1.0;
    double tau_w = 1.0;
    double tau_e = 0.1;
    LossMode mode = LossMode::Full;

    void validate() const {
        if (tau_n < 0 || tau_w < 0 || tau_e < 0) throw std::invalid_argument("loss weights must be non-negative");
    }
    // the pulling loss is used with tau_n = tau_e = 0
    LossWeights effective() const {
        LossWeights w = *this;
        if (mode == LossMode::NeuralPull) w.tau_n = w.tau_e = 0;
        return w;
    }
};

struct LossReport {
    double l_x = 0, l_n = 0, l_w = 0, l_e = 0, total = 0;
};

/// MLP trunk of (layers-1) fully connected ReLU stages plus a linear distance
/// head and a logistic-squashed uncertainty head. `layers` counts linear stages
/// including the heads, matching an L-layer network with a 2-node output.
struct NeuralField {
    int layers = 8;
    int width = 256;
    uint64_t seed = 0;
    std::vector<Eigen::MatrixXd> W;  // trunk weights, layers-1 entries
    std::vector<Eigen::VectorXd> b;
    Eigen::VectorXd w_dist;  // distance head
    double b_dist = 0;
    Eigen::VectorXd w_unc;   // uncertainty head (theta_r)
    double b_unc = 0;
};

/// Matching parameter-gradient container.
struct FieldGrads {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;
    Eigen::VectorXd w_dist;
    double b_dist = 0;
    Eigen::VectorXd w_unc;
    double b_unc = 0;
};

NeuralField init_network(int layers = 8, int width = 256, uint64_t seed = 0, double init_radius = 0.5);

/// Batched evaluation: columns of `points` are inputs; outputs are (psi, w) rows.
void forward(const NeuralField& net, const Eigen::Matrix3Xd& points, Eigen::VectorXd& psi, Eigen::VectorXd& unc);

/// Convenience single-point evaluation.
std::pair<double, double> forward(const NeuralField& net, const Vec3& p);

/// Exact reverse-mode gradient of psi w.r.t. the input (subgradient 0 at ReLU kinks).
Eigen::Matrix3Xd input_gradient(const NeuralField& net, const Eigen::Matrix3Xd& points);
Vec3 input_gradient(const NeuralField& net, const Vec3& p);

/// All loss terms plus exact parameter gradients for one batch. The uncertainty
/// loss flows into the uncertainty head only.
LossReport loss_and_grads(const NeuralField& net, const std::vector<TrainingSample>& batch,
                          const LossWeights& weights, FieldGrads& grads);

enum class SamplingStrategy : uint8_t { Stratified = 0, Uniform = 1 };

struct TrainConfig {
    int epochs = 2000;
    int batch = 2048;          // total samples per epoch
    int per_stratum = -1;      // -1: batch/4 per stratum (and batch/4 unobserved)
    double lr = 1e-4;
    double decay = 0.5;        // multiplied into lr every epochs/4
    LossWeights weights;
    uint64_t seed = 0;
    double q_lo = 0.3, q_hi = 0.7;
    bool rank_percentile = false;
    SamplingStrategy sampling = SamplingStrategy::Stratified;
    SamplerOptions sampler;
};

struct TrainResult {
    std::vector<LossReport> history;  // one entry per epoch
};

/// Adam training loop; one stratified (or uniform) batch and one optimizer step per epoch.
TrainResult train(NeuralField& net, const VoxelGrid& grid, const TrainConfig& config);

/// Binary checkpoint, magic "CNET".
void save_network(const NeuralField& net, const std::string& path);
NeuralField load_network(const std::string& path);

void save_loss_history(const std::vector<LossReport>& history, const std::string& path);

}  // namespace curvsdf
