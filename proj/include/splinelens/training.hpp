#pragma once

#include "splinelens/batchnorm.hpp"
#include "splinelens/datasets.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace splinelens {

enum class InitMode { ZeroBias, RandomBias, BNWarmup };
enum class LossKind { SoftmaxCrossEntropy, Hinge };

struct TrainConfig {
    InitMode init_mode = InitMode::ZeroBias;
    double learning_rate = 0.1;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    LossKind loss = LossKind::SoftmaxCrossEntropy;
    std::uint64_t seed = 0;
    bool bn_frozen = true;       // under BNWarmup the stats stay fixed
    std::size_t snapshot_every = 0;   // 0 = no snapshots
};

struct TrainHistory {
    std::vector<double> loss;            // per epoch, mean over mini-batches
    std::vector<double> accuracy;        // training accuracy per epoch
    std::vector<double> holdout_accuracy;   // empty when no holdout given
    std::vector<std::pair<std::size_t, std::pair<NetworkSpec, BNState>>> snapshots;
};

// Random weights, uniform on +-sqrt(6/(fan_in+fan_out)). ZeroBias: c = 0, no
// BN. RandomBias: c drawn at weight scale, no BN. BNWarmup: BN at layers
// 1..L-1 with full-dataset stats computed layer by layer, gamma=1, beta=0,
// c_L = 0.
std::pair<NetworkSpec, BNState> initialize(const std::vector<Eigen::Index>& widths,
                                           Activation activation, InitMode mode,
                                           const Matrix& dataset, std::uint64_t seed);

// Plain SGD with manual backpropagation. Frozen BN stats are constants;
// unfrozen BN recomputes per-mini-batch stats and backpropagates through them.
TrainHistory train(NetworkSpec& net, BNState& bn, const Matrix& inputs,
                   const Eigen::VectorXi& labels, const TrainConfig& config,
                   const Matrix* holdout_inputs = nullptr,
                   const Eigen::VectorXi* holdout_labels = nullptr);

double evaluate_accuracy(const NetworkSpec& net, const BNState& bn, const Matrix& inputs,
                         const Eigen::VectorXi& labels);

struct GradCheckResult {
    double max_rel_error = 0.0;
    bool near_kink = false;    // retry with a different point
};

// Central finite differences vs analytic gradients for all parameters at one
// sample. Points with any |h| below 10x the FD step are flagged, not checked.
GradCheckResult grad_check(const NetworkSpec& net, const BNState& bn, LossKind loss,
                           const Vector& x, int label, double fd_step = 1e-5);

// Per output unit: does the final-layer pre-activation over the minibatch
// take both strictly positive and strictly negative values?
std::vector<bool> each_side_check(const NetworkSpec& net, const BNState& bn,
                                  const Matrix& minibatch);

std::string history_csv(const TrainHistory& history);

} // namespace splinelens
