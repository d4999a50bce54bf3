#pragma once

#include <span>
#include <vector>

#include "cacmc/bridge.hpp"
#include "cacmc/denoiser.hpp"
#include "cacmc/rng.hpp"

namespace cacmc {

struct AdamConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-4;
    double epsilon = 1e-8;
};

struct AdamState {
    Eigen::VectorXd m, v;
    long step = 0;

    static AdamState init(Eigen::Index n) {
        return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
    }
};

/// One bias-corrected adaptive-moment update; weight decay enters the
/// gradient (coupled form).
void adam_update(Eigen::VectorXd& params, AdamState& state,
                 const Eigen::VectorXd& grad, const AdamConfig& cfg);

/// One paired training window, both in normalized [0,1] intensities.
struct TrainItem {
    Window clean;   // x0
    Window corrupt; // y
};

struct TrainOptions {
    double lambda = 20.0; // calcium consistency weight
    double tau = 60.0;    // soft threshold width, HU
    AdamConfig adam;
    Eigen::Vector3d spacing{1.0, 1.0, 1.0}; // voxel geometry of the windows
};

struct LossBreakdown {
    double mse = 0.0;
    double calc = 0.0;
    double total = 0.0;
};

/// One optimization step: per item draw t ~ U{1..T} and gaussian noise,
/// build (x_t, n_t), run the denoiser, and descend
/// mean|n_t - eps_hat|^2 + lambda * L_calc(x0, x_t - eps_hat).
LossBreakdown train_step(TinyDenoiser& denoiser, AdamState& state,
                         std::span<const TrainItem> batch,
                         const BridgeSchedule& sched, const TrainOptions& opt,
                         Rng& rng);

} // namespace cacmc
