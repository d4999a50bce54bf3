#include "cacmc/train.hpp"

#include <cmath>

#include "cacmc/score.hpp"

namespace cacmc {

void adam_update(Eigen::VectorXd& params, AdamState& state,
                 const Eigen::VectorXd& grad, const AdamConfig& cfg) {
    if (params.size() != grad.size() || params.size() != state.m.size())
        throw ValidationError("adam_update: size mismatch");
    ++state.step;
    const Eigen::VectorXd g = grad + cfg.weight_decay * params;
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g;
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    params.array() -= cfg.learning_rate * (state.m.array() / bc1) /
                      ((state.v.array() / bc2).sqrt() + cfg.epsilon);
}

LossBreakdown train_step(TinyDenoiser& denoiser, AdamState& state,
                         std::span<const TrainItem> batch,
                         const BridgeSchedule& sched, const TrainOptions& opt,
                         Rng& rng) {
    if (batch.empty()) throw ValidationError("train_step: empty batch");
    if (opt.lambda < 0.0) throw ValidationError("train_step: lambda must be >= 0");

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(denoiser.param_count());
    LossBreakdown loss;
    const double inv_batch = 1.0 / double(batch.size());

    for (const TrainItem& item : batch) {
        const int t = int(rng.uniform_int(1, sched.steps));
        Window eps = Window::zeros_like(item.clean);
        for (Eigen::Index j = 0; j < eps.data.size(); ++j)
            eps.data(j) = rng.normal();

        const Window x_t = forward_sample(item.clean, item.corrupt, t, eps, sched);
        const Window n_t = target_noise(item.clean, item.corrupt, t, eps, sched);

        TinyDenoiser::Cache cache;
        const Window eps_hat = denoiser.forward(x_t, item.corrupt, t, &cache);

        // ELBO term: mean squared residual over the window.
        const Eigen::MatrixXd resid = eps_hat.data - n_t.data;
        const double n_vox = double(resid.size());
        const double mse = resid.squaredNorm() / n_vox;
        Window d_eps = Window::zeros_like(eps_hat);
        d_eps.data = (2.0 * inv_batch / n_vox) * resid;

        double calc = 0.0;
        if (opt.lambda > 0.0) {
            // x0_hat = x_t - eps_hat, mapped to HU by the affine
            // (unclamped) inverse of the normalization.
            VoxelGrid x0_hu(Eigen::Vector3i(int(item.clean.h), int(item.clean.w),
                                            int(item.clean.k())),
                            opt.spacing);
            VoxelGrid xhat_hu(x0_hu.dims, opt.spacing);
            const Eigen::MatrixXd xhat = x_t.data - eps_hat.data;
            for (Eigen::Index j = 0; j < x0_hu.size(); ++j) {
                x0_hu.values[j] = kHuSpan * item.clean.data(j) + kClipLoHu;
                xhat_hu.values[j] = kHuSpan * xhat(j) + kClipLoHu;
            }
            Eigen::ArrayXd d_hu;
            calc = calcium_consistency_loss(x0_hu, xhat_hu, opt.tau, &d_hu);
            // Chain: d/d eps_hat = d/d xhat * dxhat/deps_hat(-1) * dHU/dnorm.
            for (Eigen::Index j = 0; j < d_hu.size(); ++j)
                d_eps.data(j) += opt.lambda * inv_batch * (-kHuSpan) * d_hu[j];
        }

        loss.mse += mse * inv_batch;
        loss.calc += calc * inv_batch;
        grad += denoiser.backward(cache, d_eps);
    }
    loss.total = loss.mse + opt.lambda * loss.calc;
    if (!std::isfinite(loss.total))
        throw NumericError("train_step: non-finite loss (mse=" +
                           std::to_string(loss.mse) +
                           ", calc=" + std::to_string(loss.calc) + ")");
    adam_update(denoiser.params(), state, grad, opt.adam);
    return loss;
}

} // namespace cacmc
