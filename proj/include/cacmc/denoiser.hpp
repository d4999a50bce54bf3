#pragma once

#include <filesystem>
#include <memory>

#include <Eigen/Dense>

#include "cacmc/grid.hpp"

namespace cacmc {

/// Noise predictor contract: eps_hat = f(x_t, y, t). Inputs are the channel
/// concatenation of the k-slice state window and its k-slice corrupted
/// conditioning window; output matches the state geometry.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Window predict(const Window& x_t, const Window& y, int t) const = 0;
};

/// eps_hat = 0; the reverse pass becomes the identity.
class IdentityDenoiser : public Denoiser {
public:
    Window predict(const Window& x_t, const Window&, int) const override {
        return Window::zeros_like(x_t);
    }
};

/// Exact-noise oracle: with the clean window known, n_t = x_t - x0.
class OracleDenoiser : public Denoiser {
public:
    explicit OracleDenoiser(Window clean) : clean_(std::move(clean)) {}
    Window predict(const Window& x_t, const Window&, int) const override {
        Window out = x_t;
        out.data -= clean_.data;
        return out;
    }

private:
    Window clean_;
};

struct TinyDenoiserConfig {
    int context = 3;     // k slices per window (odd)
    int width = 16;      // hidden channels
    int blocks = 2;      // residual blocks
    int emb_dim = 16;    // sinusoidal timestep embedding size (even)
    int total_steps = 1000;
    std::uint64_t init_seed = 1;
};

/// Small residual conv net with per-channel timestep embeddings: stem conv
/// (2k -> width), `blocks` residual 3x3 conv blocks with SiLU, head conv
/// (width -> k). Forward and backward passes are hand-rolled and
/// gradient-checked; parameters live in one flat vector.
class TinyDenoiser : public Denoiser {
public:
    explicit TinyDenoiser(const TinyDenoiserConfig& cfg);

    Window predict(const Window& x_t, const Window& y, int t) const override;

    /// Cached activations of one forward pass, consumed by backward().
    struct Cache {
        int t = 0;
        Eigen::Index h = 0, w = 0;
        Eigen::VectorXd emb;
        Eigen::MatrixXd input;                 // (h*w) x 2k
        std::vector<Eigen::MatrixXd> pre_act;  // block inputs after emb add
        std::vector<Eigen::MatrixXd> hidden;   // residual stream per stage
    };

    Window forward(const Window& x_t, const Window& y, int t, Cache* cache) const;

    /// Gradient of sum(d_out .* output) wrt the flat parameter vector.
    Eigen::VectorXd backward(const Cache& cache, const Window& d_out) const;

    Eigen::VectorXd& params() { return params_; }
    const Eigen::VectorXd& params() const { return params_; }
    const TinyDenoiserConfig& config() const { return cfg_; }
    Eigen::Index param_count() const { return params_.size(); }

private:
    struct Layout;

    TinyDenoiserConfig cfg_;
    std::shared_ptr<const Layout> layout_;
    Eigen::VectorXd params_;
};

/// Sinusoidal timestep embedding, DDPM-style frequency spacing.
Eigen::VectorXd timestep_embedding(int t, int dim, int total_steps);

/// Checkpoint container: float32 parameter blob + JSON header with the
/// architecture, step count, hyperparameters, and schedule.
struct CheckpointInfo {
    TinyDenoiserConfig config;
    long step = 0;
    int schedule_steps = 1000;
    int schedule_interval = 100;
    double lambda = 20.0;
    double tau = 60.0;
    double learning_rate = 2e-4;
};

void save_checkpoint(const std::filesystem::path& path, const TinyDenoiser& d,
                     const CheckpointInfo& info);
std::pair<TinyDenoiser, CheckpointInfo> load_checkpoint(const std::filesystem::path& path);

} // namespace cacmc
