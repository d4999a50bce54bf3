#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cacmc/denoiser.hpp"
#include "cacmc/grid.hpp"
#include "cacmc/rng.hpp"

namespace cacmc {

/// Coefficients of one reverse transition t_hi -> t_lo:
///   mean = x * x_t + y * cond - e * eps_hat,   variance = var.
struct StepCoeffs {
    double x = 0.0;
    double y = 0.0;
    double e = 0.0;
    double var = 0.0;
};

/// Precomputed bridge interpolation schedule. alpha_t = t/T walks the state
/// from x0 (t=0) to the corrupted image y (t=T); delta_t = 2(alpha - alpha^2)
/// is the marginal noise variance, zero at both endpoints.
struct BridgeSchedule {
    int steps = 0;    // T
    int interval = 0; // reverse sampling stride
    Eigen::VectorXd alpha;      // size T+1
    Eigen::VectorXd delta;      // size T+1
    Eigen::VectorXd delta_cond; // delta_{t|t-1}; index t, [0] unused
    Eigen::VectorXd coef_x, coef_y, coef_e, post_var; // consecutive-step

    static BridgeSchedule create(int steps, int interval);

    /// Reverse coefficients for an arbitrary step pair; the stored per-t
    /// arrays are pair_coeffs(t, t-1).
    StepCoeffs pair_coeffs(int t_hi, int t_lo) const;

    /// Visited timesteps of the coarse reverse pass: T, T-interval, ..., interval.
    std::vector<int> sampling_grid() const;

    int check_t(int t) const;
};

/// x_t = (1-alpha_t) x0 + alpha_t y + sqrt(delta_t) eps. Exact at endpoints.
Window forward_sample(const Window& x0, const Window& y, int t, const Window& eps,
                      const BridgeSchedule& sched);

/// n_t = alpha_t (y - x0) + sqrt(delta_t) eps; satisfies x_t - n_t = x0.
Window target_noise(const Window& x0, const Window& y, int t, const Window& eps,
                    const BridgeSchedule& sched);

/// Posterior mean of x_{t_lo} given (x_t, y) and the predicted noise; adds
/// sqrt(var)*xi when `rng` is supplied.
Window posterior_step(const Window& x_t, const Window& y, const Window& eps_hat,
                      int t_hi, int t_lo, const BridgeSchedule& sched,
                      Rng* rng = nullptr);

/// Literal progressive update x - eps_hat; with a perfect noise predictor a
/// single application already lands on x0.
Window direct_step(const Window& x_t, const Window& eps_hat);

enum class SamplerMode { Direct, Posterior };

SamplerMode sampler_mode_from_name(const std::string& name);
const char* sampler_mode_name(SamplerMode m);

/// Visited states of one reverse pass, (t, x_t), from (T, y) down to (0, x0).
struct SampleTrace {
    std::vector<std::pair<int, Window>> states;
};

/// Reverse pass over the coarse grid starting at x_T = y.
Window sample(const Window& y, const Denoiser& denoiser, const BridgeSchedule& sched,
              SamplerMode mode, SampleTrace* trace = nullptr, Rng* rng = nullptr);

/// Correct a normalized ROI: stride-1 context windows, one reverse pass per
/// window, central slices restacked.
NormalizedGrid sliding_window_correct(const NormalizedGrid& roi,
                                      const Denoiser& denoiser,
                                      const BridgeSchedule& sched, SamplerMode mode,
                                      Eigen::Index k, int threads = 1);

} // namespace cacmc
