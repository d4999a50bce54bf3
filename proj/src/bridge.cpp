#include "cacmc/bridge.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace cacmc {

BridgeSchedule BridgeSchedule::create(int steps, int interval) {
    if (steps < 2) throw ValidationError("schedule: need T >= 2");
    if (interval < 1 || steps % interval != 0)
        throw ValidationError("schedule: interval must divide T");
    BridgeSchedule s;
    s.steps = steps;
    s.interval = interval;
    s.alpha.resize(steps + 1);
    s.delta.resize(steps + 1);
    for (int t = 0; t <= steps; ++t) {
        s.alpha[t] = double(t) / double(steps);
        s.delta[t] = 2.0 * (s.alpha[t] - s.alpha[t] * s.alpha[t]);
    }
    s.delta_cond.setZero(steps + 1);
    s.coef_x.setZero(steps + 1);
    s.coef_y.setZero(steps + 1);
    s.coef_e.setZero(steps + 1);
    s.post_var.setZero(steps + 1);
    for (int t = 1; t <= steps; ++t) {
        const StepCoeffs c = s.pair_coeffs(t, t - 1);
        s.coef_x[t] = c.x;
        s.coef_y[t] = c.y;
        s.coef_e[t] = c.e;
        s.post_var[t] = c.var;
        const double a = (1.0 - s.alpha[t]) / (1.0 - s.alpha[t - 1]);
        s.delta_cond[t] = s.delta[t] - s.delta[t - 1] * a * a;
    }
    return s;
}

StepCoeffs BridgeSchedule::pair_coeffs(int t_hi, int t_lo) const {
    if (t_lo < 0 || t_hi <= t_lo || t_hi > steps)
        throw ValidationError("pair_coeffs: need 0 <= t_lo < t_hi <= T");
    const double a_hi = alpha[t_hi], a_lo = alpha[t_lo];
    const double d_hi = delta[t_hi], d_lo = delta[t_lo];
    StepCoeffs c;
    if (d_hi == 0.0) {
        // t_hi = T: x_T equals y exactly and carries no noise information, so
        // the posterior is the forward marginal at t_lo with x0 = x_T - n_T.
        c.x = 1.0 - a_lo;
        c.y = a_lo;
        c.e = 1.0 - a_lo;
        c.var = d_lo;
        return c;
    }
    const double ratio = (1.0 - a_hi) / (1.0 - a_lo);
    const double d_cond = d_hi - d_lo * ratio * ratio;
    c.x = (d_lo / d_hi) * ratio + (d_cond / d_hi) * (1.0 - a_lo);
    c.y = a_lo - a_hi * ratio * (d_lo / d_hi);
    c.e = (1.0 - a_lo) * (d_cond / d_hi);
    c.var = d_lo * d_cond / d_hi;
    return c;
}

std::vector<int> BridgeSchedule::sampling_grid() const {
    std::vector<int> grid;
    for (int t = steps; t >= interval; t -= interval) grid.push_back(t);
    return grid;
}

int BridgeSchedule::check_t(int t) const {
    if (t < 0 || t > steps) throw ValidationError("timestep out of [0, T]");
    return t;
}

Window forward_sample(const Window& x0, const Window& y, int t, const Window& eps,
                      const BridgeSchedule& sched) {
    sched.check_t(t);
    if (!x0.same_shape(y) || !x0.same_shape(eps))
        throw ValidationError("forward_sample: window shapes differ");
    Window out = x0;
    const double a = sched.alpha[t];
    out.data = (1.0 - a) * x0.data + a * y.data + std::sqrt(sched.delta[t]) * eps.data;
    return out;
}

Window target_noise(const Window& x0, const Window& y, int t, const Window& eps,
                    const BridgeSchedule& sched) {
    sched.check_t(t);
    if (!x0.same_shape(y) || !x0.same_shape(eps))
        throw ValidationError("target_noise: window shapes differ");
    Window out = x0;
    const double a = sched.alpha[t];
    out.data = a * (y.data - x0.data) + std::sqrt(sched.delta[t]) * eps.data;
    return out;
}

Window posterior_step(const Window& x_t, const Window& y, const Window& eps_hat,
                      int t_hi, int t_lo, const BridgeSchedule& sched, Rng* rng) {
    if (t_hi < 1) throw ValidationError("posterior_step: t must be >= 1");
    const StepCoeffs c = sched.pair_coeffs(t_hi, t_lo);
    Window out = x_t;
    out.data = c.x * x_t.data + c.y * y.data - c.e * eps_hat.data;
    if (rng && c.var > 0.0) {
        const double sd = std::sqrt(c.var);
        for (Eigen::Index j = 0; j < out.data.size(); ++j)
            out.data(j) += sd * rng->normal();
    }
    return out;
}

Window direct_step(const Window& x_t, const Window& eps_hat) {
    if (!x_t.same_shape(eps_hat))
        throw ValidationError("direct_step: window shapes differ");
    Window out = x_t;
    out.data -= eps_hat.data;
    return out;
}

SamplerMode sampler_mode_from_name(const std::string& name) {
    if (name == "direct") return SamplerMode::Direct;
    if (name == "posterior") return SamplerMode::Posterior;
    throw ValidationError("unknown sampler mode: " + name);
}

const char* sampler_mode_name(SamplerMode m) {
    return m == SamplerMode::Direct ? "direct" : "posterior";
}

Window sample(const Window& y, const Denoiser& denoiser, const BridgeSchedule& sched,
              SamplerMode mode, SampleTrace* trace, Rng* rng) {
    Window x = y;
    if (trace) {
        trace->states.clear();
        trace->states.emplace_back(sched.steps, x);
    }
    for (int t : sched.sampling_grid()) {
        const int t_lo = t - sched.interval;
        const Window eps_hat = denoiser.predict(x, y, t);
        x = mode == SamplerMode::Direct
                ? direct_step(x, eps_hat)
                : posterior_step(x, y, eps_hat, t, t_lo, sched, rng);
        if (trace) trace->states.emplace_back(t_lo, x);
    }
    return x;
}

NormalizedGrid sliding_window_correct(const NormalizedGrid& roi,
                                      const Denoiser& denoiser,
                                      const BridgeSchedule& sched, SamplerMode mode,
                                      Eigen::Index k, int threads) {
    if (roi.nz() < 1) throw ValidationError("sliding_window_correct: empty ROI");
    const auto windows = extract_context_windows(roi, roi.nx(), roi.ny(), k, 1);
    NormalizedGrid out(roi.dims, roi.spacing);

    auto run = [&](std::size_t i) {
        const Window corrected = sample(windows[i].win, denoiser, sched, mode);
        out.slice(windows[i].center) = corrected.plane((k - 1) / 2);
    };
    if (threads <= 1) {
        for (std::size_t i = 0; i < windows.size(); ++i) run(i);
    } else {
        // Windows are independent; each worker writes disjoint output slices.
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int w = 0; w < threads; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < windows.size();
                     i = next.fetch_add(1))
                    run(i);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

} // namespace cacmc
