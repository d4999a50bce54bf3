#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cacmc/bridge.hpp"
#include "oracles.hpp"

using namespace cacmc;

namespace {

Window random_window(Eigen::Index h, Eigen::Index w, Eigen::Index k, Rng& rng) {
    Window win(h, w, k);
    for (Eigen::Index i = 0; i < win.data.size(); ++i) win.data(i) = rng.normal();
    return win;
}

} // namespace

TEST_CASE("schedule values match the closed forms") {
    const BridgeSchedule s = BridgeSchedule::create(1000, 100);
    CHECK(s.alpha[0] == 0.0);
    CHECK(s.alpha[1000] == 1.0);
    CHECK(s.alpha[500] == 0.5);
    CHECK(s.delta[500] == 0.5); // 2(0.5 - 0.25)
    CHECK(s.delta[0] == 0.0);
    CHECK(s.delta[1000] == 0.0);
    CHECK(s.sampling_grid().size() == 10);
    CHECK(s.sampling_grid().front() == 1000);
    CHECK(s.sampling_grid().back() == 100);
    CHECK(s.alpha.allFinite());
    CHECK(s.delta.allFinite());
    CHECK(s.coef_x.allFinite());
    CHECK(s.coef_y.allFinite());
    CHECK(s.coef_e.allFinite());
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.delta[t] >= 0.0);
        CHECK(s.coef_e[t] >= 0.0);
        CHECK(s.post_var[t] >= 0.0);
    }
    CHECK_THROWS_AS(BridgeSchedule::create(1, 1), ValidationError);
    CHECK_THROWS_AS(BridgeSchedule::create(1000, 300), ValidationError);
}

TEST_CASE("stored coefficients match the independent scalar derivation") {
    const BridgeSchedule s = BridgeSchedule::create(1000, 100);
    for (int t = 1; t <= 1000; ++t) {
        const auto ref = oracle::scalar_coeffs(t, t - 1, 1000);
        CHECK(std::abs(s.coef_x[t] - ref.x) <= 1e-12);
        CHECK(std::abs(s.coef_y[t] - ref.y) <= 1e-12);
        CHECK(std::abs(s.coef_e[t] - ref.e) <= 1e-12);
        CHECK(std::abs(s.post_var[t] - ref.var) <= 1e-12);
        if (t < 1000) CHECK(std::abs(s.delta_cond[t] - ref.delta_cond) <= 1e-12);
    }
    // Coarse pairs used by the sampler.
    for (int t = 1000; t >= 100; t -= 100) {
        const auto ref = oracle::scalar_coeffs(t, t - 100, 1000);
        const StepCoeffs c = s.pair_coeffs(t, t - 100);
        CHECK(std::abs(c.x - ref.x) <= 1e-12);
        CHECK(std::abs(c.y - ref.y) <= 1e-12);
        CHECK(std::abs(c.e - ref.e) <= 1e-12);
    }
}

TEST_CASE("forward sample hits both endpoints bit-exactly") {
    const BridgeSchedule s = BridgeSchedule::create(1000, 100);
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const Window x0 = random_window(8, 8, 3, rng);
        const Window y = random_window(8, 8, 3, rng);
        const Window eps = random_window(8, 8, 3, rng);
        const Window at0 = forward_sample(x0, y, 0, eps, s);
        const Window atT = forward_sample(x0, y, 1000, eps, s);
        CHECK((at0.data.array() == x0.data.array()).all());
        CHECK((atT.data.array() == y.data.array()).all());
    }
    const Window x0 = random_window(4, 4, 1, rng);
    const Window y = random_window(4, 4, 1, rng);
    const Window eps = random_window(4, 4, 1, rng);
    CHECK_THROWS_AS(forward_sample(x0, y, 1001, eps, s), ValidationError);
}

TEST_CASE("target noise satisfies x_t - n_t = x0") {
    const BridgeSchedule s = BridgeSchedule::create(1000, 100);
    Rng rng(11);
    for (int t : {0, 1, 250, 777, 1000}) {
        const Window x0 = random_window(6, 5, 3, rng);
        const Window y = random_window(6, 5, 3, rng);
        const Window eps = random_window(6, 5, 3, rng);
        const Window xt = forward_sample(x0, y, t, eps, s);
        const Window nt = target_noise(x0, y, t, eps, s);
        CHECK((xt.data - nt.data - x0.data).cwiseAbs().maxCoeff() < 1e-6);
        if (t == 0) CHECK(nt.data.cwiseAbs().maxCoeff() == 0.0);
        if (t == 1000) {
            Window zero_eps = Window::zeros_like(eps);
            const Window ntT = target_noise(x0, y, t, zero_eps, s);
            CHECK((ntT.data - (y.data - x0.data)).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    // interpolation collapses when endpoints coincide
    const Window same = random_window(4, 4, 1, rng);
    const Window eps = random_window(4, 4, 1, rng);
    const Window mid = forward_sample(same, same, 400, eps, s);
    CHECK((mid.data - same.data - std::sqrt(s.delta[400]) * eps.data)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
}

TEST_CASE("forward sample matches the marginal moments empirically") {
    const BridgeSchedule s = BridgeSchedule::create(1000, 100);
    Rng rng(1234);
    const Window x0 = random_window(3, 3, 1, rng);
    const Window y = random_window(3, 3, 1, rng);
    const int t = 600, draws = 10000;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(9, 1), sum2 = sum;
    for (int d = 0; d < draws; ++d) {
        const Window eps = random_window(3, 3, 1, rng);
        const Window xt = forward_sample(x0, y, t, eps, s);
        sum += xt.data;
        sum2 += xt.data.cwiseProduct(xt.data);
    }
    const Eigen::MatrixXd mean = sum / draws;
    const Eigen::MatrixXd expected =
        (1.0 - s.alpha[t]) * x0.data + s.alpha[t] * y.data;
    const double band = 3.0 * std::sqrt(s.delta[t] / draws);
    CHECK((mean - expected).cwiseAbs().maxCoeff() < band);
    const Eigen::MatrixXd var =
        sum2 / draws - mean.cwiseProduct(mean);
    CHECK((var.array() / s.delta[t] - 1.0).abs().maxCoeff() < 0.10);
}

TEST_CASE("posterior step under the oracle walks back to x0") {
    const BridgeSchedule s = BridgeSchedule::create(1000, 100);
    Rng rng(19);
    for (int trial = 0; trial < 5; ++trial) {
        const Window x0 = random_window(8, 8, 1, rng);
        const Window y = random_window(8, 8, 1, rng);
        Window x = y;
        for (int t : s.sampling_grid()) {
            Window eps_hat = x;
            eps_hat.data -= x0.data; // exact n_t for the current state
            x = posterior_step(x, y, eps_hat, t, t - s.interval, s);
        }
        const double rms = std::sqrt((x.data - x0.data).squaredNorm() /
                                     double(x.data.size()));
        CHECK(rms <= 1e-4);
    }
    const Window w = random_window(2, 2, 1, rng);
    CHECK_THROWS_AS(posterior_step(w, w, w, 0, -1, s), ValidationError);
}

TEST_CASE("posterior step is linear: zero in, zero out") {
    const BridgeSchedule s = BridgeSchedule::create(1000, 100);
    const Window zero(4, 4, 1);
    const Window out = posterior_step(zero, zero, zero, 500, 400, s);
    CHECK(out.data.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("direct step subtracts the predicted noise") {
    Rng rng(23);
    const Window x0 = random_window(5, 5, 3, rng);
    const Window y = random_window(5, 5, 3, rng);
    Window n = y;
    n.data -= x0.data; // oracle noise at t = T
    const Window rec = direct_step(y, n);
    CHECK((rec.data - x0.data).cwiseAbs().maxCoeff() < 1e-12);
    const Window zero = Window::zeros_like(y);
    const Window same = direct_step(y, zero);
    CHECK((same.data - y.data).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sampling with the oracle recovers x0 in both modes") {
    const BridgeSchedule s = BridgeSchedule::create(1000, 100);
    Rng rng(29);
    for (int trial = 0; trial < 5; ++trial) {
        const Window x0 = random_window(8, 8, 3, rng);
        const Window y = random_window(8, 8, 3, rng);
        const OracleDenoiser oracle_d(x0);
        SampleTrace trace;
        const Window rec_post = sample(y, oracle_d, s, SamplerMode::Posterior, &trace);
        const Window rec_direct = sample(y, oracle_d, s, SamplerMode::Direct);
        const double rms_post = std::sqrt((rec_post.data - x0.data).squaredNorm() /
                                          double(x0.data.size()));
        const double rms_direct = std::sqrt((rec_direct.data - x0.data).squaredNorm() /
                                            double(x0.data.size()));
        CHECK(rms_post <= 1e-4);
        CHECK(rms_direct <= 1e-4);
        CHECK((rec_post.data - rec_direct.data).norm() /
                  std::sqrt(double(x0.data.size())) <=
              1e-3);
        // trace covers T, T-interval, ..., 0
        CHECK(trace.states.size() == 11);
        CHECK(trace.states.front().first == 1000);
        CHECK((trace.states.front().second.data - y.data).cwiseAbs().maxCoeff() == 0.0);
        CHECK(trace.states.back().first == 0);
    }
}

TEST_CASE("stochastic posterior sampling still ends on x0 under the oracle") {
    const BridgeSchedule s = BridgeSchedule::create(1000, 100);
    Rng rng(31);
    Rng noise(77);
    const Window x0 = random_window(6, 6, 1, rng);
    const Window y = random_window(6, 6, 1, rng);
    Window x = y;
    for (int t : s.sampling_grid()) {
        Window eps_hat = x;
        eps_hat.data -= x0.data;
        x = posterior_step(x, y, eps_hat, t, t - s.interval, s, &noise);
    }
    const double rms =
        std::sqrt((x.data - x0.data).squaredNorm() / double(x.data.size()));
    CHECK(rms <= 1e-4); // final step has zero posterior variance
}

TEST_CASE("identity denoiser leaves the corrupted window untouched") {
    const BridgeSchedule s = BridgeSchedule::create(1000, 100);
    Rng rng(37);
    const Window y = random_window(8, 8, 3, rng);
    const IdentityDenoiser identity;
    const Window direct = sample(y, identity, s, SamplerMode::Direct);
    CHECK((direct.data - y.data).cwiseAbs().maxCoeff() == 0.0);
    const Window post = sample(y, identity, s, SamplerMode::Posterior);
    CHECK((post.data - y.data).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("sliding window correction recovers the clean ROI with the oracle") {
    const BridgeSchedule s = BridgeSchedule::create(1000, 100);
    Rng rng(41);
    NormalizedGrid clean(Eigen::Vector3i(8, 8, 6), {1, 1, 1});
    NormalizedGrid dirty(clean.dims, clean.spacing);
    for (Eigen::Index i = 0; i < clean.size(); ++i) {
        clean.values[i] = rng.uniform();
        dirty.values[i] = rng.uniform();
    }
    const IdentityDenoiser identity;
    const NormalizedGrid same =
        sliding_window_correct(dirty, identity, s, SamplerMode::Direct, 3);
    CHECK((same.values - dirty.values).abs().maxCoeff() == 0.0);
    CHECK(same.dims == dirty.dims);

    // Per-window oracle pass: each window corrected against its own clean
    // counterpart, central slices restacked.
    const auto dirty_windows = extract_context_windows(dirty, 8, 8, 3, 1);
    const auto clean_windows = extract_context_windows(clean, 8, 8, 3, 1);
    NormalizedGrid rebuilt(dirty.dims, dirty.spacing);
    for (std::size_t i = 0; i < dirty_windows.size(); ++i) {
        const OracleDenoiser oracle_d(clean_windows[i].win);
        const Window corrected =
            sample(dirty_windows[i].win, oracle_d, s, SamplerMode::Posterior);
        rebuilt.slice(dirty_windows[i].center) = corrected.plane(1);
    }
    const double rms = std::sqrt((rebuilt.values - clean.values).square().sum() /
                                 double(clean.size()));
    CHECK(rms <= 1e-3);
}
