#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <vector>

#include "cacmc/score.hpp"
#include "cacmc/train.hpp"
#include "oracles.hpp"

using namespace cacmc;

namespace {

Window random_window(Eigen::Index h, Eigen::Index w, Eigen::Index k, Rng& rng,
                     double lo = 0.0, double hi = 1.0) {
    Window win(h, w, k);
    for (Eigen::Index i = 0; i < win.data.size(); ++i)
        win.data(i) = rng.uniform(lo, hi);
    return win;
}

std::vector<TrainItem> tiny_dataset(int n, Eigen::Index h, Eigen::Index w,
                                    Eigen::Index k, Rng& rng) {
    std::vector<TrainItem> items;
    for (int i = 0; i < n; ++i) {
        TrainItem item;
        item.clean = random_window(h, w, k, rng, 0.1, 0.9);
        item.corrupt = item.clean;
        for (Eigen::Index j = 0; j < item.corrupt.data.size(); ++j)
            item.corrupt.data(j) =
                std::clamp(item.corrupt.data(j) + 0.15 * rng.normal(), 0.0, 1.0);
        items.push_back(std::move(item));
    }
    return items;
}

} // namespace

TEST_CASE("adam matches a scalar reference implementation") {
    // One parameter, fixed gradients; cross-checked against the textbook
    // update sequence computed step by step.
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.weight_decay = 0.0;
    Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 1.0);
    AdamState state = AdamState::init(1);
    double m = 0.0, v = 0.0, ref = 1.0;
    for (int step = 1; step <= 5; ++step) {
        const double g = 0.3 * step;
        Eigen::VectorXd grad = Eigen::VectorXd::Constant(1, g);
        adam_update(theta, state, grad, cfg);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, step));
        const double vh = v / (1.0 - std::pow(0.999, step));
        ref -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
        CHECK(theta[0] == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("lambda zero reduces the loss to the noise-matching term") {
    TinyDenoiserConfig cfg;
    cfg.context = 1;
    cfg.width = 4;
    cfg.blocks = 1;
    TinyDenoiser d(cfg);
    AdamState state = AdamState::init(d.param_count());
    Rng rng(5);
    const auto items = tiny_dataset(4, 6, 6, 1, rng);
    TrainOptions opt;
    opt.lambda = 0.0;
    Rng step_rng(17);
    const BridgeSchedule sched = BridgeSchedule::create(1000, 100);
    const LossBreakdown loss =
        train_step(d, state, std::span(items.data(), items.size()), sched, opt, step_rng);
    CHECK(loss.calc == 0.0);
    CHECK(loss.total == loss.mse);
    CHECK(state.step == 1);
}

TEST_CASE("train loss gradient matches finite differences on a linear denoiser") {
    // Two-parameter denoiser eps_hat = a*x_t + b*y; the full training loss
    // (noise MSE + lambda * calcium consistency) is differentiated by hand
    // and checked against central differences.
    const BridgeSchedule sched = BridgeSchedule::create(1000, 100);
    Rng rng(23);
    const Window x0 = random_window(4, 4, 1, rng, 0.2, 0.9);
    const Window y = random_window(4, 4, 1, rng, 0.2, 0.9);
    const int t = 700;
    Window eps = Window::zeros_like(x0);
    for (Eigen::Index i = 0; i < eps.data.size(); ++i) eps.data(i) = rng.normal();
    const Window x_t = forward_sample(x0, y, t, eps, sched);
    const Window n_t = target_noise(x0, y, t, eps, sched);
    const double lambda = 20.0, tau = 60.0;

    auto loss_of = [&](const Eigen::VectorXd& ab) {
        const Eigen::MatrixXd eps_hat = ab[0] * x_t.data + ab[1] * y.data;
        const Eigen::MatrixXd resid = eps_hat - n_t.data;
        const double mse = resid.squaredNorm() / double(resid.size());
        VoxelGrid ref(Eigen::Vector3i(4, 4, 1), {1, 1, 1});
        VoxelGrid hat(ref.dims, ref.spacing);
        for (Eigen::Index i = 0; i < 16; ++i) {
            ref.values[i] = kHuSpan * x0.data(i) + kClipLoHu;
            hat.values[i] = kHuSpan * (x_t.data(i) - eps_hat(i)) + kClipLoHu;
        }
        return mse + lambda * calcium_consistency_loss(ref, hat, tau);
    };

    Eigen::VectorXd ab(2);
    ab << 0.4, -0.3;
    // Analytic gradient via the chain rule used by train_step.
    const Eigen::MatrixXd eps_hat = ab[0] * x_t.data + ab[1] * y.data;
    const Eigen::MatrixXd resid = eps_hat - n_t.data;
    Eigen::MatrixXd d_eps = 2.0 * resid / double(resid.size());
    VoxelGrid ref(Eigen::Vector3i(4, 4, 1), {1, 1, 1});
    VoxelGrid hat(ref.dims, ref.spacing);
    for (Eigen::Index i = 0; i < 16; ++i) {
        ref.values[i] = kHuSpan * x0.data(i) + kClipLoHu;
        hat.values[i] = kHuSpan * (x_t.data(i) - eps_hat(i)) + kClipLoHu;
    }
    Eigen::ArrayXd d_hu;
    calcium_consistency_loss(ref, hat, tau, &d_hu);
    for (Eigen::Index i = 0; i < 16; ++i)
        d_eps(i) += lambda * (-kHuSpan) * d_hu[i];
    Eigen::VectorXd analytic(2);
    analytic[0] = (d_eps.array() * x_t.data.array()).sum();
    analytic[1] = (d_eps.array() * y.data.array()).sum();

    const Eigen::VectorXd fd = oracle::central_differences(loss_of, ab, 1e-6);
    CHECK(oracle::relative_error(analytic, fd) < 1e-4);
}

TEST_CASE("ELBO-only training loss trends down on a tiny fixed dataset") {
    const BridgeSchedule sched = BridgeSchedule::create(1000, 100);
    std::vector<double> late_over_early;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TinyDenoiserConfig cfg;
        cfg.context = 1;
        cfg.width = 6;
        cfg.blocks = 1;
        cfg.init_seed = seed + 1;
        TinyDenoiser d(cfg);
        AdamState state = AdamState::init(d.param_count());
        Rng data_rng(100 + seed);
        const auto items = tiny_dataset(8, 8, 8, 1, data_rng);
        TrainOptions opt;
        opt.lambda = 0.0;
        opt.adam.learning_rate = 1e-3;
        Rng step_rng(200 + seed);
        std::vector<double> losses;
        for (int step = 0; step < 200; ++step) {
            const LossBreakdown l = train_step(
                d, state, std::span(items.data(), items.size()), sched, opt, step_rng);
            losses.push_back(l.total);
        }
        const double early =
            std::accumulate(losses.begin(), losses.begin() + 20, 0.0) / 20.0;
        const double late =
            std::accumulate(losses.end() - 20, losses.end(), 0.0) / 20.0;
        late_over_early.push_back(late / early);
    }
    std::sort(late_over_early.begin(), late_over_early.end());
    CHECK(late_over_early[2] <= 1.0); // median of 5 seeds is non-increasing
}

TEST_CASE("train_step rejects empty batches and propagates geometry") {
    TinyDenoiserConfig cfg;
    cfg.context = 1;
    cfg.width = 2;
    cfg.blocks = 1;
    TinyDenoiser d(cfg);
    AdamState state = AdamState::init(d.param_count());
    const BridgeSchedule sched = BridgeSchedule::create(1000, 100);
    TrainOptions opt;
    Rng rng(3);
    std::vector<TrainItem> empty;
    CHECK_THROWS_AS(
        train_step(d, state, std::span(empty.data(), std::size_t(0)), sched, opt, rng),
        ValidationError);
}
