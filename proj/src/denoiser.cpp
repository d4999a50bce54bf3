#include "cacmc/denoiser.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "cacmc/error.hpp"
#include "cacmc/rng.hpp"

namespace cacmc {

using nlohmann::json;

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

// 3x3 cross-correlation with zero padding on channel-column matrices.
// in: (h*w) x cin, out: (h*w) x cout, weights indexed [co][ci][dy][dx].
struct Conv3x3 {
    Eigen::Index h, w;

    void forward(const Eigen::MatrixXd& in, Eigen::MatrixXd& out, const double* wts,
                 const double* bias, Eigen::Index cin, Eigen::Index cout) const {
        out.resize(h * w, cout);
        for (Eigen::Index co = 0; co < cout; ++co)
            out.col(co).setConstant(bias[co]);
        for (Eigen::Index co = 0; co < cout; ++co) {
            auto out_plane = Eigen::Map<Eigen::MatrixXd>(out.col(co).data(), h, w);
            for (Eigen::Index ci = 0; ci < cin; ++ci) {
                auto in_plane =
                    Eigen::Map<const Eigen::MatrixXd>(in.col(ci).data(), h, w);
                const double* k = wts + ((co * cin + ci) * 9);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const double wv = k[(dy + 1) * 3 + (dx + 1)];
                        if (wv == 0.0) continue;
                        const Eigen::Index x0 = std::max(0, -dx), y0 = std::max(0, -dy);
                        const Eigen::Index bw = h - std::abs(dx), bh = w - std::abs(dy);
                        out_plane.block(x0, y0, bw, bh) +=
                            wv * in_plane.block(x0 + dx, y0 + dy, bw, bh);
                    }
            }
        }
    }

    // Accumulates input gradients and parameter gradients.
    void backward(const Eigen::MatrixXd& in, const Eigen::MatrixXd& d_out,
                  Eigen::MatrixXd* d_in, const double* wts, double* d_wts,
                  double* d_bias, Eigen::Index cin, Eigen::Index cout) const {
        if (d_in) d_in->setZero(h * w, cin);
        for (Eigen::Index co = 0; co < cout; ++co) {
            d_bias[co] += d_out.col(co).sum();
            auto dout_plane =
                Eigen::Map<const Eigen::MatrixXd>(d_out.col(co).data(), h, w);
            for (Eigen::Index ci = 0; ci < cin; ++ci) {
                auto in_plane =
                    Eigen::Map<const Eigen::MatrixXd>(in.col(ci).data(), h, w);
                const double* k = wts + ((co * cin + ci) * 9);
                double* dk = d_wts + ((co * cin + ci) * 9);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const Eigen::Index x0 = std::max(0, -dx), y0 = std::max(0, -dy);
                        const Eigen::Index bw = h - std::abs(dx), bh = w - std::abs(dy);
                        dk[(dy + 1) * 3 + (dx + 1)] +=
                            (dout_plane.block(x0, y0, bw, bh).array() *
                             in_plane.block(x0 + dx, y0 + dy, bw, bh).array())
                                .sum();
                        if (d_in) {
                            const double wv = k[(dy + 1) * 3 + (dx + 1)];
                            if (wv == 0.0) continue;
                            auto din_plane =
                                Eigen::Map<Eigen::MatrixXd>(d_in->col(ci).data(), h, w);
                            din_plane.block(x0 + dx, y0 + dy, bw, bh) +=
                                wv * dout_plane.block(x0, y0, bw, bh);
                        }
                    }
            }
        }
    }
};

} // namespace

Eigen::VectorXd timestep_embedding(int t, int dim, int total_steps) {
    if (dim < 2 || dim % 2 != 0)
        throw ValidationError("timestep_embedding: dim must be even and >= 2");
    (void)total_steps;
    const int half = dim / 2;
    Eigen::VectorXd emb(dim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
        emb[2 * i] = std::sin(double(t) * freq);
        emb[2 * i + 1] = std::cos(double(t) * freq);
    }
    return emb;
}

// Flat parameter layout: stem conv, then per block [emb projection, conv],
// then head conv.
struct TinyDenoiser::Layout {
    Eigen::Index stem_w, stem_b;
    std::vector<Eigen::Index> proj_w, proj_b, conv_w, conv_b;
    Eigen::Index head_w, head_b;
    Eigen::Index total;

    Layout(const TinyDenoiserConfig& c) {
        const Eigen::Index k = c.context, wd = c.width;
        Eigen::Index off = 0;
        auto take = [&off](Eigen::Index n) {
            const Eigen::Index at = off;
            off += n;
            return at;
        };
        stem_w = take(wd * 2 * k * 9);
        stem_b = take(wd);
        for (int b = 0; b < c.blocks; ++b) {
            proj_w.push_back(take(wd * c.emb_dim));
            proj_b.push_back(take(wd));
            conv_w.push_back(take(wd * wd * 9));
            conv_b.push_back(take(wd));
        }
        head_w = take(k * wd * 9);
        head_b = take(k);
        total = off;
    }
};

TinyDenoiser::TinyDenoiser(const TinyDenoiserConfig& cfg)
    : cfg_(cfg), layout_(std::make_shared<Layout>(cfg)) {
    if (cfg.context < 1 || cfg.context % 2 == 0)
        throw ValidationError("TinyDenoiser: context k must be odd");
    if (cfg.width < 1 || cfg.blocks < 1)
        throw ValidationError("TinyDenoiser: width and blocks must be >= 1");
    const Layout& lay = *layout_;
    params_.setZero(lay.total);
    Rng rng = Rng::child(cfg.init_seed, 0xd2'0e15);
    auto fill = [&](Eigen::Index off, Eigen::Index n, double scale) {
        for (Eigen::Index i = 0; i < n; ++i) params_[off + i] = scale * rng.normal();
    };
    fill(lay.stem_w, cfg.width * 2 * cfg.context * 9,
         1.0 / std::sqrt(double(2 * cfg.context * 9)));
    for (int b = 0; b < cfg.blocks; ++b) {
        fill(lay.proj_w[std::size_t(b)], cfg.width * cfg.emb_dim,
             0.1 / std::sqrt(double(cfg.emb_dim)));
        fill(lay.conv_w[std::size_t(b)], cfg.width * cfg.width * 9,
             1.0 / std::sqrt(double(cfg.width * 9)));
    }
    // The head starts at zero: an untrained denoiser predicts zero noise and
    // the reverse pass is the identity.
}

Window TinyDenoiser::forward(const Window& x_t, const Window& y, int t,
                             Cache* cache) const {
    if (!x_t.same_shape(y))
        throw ValidationError("denoiser: state/conditioning shapes differ");
    if (x_t.k() != cfg_.context)
        throw ValidationError("denoiser: window depth does not match config");
    const Eigen::Index k = cfg_.context, wd = cfg_.width;
    const Conv3x3 conv{x_t.h, x_t.w};
    const Layout& lay = *layout_;
    const double* P = params_.data();

    Cache local;
    Cache& c = cache ? *cache : local;
    c.t = t;
    c.h = x_t.h;
    c.w = x_t.w;
    c.emb = timestep_embedding(t, cfg_.emb_dim, cfg_.total_steps);
    c.input.resize(x_t.h * x_t.w, 2 * k);
    c.input << x_t.data, y.data;
    c.pre_act.assign(std::size_t(cfg_.blocks), {});
    c.hidden.assign(std::size_t(cfg_.blocks) + 1, {});

    conv.forward(c.input, c.hidden[0], P + lay.stem_w, P + lay.stem_b, 2 * k, wd);
    Eigen::MatrixXd act, branch;
    for (int b = 0; b < cfg_.blocks; ++b) {
        const auto bi = std::size_t(b);
        const Eigen::Map<const Eigen::MatrixXd> proj(P + lay.proj_w[bi], wd,
                                                     cfg_.emb_dim);
        const Eigen::Map<const Eigen::VectorXd> proj_b(P + lay.proj_b[bi], wd);
        const Eigen::VectorXd emb_add = proj * c.emb + proj_b;
        c.pre_act[bi] = c.hidden[bi].rowwise() + emb_add.transpose();
        act = c.pre_act[bi].unaryExpr([](double v) { return silu(v); });
        conv.forward(act, branch, P + lay.conv_w[bi], P + lay.conv_b[bi], wd, wd);
        c.hidden[bi + 1] = c.hidden[bi] + branch;
    }

    Window out(x_t.h, x_t.w, k);
    conv.forward(c.hidden[std::size_t(cfg_.blocks)], out.data, P + lay.head_w,
                 P + lay.head_b, wd, k);
    return out;
}

Window TinyDenoiser::predict(const Window& x_t, const Window& y, int t) const {
    return forward(x_t, y, t, nullptr);
}

Eigen::VectorXd TinyDenoiser::backward(const Cache& c, const Window& d_out) const {
    const Eigen::Index k = cfg_.context, wd = cfg_.width;
    const Conv3x3 conv{c.h, c.w};
    const Layout& lay = *layout_;
    const double* P = params_.data();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
    double* G = grad.data();

    Eigen::MatrixXd d_hidden, d_branch, d_act;
    conv.backward(c.hidden[std::size_t(cfg_.blocks)], d_out.data, &d_hidden,
                  P + lay.head_w, G + lay.head_w, G + lay.head_b, wd, k);
    for (int b = cfg_.blocks - 1; b >= 0; --b) {
        const auto bi = std::size_t(b);
        // Residual: d flows both through the conv branch and straight down.
        const Eigen::MatrixXd act =
            c.pre_act[bi].unaryExpr([](double v) { return silu(v); });
        conv.backward(act, d_hidden, &d_act, P + lay.conv_w[bi], G + lay.conv_w[bi],
                      G + lay.conv_b[bi], wd, wd);
        d_act.array() *= c.pre_act[bi].unaryExpr([](double v) {
            return silu_grad(v);
        }).array();
        // Per-channel embedding add: gradient sums over pixels.
        const Eigen::VectorXd d_emb_add = d_act.colwise().sum().transpose();
        Eigen::Map<Eigen::MatrixXd>(G + lay.proj_w[bi], wd, cfg_.emb_dim) +=
            d_emb_add * c.emb.transpose();
        Eigen::Map<Eigen::VectorXd>(G + lay.proj_b[bi], wd) += d_emb_add;
        d_hidden += d_act;
    }
    conv.backward(c.input, d_hidden, nullptr, P + lay.stem_w, G + lay.stem_w,
                  G + lay.stem_b, 2 * k, wd);
    return grad;
}

void save_checkpoint(const std::filesystem::path& path, const TinyDenoiser& d,
                     const CheckpointInfo& info) {
    const auto& cfg = d.config();
    json header{{"architecture",
                 {{"context", cfg.context},
                  {"width", cfg.width},
                  {"blocks", cfg.blocks},
                  {"emb_dim", cfg.emb_dim},
                  {"total_steps", cfg.total_steps},
                  {"init_seed", cfg.init_seed}}},
                {"step", info.step},
                {"hyperparameters",
                 {{"lambda", info.lambda},
                  {"tau", info.tau},
                  {"learning_rate", info.learning_rate}}},
                {"schedule", {{"steps", info.schedule_steps},
                              {"interval", info.schedule_interval}}},
                {"param_count", d.param_count()}};
    std::ofstream blob(path, std::ios::binary);
    if (!blob) throw IoError("cannot write checkpoint: " + path.string());
    std::vector<float> f32(std::size_t(d.param_count()));
    for (Eigen::Index i = 0; i < d.param_count(); ++i)
        f32[std::size_t(i)] = float(d.params()[i]);
    blob.write(reinterpret_cast<const char*>(f32.data()),
               std::streamsize(f32.size() * sizeof(float)));
    std::ofstream hdr(std::filesystem::path(path).replace_extension(".json"));
    if (!hdr) throw IoError("cannot write checkpoint header");
    hdr << header.dump(2) << "\n";
}

std::pair<TinyDenoiser, CheckpointInfo> load_checkpoint(
    const std::filesystem::path& path) {
    std::ifstream hdr(std::filesystem::path(path).replace_extension(".json"));
    if (!hdr) throw IoError("cannot read checkpoint header for " + path.string());
    json j;
    hdr >> j;
    CheckpointInfo info;
    const auto& arch = j.at("architecture");
    info.config.context = arch.at("context").get<int>();
    info.config.width = arch.at("width").get<int>();
    info.config.blocks = arch.at("blocks").get<int>();
    info.config.emb_dim = arch.at("emb_dim").get<int>();
    info.config.total_steps = arch.at("total_steps").get<int>();
    info.config.init_seed = arch.at("init_seed").get<std::uint64_t>();
    info.step = j.at("step").get<long>();
    info.schedule_steps = j.at("schedule").at("steps").get<int>();
    info.schedule_interval = j.at("schedule").at("interval").get<int>();
    info.lambda = j.at("hyperparameters").at("lambda").get<double>();
    info.tau = j.at("hyperparameters").at("tau").get<double>();
    info.learning_rate = j.at("hyperparameters").at("learning_rate").get<double>();

    TinyDenoiser d(info.config);
    const auto n = j.at("param_count").get<Eigen::Index>();
    if (n != d.param_count()) throw IoError("checkpoint parameter count mismatch");
    std::ifstream blob(path, std::ios::binary);
    if (!blob) throw IoError("cannot read checkpoint: " + path.string());
    std::vector<float> f32(static_cast<std::size_t>(n));
    blob.read(reinterpret_cast<char*>(f32.data()),
              std::streamsize(f32.size() * sizeof(float)));
    if (!blob) throw IoError("checkpoint blob truncated: " + path.string());
    for (Eigen::Index i = 0; i < n; ++i) d.params()[i] = double(f32[std::size_t(i)]);
    return {std::move(d), info};
}

} // namespace cacmc
