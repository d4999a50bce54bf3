#include "cacmc/simulate.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "cacmc/io.hpp"
#include "cacmc/score.hpp"

namespace cacmc {

using nlohmann::json;

namespace {

struct LesionSite {
    Eigen::Vector3d center;
    Eigen::Vector3d half_axes;
    double peak_hu;
};

// Smooth in-slice weight for body/lung boundaries: 1 inside, 0 outside,
// rolled off over `soft` voxels of normalized ellipse distance.
double ellipse_weight(double x, double y, double cx, double cy, double ax, double ay,
                      double soft) {
    const double r = std::hypot((x - cx) / ax, (y - cy) / ay);
    if (soft <= 0.0) return r <= 1.0 ? 1.0 : 0.0;
    const double edge = (1.0 - r) * std::min(ax, ay) / soft;
    return 1.0 / (1.0 + std::exp(-4.0 * edge));
}

} // namespace

std::pair<VoxelGrid, BinaryMask> make_phantom(const PhantomSpec& spec,
                                              std::uint64_t seed) {
    if (spec.peak_hu_lo < kCalciumThresholdHu)
        throw ValidationError("make_phantom: lesion peak must be >= 130 HU");
    VoxelGrid v(spec.dims, spec.spacing);
    BinaryMask mask(spec.dims, spec.spacing);
    Rng rng = Rng::child(seed, 0xb0d7);

    const double nx = double(spec.dims[0]), ny = double(spec.dims[1]);
    const double cx = (nx - 1) / 2.0, cy = (ny - 1) / 2.0;
    // Body inside the FBP reconstruction circle, lungs left/right of center.
    const double body_ax = 0.44 * nx, body_ay = 0.40 * ny;
    const double lung_ax = 0.16 * nx, lung_ay = 0.22 * ny;
    const double lung_off = 0.22 * nx;

    for (Eigen::Index z = 0; z < v.nz(); ++z) {
        auto plane = v.slice(z);
        for (Eigen::Index y = 0; y < v.ny(); ++y)
            for (Eigen::Index x = 0; x < v.nx(); ++x) {
                const double body = ellipse_weight(double(x), double(y), cx, cy,
                                                   body_ax, body_ay, spec.edge_softness);
                double hu = spec.air_hu + body * (spec.body_hu - spec.air_hu);
                const double lungs =
                    ellipse_weight(double(x), double(y), cx - lung_off, cy, lung_ax,
                                   lung_ay, spec.edge_softness) +
                    ellipse_weight(double(x), double(y), cx + lung_off, cy, lung_ax,
                                   lung_ay, spec.edge_softness);
                hu += body * std::min(1.0, lungs) * (spec.lung_hu - spec.body_hu);
                plane(x, y) = hu;
            }
    }

    // Place disjoint lesions in the mediastinal band between the lungs.
    const int n_lesions = int(rng.uniform_int(spec.lesions_lo, spec.lesions_hi));
    std::vector<LesionSite> sites;
    for (int l = 0; l < n_lesions; ++l) {
        bool placed = false;
        for (int attempt = 0; attempt < spec.placement_attempts && !placed; ++attempt) {
            LesionSite s;
            const double r = rng.uniform(spec.lesion_radius_lo, spec.lesion_radius_hi);
            s.half_axes = {r, r * rng.uniform(0.7, 1.3),
                           std::max(1.0, r * rng.uniform(0.4, 0.8))};
            // Integer centers so the peak lands on a voxel.
            s.center = {std::round(cx + rng.uniform(-0.13, 0.13) * nx),
                        std::round(cy + rng.uniform(-0.22, 0.22) * ny),
                        std::round(rng.uniform(s.half_axes[2] + 1.0,
                                               double(spec.dims[2]) - s.half_axes[2] - 2.0))};
            s.peak_hu = rng.uniform(spec.peak_hu_lo, spec.peak_hu_hi);
            bool overlaps = false;
            for (const auto& o : sites) {
                const double gap = (s.center - o.center).norm();
                if (gap < (s.half_axes.maxCoeff() + o.half_axes.maxCoeff() + 2.0))
                    overlaps = true;
            }
            if (!overlaps) {
                sites.push_back(s);
                placed = true;
            }
        }
        if (!placed)
            throw ValidationError("make_phantom: could not place disjoint lesions");
    }

    for (const auto& s : sites) {
        // Intensity extends past the mask support so the outer edge decays
        // to ~exp(-5) of the excess; the mask keeps the rho <= 1 core.
        const double reach = 1.6;
        const Eigen::Vector3i lo = (s.center - reach * s.half_axes)
                                       .array()
                                       .floor()
                                       .cast<int>()
                                       .max(0)
                                       .matrix();
        const Eigen::Vector3i hi = (s.center + reach * s.half_axes)
                                       .array()
                                       .ceil()
                                       .cast<int>()
                                       .min((spec.dims - Eigen::Vector3i::Ones()).array())
                                       .matrix();
        for (int z = lo[2]; z <= hi[2]; ++z)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int x = lo[0]; x <= hi[0]; ++x) {
                    const Eigen::Vector3d p{double(x), double(y), double(z)};
                    const double rho =
                        ((p - s.center).array() / s.half_axes.array()).matrix().norm();
                    if (rho > reach) continue;
                    const double g = std::exp(-2.0 * rho * rho);
                    const double hu = v.at(x, y, z) + g * (s.peak_hu - v.at(x, y, z));
                    v.at(x, y, z) = std::max(v.at(x, y, z), hu);
                    if (rho <= 1.0) mask.at(x, y, z) = 1;
                }
    }
    return {std::move(v), std::move(mask)};
}

PairedSample simulate_motion(const VoxelGrid& x0, const BinaryMask& m,
                             const SimConfig& cfg) {
    if (!x0.same_shape(m)) throw ValidationError("simulate_motion: geometry mismatch");
    if (!x0.values.allFinite())
        throw NumericError("simulate_motion: non-finite input volume");
    if ((m.values == 0).all())
        throw ValidationError("simulate_motion: empty calcium mask");
    if (!valid_projection_count(cfg.n_angles))
        throw ValidationError("simulate_motion: projection count must be one of "
                              "{180,360,540,720,1080}");
    if (x0.spacing[0] != x0.spacing[1])
        throw ValidationError("simulate_motion: anisotropic in-plane spacing");

    PairedSample out;
    out.clean = x0;
    out.mask = m;
    out.provenance = cfg;
    out.spec = cfg.explicit_spec ? *cfg.explicit_spec
                                 : sample_preset(cfg.preset, cfg.n_angles, cfg.seed);
    if (cfg.amplitude_override) {
        out.spec.amplitude = *cfg.amplitude_override;
        if (out.spec.family == MotionFamily::Piecewise) {
            const double total =
                out.spec.segment_amplitude[0] + out.spec.segment_amplitude[1];
            const double scale = total > 0.0 ? out.spec.amplitude / total : 0.0;
            out.spec.segment_amplitude[0] *= scale;
            out.spec.segment_amplitude[1] *= scale;
        }
    }

    const bool frozen = out.spec.amplitude == 0.0;
    if (!frozen) out.trajectory = generate_trajectory(out.spec, cfg.n_angles);
    else {
        out.trajectory.displacements =
            Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(cfg.n_angles, 3);
    }

    const AngleSet angles = AngleSet::uniform(cfg.n_angles);
    const VoxelGrid inpainted = inpaint(x0, m);
    const int bins = detector_bins(x0.nx(), x0.ny());
    const double spacing = x0.spacing[0];

    out.sinograms.resize(std::size_t(x0.nz()));
    for (auto& s : out.sinograms) {
        s.bin_spacing_mm = spacing;
        s.rows.setZero(cfg.n_angles, bins);
    }

    // Static part: the calcium-free volume does not move, so its projections
    // can be computed per slice once for all angles. The moving calcium is
    // projected as a bounded delta slice; radon is linear so the sum is exact.
    for (Eigen::Index z = 0; z < x0.nz(); ++z) {
        const Sinogram stat = radon_full(inpainted.slice(z), angles, spacing);
        out.sinograms[std::size_t(z)].rows = stat.rows;
    }
    for (int i = 0; i < cfg.n_angles; ++i) {
        const Eigen::Vector3d d = out.trajectory.at(i);
        const VoxelGrid instant = shift_region(x0, m, d, inpainted);
        for (Eigen::Index z = 0; z < x0.nz(); ++z) {
            const Eigen::MatrixXd delta = instant.slice(z) - inpainted.slice(z);
            if ((delta.array() == 0.0).all()) continue;
            out.sinograms[std::size_t(z)].rows.row(i) +=
                radon_project(delta, angles.degrees[i], spacing, bins);
        }
    }

    out.corrupt = VoxelGrid(x0.dims, x0.spacing);
    FbpOptions fbp_opt;
    fbp_opt.hann = cfg.hann;
    for (Eigen::Index z = 0; z < x0.nz(); ++z)
        out.corrupt.slice(z) =
            fbp(out.sinograms[std::size_t(z)], angles, x0.nx(), x0.ny(), fbp_opt);

    if (cfg.reconstruct_clean) {
        VoxelGrid recon_clean(x0.dims, x0.spacing);
        for (Eigen::Index z = 0; z < x0.nz(); ++z) {
            const Sinogram s = radon_full(x0.slice(z), angles, spacing);
            recon_clean.slice(z) = fbp(s, angles, x0.nx(), x0.ny(), fbp_opt);
        }
        out.clean = std::move(recon_clean);
    }
    return out;
}

json build_dataset(const DatasetOptions& opt) {
    namespace fs = std::filesystem;
    if (opt.n_cases < 1) throw ValidationError("build_dataset: n_cases must be >= 1");
    if (opt.out_dir.empty()) throw ValidationError("build_dataset: missing output dir");
    std::vector<std::string> presets = opt.presets;
    if (presets.empty())
        for (const auto& p : preset_catalog()) presets.push_back(p.name);
    if (opt.profiles_per_case < 1 ||
        opt.profiles_per_case > int(presets.size()))
        throw ValidationError("build_dataset: bad profiles_per_case");

    fs::create_directories(opt.out_dir);
    const int n_train = std::max(1, int(std::lround(opt.train_fraction * opt.n_cases)));

    json samples = json::array();
    for (int c = 0; c < opt.n_cases; ++c) {
        Rng case_rng = Rng::child(opt.seed, 0xca5e'0000ULL + std::uint64_t(c));
        const std::uint64_t phantom_seed = case_rng.raw();
        auto [clean, mask] = make_phantom(opt.phantom, phantom_seed);

        char case_id[32];
        std::snprintf(case_id, sizeof(case_id), "case%04d", c);
        const fs::path clean_path = opt.out_dir / (std::string(case_id) + "_clean.raw");
        const fs::path mask_path = opt.out_dir / (std::string(case_id) + "_mask.raw");
        io::write_volume(clean_path, clean, "HU");
        io::write_mask(mask_path, mask);

        // Rotate through the preset list so profiles differ across cases.
        for (int p = 0; p < opt.profiles_per_case; ++p) {
            const std::string& preset =
                presets[std::size_t((c + p) % int(presets.size()))];
            SimConfig cfg;
            cfg.preset = preset;
            cfg.seed = case_rng.raw();
            cfg.n_angles = kProjectionCounts[std::size_t(
                case_rng.uniform_int(0, int(kProjectionCounts.size()) - 1))];
            PairedSample sample = simulate_motion(clean, mask, cfg);

            char tag[64];
            std::snprintf(tag, sizeof(tag), "%s_p%02d", case_id, p);
            const fs::path corrupt_path =
                opt.out_dir / (std::string(tag) + "_corrupt.raw");
            io::write_volume(corrupt_path, sample.corrupt, "HU");
            if (opt.keep_sinograms) {
                VoxelGrid sino_stack(
                    Eigen::Vector3i(sample.sinograms[0].bins(), cfg.n_angles,
                                    int(clean.nz())),
                    Eigen::Vector3d(clean.spacing[0], 1.0, clean.spacing[2]));
                for (Eigen::Index z = 0; z < clean.nz(); ++z)
                    sino_stack.slice(z) =
                        sample.sinograms[std::size_t(z)].rows.transpose();
                io::write_volume(opt.out_dir / (std::string(tag) + "_sino.raw"),
                                 sino_stack, "line-integral");
            }
            samples.push_back({{"case_id", case_id},
                               {"clean_path", clean_path.filename().string()},
                               {"corrupt_path", corrupt_path.filename().string()},
                               {"mask_path", mask_path.filename().string()},
                               {"preset", preset},
                               {"n_angles", cfg.n_angles},
                               {"seed", cfg.seed},
                               {"split", c < n_train ? "train" : "test"}});
        }
    }
    json manifest{{"version", 1},
                  {"n_cases", opt.n_cases},
                  {"profiles_per_case", opt.profiles_per_case},
                  {"seed", opt.seed},
                  {"samples", samples}};
    io::write_json(opt.out_dir / "manifest.json", manifest);
    return manifest;
}

} // namespace cacmc
