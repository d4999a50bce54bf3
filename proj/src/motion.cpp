#include "cacmc/motion.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace cacmc {

using nlohmann::json;

const char* family_name(MotionFamily f) {
    switch (f) {
        case MotionFamily::Translation: return "translation";
        case MotionFamily::Oscillation: return "oscillation";
        case MotionFamily::LocalJitter: return "jitter";
        case MotionFamily::Piecewise: return "piecewise";
    }
    return "?";
}

MotionFamily family_from_name(const std::string& name) {
    if (name == "translation") return MotionFamily::Translation;
    if (name == "oscillation") return MotionFamily::Oscillation;
    if (name == "jitter") return MotionFamily::LocalJitter;
    if (name == "piecewise") return MotionFamily::Piecewise;
    throw ValidationError("unknown motion family: " + name);
}

Eigen::Vector3d axis_amplitudes(double amplitude, double rx, double ry, double rz) {
    if (amplitude <= 0.0 || rx <= 0.0 || ry <= 0.0 || rz <= 0.0)
        throw ValidationError("axis_amplitudes: inputs must be positive");
    const double dominant = std::max({rx, ry, rz});
    return amplitude * Eigen::Vector3d(rx, ry, rz) / dominant;
}

Eigen::Vector3d axis_amplitudes(const MotionProfileSpec& spec) {
    return axis_amplitudes(spec.amplitude, spec.axis_ratios[0], spec.axis_ratios[1],
                           spec.axis_ratios[2]);
}

namespace {

void check_steps(int n) {
    if (n < 1) throw ValidationError("trajectory needs at least one step");
}

} // namespace

Trajectory gen_translation(const MotionProfileSpec& spec, int n) {
    check_steps(n);
    const Eigen::Vector3d velocity = axis_amplitudes(spec) / double(n);
    Trajectory t;
    t.displacements.resize(n, 3);
    for (int i = 0; i < n; ++i) t.displacements.row(i) = double(i) * velocity;
    return t;
}

Trajectory gen_oscillation(const MotionProfileSpec& spec, int n) {
    check_steps(n);
    const Eigen::Vector3d amp = axis_amplitudes(spec);
    Trajectory t;
    t.displacements.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        // One full cycle over the scan, phase-shifted.
        const double c = std::cos(2.0 * M_PI * double(i) / double(n) + spec.phase);
        t.displacements.row(i) = c * amp;
    }
    return t;
}

Trajectory gen_jitter(const MotionProfileSpec& spec, int n) {
    check_steps(n);
    if (spec.jitter_weights.isZero())
        throw ValidationError("gen_jitter: all weights are zero");
    Trajectory t;
    t.displacements.resize(n, 3);
    double peak = 0.0;
    for (int i = 0; i < n; ++i) {
        Eigen::Vector3d d = Eigen::Vector3d::Zero();
        for (int k = 0; k < 3; ++k) {
            const double s = std::sin(2.0 * M_PI * double(k + 1) * double(i) / double(n) +
                                      spec.phase);
            d += spec.jitter_weights[k] * s * spec.jitter_dirs.col(k);
        }
        t.displacements.row(i) = d;
        peak = std::max(peak, d.norm());
    }
    if (peak == 0.0) throw ValidationError("gen_jitter: degenerate trajectory");
    // Post-hoc scale so the trajectory peak displacement equals A exactly.
    t.displacements *= spec.amplitude / peak;
    return t;
}

Trajectory gen_piecewise(const MotionProfileSpec& spec, int n) {
    check_steps(n);
    const int b1 = spec.breakpoint;
    const int resume = b1 + spec.dwell;
    if (!(0 < b1 && b1 < resume && resume < n))
        throw ValidationError("gen_piecewise: breakpoints must satisfy 0 < b1 < b1+dwell < n");
    const Eigen::Vector3d first = spec.segment_amplitude[0] * spec.segment_dir[0];
    const Eigen::Vector3d second = spec.segment_amplitude[1] * spec.segment_dir[1];
    Trajectory t;
    t.displacements.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        if (i <= b1) {
            t.displacements.row(i) = first * (double(i) / double(b1));
        } else if (i < resume) {
            t.displacements.row(i) = first;
        } else {
            const double f = double(i - resume) / double(n - 1 - resume);
            t.displacements.row(i) = first + second * f;
        }
    }
    return t;
}

Trajectory generate_trajectory(const MotionProfileSpec& spec, int n) {
    switch (spec.family) {
        case MotionFamily::Translation: return gen_translation(spec, n);
        case MotionFamily::Oscillation: return gen_oscillation(spec, n);
        case MotionFamily::LocalJitter: return gen_jitter(spec, n);
        case MotionFamily::Piecewise: return gen_piecewise(spec, n);
    }
    throw ValidationError("unknown motion family");
}

namespace {

const char* dominant_name(DominantAxis d) {
    switch (d) {
        case DominantAxis::X: return "x";
        case DominantAxis::Y: return "y";
        case DominantAxis::XY: return "xy";
        case DominantAxis::Iso: return "iso";
    }
    return "?";
}

std::vector<MotionPreset> build_catalog() {
    using F = MotionFamily;
    using D = DominantAxis;
    // Severity bands inside the sampled A range of [4, 15] pixels.
    constexpr double kMildLo = 4.0, kMildHi = 7.0;
    constexpr double kMedLo = 7.0, kMedHi = 11.0;
    constexpr double kStrongLo = 11.0, kStrongHi = 15.0;
    return {
        {"translation-x-mild", F::Translation, D::X, kMildLo, kMildHi},
        {"translation-x-strong", F::Translation, D::X, kStrongLo, kStrongHi},
        {"translation-y-mild", F::Translation, D::Y, kMildLo, kMildHi},
        {"translation-y-strong", F::Translation, D::Y, kStrongLo, kStrongHi},
        {"translation-xy-medium", F::Translation, D::XY, kMedLo, kMedHi},
        {"translation-iso-medium", F::Translation, D::Iso, kMedLo, kMedHi},
        {"oscillation-x-mild", F::Oscillation, D::X, kMildLo, kMildHi},
        {"oscillation-x-strong", F::Oscillation, D::X, kStrongLo, kStrongHi},
        {"oscillation-y-mild", F::Oscillation, D::Y, kMildLo, kMildHi},
        {"oscillation-y-strong", F::Oscillation, D::Y, kStrongLo, kStrongHi},
        {"oscillation-xy-mild", F::Oscillation, D::XY, kMildLo, kMildHi},
        {"oscillation-xy-strong", F::Oscillation, D::XY, kStrongLo, kStrongHi},
        {"jitter-iso-mild", F::LocalJitter, D::Iso, kMildLo, kMildHi},
        {"jitter-iso-medium", F::LocalJitter, D::Iso, kMedLo, kMedHi},
        {"jitter-iso-strong", F::LocalJitter, D::Iso, kStrongLo, kStrongHi},
        {"jitter-x-medium", F::LocalJitter, D::X, kMedLo, kMedHi},
        {"jitter-y-medium", F::LocalJitter, D::Y, kMedLo, kMedHi},
        {"piecewise-xy-mild", F::Piecewise, D::XY, kMildLo, kMildHi},
        {"piecewise-xy-strong", F::Piecewise, D::XY, kStrongLo, kStrongHi},
        {"piecewise-x-medium", F::Piecewise, D::X, kMedLo, kMedHi},
        {"piecewise-y-medium", F::Piecewise, D::Y, kMedLo, kMedHi},
    };
}

// In-plane ratio ranges: dominant axis draws from [2, 4], the other from
// [0.5, 1.5]; iso presets draw both from [0.5, 1.5]. r_z always [0.3, 1].
Eigen::Vector3d sample_ratios(DominantAxis dominant, Rng& rng) {
    auto high = [&] { return rng.uniform(2.0, 4.0); };
    auto low = [&] { return rng.uniform(0.5, 1.5); };
    double rx, ry;
    switch (dominant) {
        case DominantAxis::X: rx = high(); ry = low(); break;
        case DominantAxis::Y: rx = low(); ry = high(); break;
        case DominantAxis::XY: rx = high(); ry = high(); break;
        case DominantAxis::Iso: default: rx = low(); ry = low(); break;
    }
    return {rx, ry, rng.uniform(0.3, 1.0)};
}

// Unit direction with its z component damped by r_z so axial motion stays
// subordinate to in-plane motion.
Eigen::Vector3d sample_direction(double rz, Rng& rng) {
    const double az = rng.uniform(0.0, 2.0 * M_PI);
    const double tilt = rng.uniform(-1.0, 1.0) * rz;
    return Eigen::Vector3d(std::cos(az), std::sin(az), tilt).normalized();
}

} // namespace

const std::vector<MotionPreset>& preset_catalog() {
    static const std::vector<MotionPreset> catalog = build_catalog();
    return catalog;
}

const MotionPreset& find_preset(const std::string& name) {
    for (const auto& p : preset_catalog())
        if (p.name == name) return p;
    throw ValidationError("unknown motion preset: " + name);
}

MotionProfileSpec sample_spec(const MotionPreset& preset, int n, Rng& rng) {
    check_steps(n);
    MotionProfileSpec spec;
    spec.family = preset.family;
    spec.amplitude = rng.uniform(preset.amplitude_lo, preset.amplitude_hi);
    spec.phase = rng.uniform(0.0, 2.0 * M_PI);
    spec.axis_ratios = sample_ratios(preset.dominant, rng);
    switch (preset.family) {
        case MotionFamily::Translation:
        case MotionFamily::Oscillation:
            break;
        case MotionFamily::LocalJitter: {
            for (int k = 0; k < 3; ++k) {
                spec.jitter_weights[k] = rng.uniform(0.2, 1.0);
                spec.jitter_dirs.col(k) = sample_direction(spec.axis_ratios[2], rng);
            }
            break;
        }
        case MotionFamily::Piecewise: {
            // Split A across the segments so total excursion stays <= A.
            const double f = rng.uniform(0.4, 0.7);
            spec.segment_amplitude[0] = f * spec.amplitude;
            spec.segment_amplitude[1] = spec.amplitude - spec.segment_amplitude[0];
            spec.segment_dir[0] = sample_direction(spec.axis_ratios[2], rng);
            spec.segment_dir[1] = sample_direction(spec.axis_ratios[2], rng);
            spec.breakpoint = int(rng.uniform_int(
                std::max(1, int(0.25 * n)), std::max(2, int(0.60 * n))));
            const int dwell_lo = std::max(1, int(0.05 * n));
            const int dwell_hi = std::max(dwell_lo, int(0.15 * n));
            spec.dwell = int(rng.uniform_int(dwell_lo, dwell_hi));
            // Keep the second ramp non-degenerate.
            spec.dwell = std::min(spec.dwell, n - 2 - spec.breakpoint);
            if (spec.dwell < 1)
                throw ValidationError("sample_spec: projection count too small for piecewise");
            break;
        }
    }
    return spec;
}

// Stream base for preset parameter draws; recorded in the catalog JSON.
inline constexpr std::uint64_t kPresetStreamBase = 0x70a5'11d3'0000ULL;

MotionProfileSpec sample_preset(const std::string& name, int n, std::uint64_t seed) {
    const auto& catalog = preset_catalog();
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        if (catalog[i].name == name) {
            Rng rng = Rng::child(seed, kPresetStreamBase + i);
            return sample_spec(catalog[i], n, rng);
        }
    }
    throw ValidationError("unknown motion preset: " + name);
}

json catalog_json() {
    json presets = json::array();
    for (const auto& p : preset_catalog()) {
        presets.push_back({{"name", p.name},
                           {"family", family_name(p.family)},
                           {"dominant_axis", dominant_name(p.dominant)},
                           {"amplitude_px", {p.amplitude_lo, p.amplitude_hi}}});
    }
    return json{
        {"version", 1},
        {"count", preset_catalog().size()},
        {"phase_rad", {0.0, 2.0 * M_PI}},
        {"ratio_inplane_dominant", {2.0, 4.0}},
        {"ratio_inplane_other", {0.5, 1.5}},
        {"ratio_axial", {0.3, 1.0}},
        {"seed_rule",
         "rng = Rng::child(seed, PRESET_STREAM_BASE + preset_index); parameters are "
         "drawn from the ranges above in catalog field order"},
        {"presets", presets}};
}

json trajectory_json(const Trajectory& t) {
    json rows = json::array();
    for (int i = 0; i < t.count(); ++i)
        rows.push_back({t.displacements(i, 0), t.displacements(i, 1),
                        t.displacements(i, 2)});
    return json{{"count", t.count()}, {"displacements_voxels", rows}};
}

} // namespace cacmc
