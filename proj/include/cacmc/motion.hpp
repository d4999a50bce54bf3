#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "cacmc/error.hpp"
#include "cacmc/rng.hpp"

namespace cacmc {

enum class MotionFamily { Translation, Oscillation, LocalJitter, Piecewise };

const char* family_name(MotionFamily f);
MotionFamily family_from_name(const std::string& name);

/// Fully sampled motion profile: the functional form plus its parameters.
/// Displacements are in voxel units; amplitudes in pixels.
struct MotionProfileSpec {
    MotionFamily family = MotionFamily::Translation;
    double amplitude = 8.0;                      // A, pixels
    double phase = 0.0;                          // beta, radians
    Eigen::Vector3d axis_ratios{1.0, 1.0, 0.5};  // (r_x, r_y, r_z)

    // LocalJitter: three sinusoids with unit directions and weights.
    Eigen::Vector3d jitter_weights{1.0, 1.0, 1.0};
    Eigen::Matrix3d jitter_dirs = Eigen::Matrix3d::Identity(); // columns u_k

    // Piecewise: two ramp segments separated by a dwell.
    double segment_amplitude[2] = {0.0, 0.0};
    Eigen::Vector3d segment_dir[2] = {Eigen::Vector3d::UnitX(),
                                      Eigen::Vector3d::UnitY()};
    int breakpoint = 0;   // step index where the dwell begins
    int dwell = 0;        // dwell length in steps
};

/// Per-angle displacement sequence, one row per projection angle.
struct Trajectory {
    Eigen::Matrix<double, Eigen::Dynamic, 3> displacements;

    int count() const { return int(displacements.rows()); }
    Eigen::Vector3d at(int i) const { return displacements.row(i).transpose(); }
};

/// Axis amplitudes from displacement ratios, normalized so the dominant axis
/// carries the full amplitude A.
Eigen::Vector3d axis_amplitudes(double amplitude, double rx, double ry, double rz);
Eigen::Vector3d axis_amplitudes(const MotionProfileSpec& spec);

Trajectory gen_translation(const MotionProfileSpec& spec, int n);
Trajectory gen_oscillation(const MotionProfileSpec& spec, int n);
Trajectory gen_jitter(const MotionProfileSpec& spec, int n);
Trajectory gen_piecewise(const MotionProfileSpec& spec, int n);

/// Dispatch on spec.family.
Trajectory generate_trajectory(const MotionProfileSpec& spec, int n);

/// Which in-plane axis dominates the sampled ratios.
enum class DominantAxis { X, Y, XY, Iso };

/// A named sampler: parameter ranges that, given a seed, draw a concrete
/// MotionProfileSpec.
struct MotionPreset {
    std::string name;
    MotionFamily family = MotionFamily::Translation;
    DominantAxis dominant = DominantAxis::XY;
    double amplitude_lo = 4.0;
    double amplitude_hi = 15.0;
};

/// The 21 presets spanning the four families.
const std::vector<MotionPreset>& preset_catalog();
const MotionPreset& find_preset(const std::string& name);

/// Draw profile parameters for a preset. `n` is the projection count
/// (piecewise breakpoints are step indices).
MotionProfileSpec sample_spec(const MotionPreset& preset, int n, Rng& rng);

/// Preset + seed -> spec, using the catalog seed-derivation rule
/// (per-preset child stream of the seed).
MotionProfileSpec sample_preset(const std::string& name, int n, std::uint64_t seed);

/// Catalog as committed to data/motion_presets.json.
nlohmann::json catalog_json();

nlohmann::json trajectory_json(const Trajectory& t);

} // namespace cacmc
