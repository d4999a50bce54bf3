#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cacmc/grid.hpp"
#include "cacmc/motion.hpp"
#include "cacmc/tomo.hpp"

namespace cacmc {

/// Inputs of one motion simulation run.
struct SimConfig {
    std::string preset = "oscillation-xy-strong";
    std::optional<MotionProfileSpec> explicit_spec; // overrides preset sampling
    int n_angles = 360;                             // from kProjectionCounts
    std::uint64_t seed = 0;
    bool reconstruct_clean = false; // also pass x0 through fbp(radon(.))
    bool hann = false;
    std::optional<double> amplitude_override;
};

struct PairedSample {
    VoxelGrid clean;
    VoxelGrid corrupt;
    BinaryMask mask;
    SimConfig provenance;
    MotionProfileSpec spec;
    Trajectory trajectory;
    std::vector<Sinogram> sinograms; // one per axial slice
};

/// Procedural cardiac-slice phantom standing in for gated calcium CT data.
struct PhantomSpec {
    Eigen::Vector3i dims{64, 64, 16};
    Eigen::Vector3d spacing{1.0, 1.0, 1.0};
    int lesions_lo = 1, lesions_hi = 4;
    double lesion_radius_lo = 2.0, lesion_radius_hi = 4.5; // voxels, in-plane
    double peak_hu_lo = 160.0, peak_hu_hi = 1000.0;
    double body_hu = 40.0;
    double lung_hu = -180.0;
    double air_hu = -200.0; // clip floor
    double edge_softness = 2.2; // voxels; softens body/lung boundaries
    int placement_attempts = 200;
};

/// Deterministic phantom: elliptical soft-tissue body, two lung fields,
/// disjoint ellipsoidal calcified lesions with smooth intensity profiles.
/// The mask covers the lesion supports.
std::pair<VoxelGrid, BinaryMask> make_phantom(const PhantomSpec& spec,
                                              std::uint64_t seed);

/// Algorithm: inpaint the calcium away, move it along the sampled trajectory,
/// project each axial slice angle by angle, reconstruct per slice.
PairedSample simulate_motion(const VoxelGrid& x0, const BinaryMask& m,
                             const SimConfig& cfg);

struct DatasetOptions {
    int n_cases = 10;
    PhantomSpec phantom;
    std::vector<std::string> presets; // empty = full catalog
    int profiles_per_case = 21;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    bool keep_sinograms = false;
};

/// Writes paired volumes plus manifest.json; returns the manifest. Cases are
/// split 80/20 with no case id in both splits.
nlohmann::json build_dataset(const DatasetOptions& opt);

} // namespace cacmc
