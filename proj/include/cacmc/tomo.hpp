#pragma once

#include <array>

#include <Eigen/Dense>

#include "cacmc/error.hpp"

namespace cacmc {

/// Projection counts the simulation sampler may draw from.
inline constexpr std::array<int, 5> kProjectionCounts{180, 360, 540, 720, 1080};

bool valid_projection_count(int n);

/// N angles in degrees, uniformly spaced over [0, 180).
struct AngleSet {
    Eigen::VectorXd degrees;

    static AngleSet uniform(int n) {
        if (n < 1) throw ValidationError("AngleSet: need at least one angle");
        AngleSet a;
        a.degrees = Eigen::VectorXd::LinSpaced(n, 0.0, 180.0 * double(n - 1) / n);
        return a;
    }
    int count() const { return int(degrees.size()); }
};

/// One projection row per angle, `bins` detector bins per row. Bin spacing
/// equals the in-plane voxel spacing; values are line integrals in HU*mm.
struct Sinogram {
    Eigen::MatrixXd rows; // count x bins
    double bin_spacing_mm = 1.0;

    int count() const { return int(rows.rows()); }
    int bins() const { return int(rows.cols()); }
};

/// Detector bin count covering the full slice diagonal.
int detector_bins(Eigen::Index nx, Eigen::Index ny);

/// Parallel-beam line integrals of one axial slice (nx x ny matrix, element
/// (x, y)) at angle `theta_deg`. Pixel-driven quarter-subpixel distribution:
/// the mass-conserving equivalent of rotating the slice by -theta with
/// bilinear weights and summing columns.
Eigen::VectorXd radon_project(const Eigen::Ref<const Eigen::MatrixXd>& slice,
                              double theta_deg, double spacing_mm, int bins);

/// All angles of a static slice.
Sinogram radon_full(const Eigen::Ref<const Eigen::MatrixXd>& slice,
                    const AngleSet& angles, double spacing_mm);

struct FbpOptions {
    bool hann = false;            // apodize the Ram-Lak ramp
    double background_hu = -200.0; // value outside the reconstruction circle
};

/// Filtered back-projection: frequency-domain ramp filter per row, bilinear
/// detector interpolation, pi/(2N) scaling. Pixels outside the inscribed
/// circle take `background_hu`.
Eigen::MatrixXd fbp(const Sinogram& sino, const AngleSet& angles, Eigen::Index nx,
                    Eigen::Index ny, const FbpOptions& opt = {});

} // namespace cacmc
