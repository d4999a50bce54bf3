#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cacmc/error.hpp"
#include "cacmc/rng.hpp"

namespace cacmc {

/// HU window used everywhere: volumes are clipped to [-200, 800] HU before
/// normalization to [0, 1].
inline constexpr double kClipLoHu = -200.0;
inline constexpr double kClipHiHu = 800.0;
inline constexpr double kHuSpan = kClipHiHu - kClipLoHu;

/// Dense 3D scalar field with physical voxel spacing.
/// Linear storage order is x-fastest: index = x + nx*(y + ny*z), matching the
/// "xyz-row-major" order declared in the volume file sidecar.
template <typename Scalar>
struct Grid3 {
    using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    using PlaneMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>;
    using ConstPlaneMap =
        Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>;

    Eigen::Vector3i dims{0, 0, 0};
    Eigen::Vector3d spacing{1.0, 1.0, 1.0};
    ArrayX values;

    Grid3() = default;
    Grid3(const Eigen::Vector3i& d, const Eigen::Vector3d& s)
        : dims(d), spacing(s) {
        if (d.minCoeff() < 1) throw ValidationError("grid dims must be >= 1");
        if (s.minCoeff() <= 0.0) throw ValidationError("grid spacing must be > 0");
        values = ArrayX::Zero(size());
    }

    Eigen::Index nx() const { return dims[0]; }
    Eigen::Index ny() const { return dims[1]; }
    Eigen::Index nz() const { return dims[2]; }
    Eigen::Index size() const {
        return static_cast<Eigen::Index>(dims[0]) * dims[1] * dims[2];
    }
    /// Voxel volume in mm^3.
    double voxel_volume() const { return spacing[0] * spacing[1] * spacing[2]; }

    Eigen::Index index(Eigen::Index x, Eigen::Index y, Eigen::Index z) const {
        return x + nx() * (y + ny() * z);
    }
    Scalar& at(Eigen::Index x, Eigen::Index y, Eigen::Index z) {
        return values[index(x, y, z)];
    }
    Scalar at(Eigen::Index x, Eigen::Index y, Eigen::Index z) const {
        return values[index(x, y, z)];
    }

    /// Axial plane z as an (nx x ny) matrix view; contiguous, no copy.
    PlaneMap slice(Eigen::Index z) {
        return PlaneMap(values.data() + z * nx() * ny(), nx(), ny());
    }
    ConstPlaneMap slice(Eigen::Index z) const {
        return ConstPlaneMap(values.data() + z * nx() * ny(), nx(), ny());
    }

    bool same_geometry(const Grid3& o) const {
        return dims == o.dims && spacing == o.spacing;
    }

    template <typename Other>
    bool same_shape(const Grid3<Other>& o) const {
        return dims == o.dims;
    }
};

/// Scalar field in Hounsfield units.
using VoxelGrid = Grid3<double>;
/// Same geometry as VoxelGrid, values in [0, 1].
using NormalizedGrid = Grid3<double>;
/// One boolean (0/1 byte) per voxel.
using BinaryMask = Grid3<std::uint8_t>;

/// 2.5D block: k axial planes of h x w pixels, stored one plane per column.
/// Window arithmetic is plain Eigen arithmetic on `data`.
struct Window {
    Eigen::Index h = 0;
    Eigen::Index w = 0;
    Eigen::MatrixXd data; // (h*w) x k

    Window() = default;
    Window(Eigen::Index h_, Eigen::Index w_, Eigen::Index k)
        : h(h_), w(w_), data(Eigen::MatrixXd::Zero(h_ * w_, k)) {}

    Eigen::Index k() const { return data.cols(); }
    bool same_shape(const Window& o) const {
        return h == o.h && w == o.w && data.cols() == o.data.cols();
    }
    Eigen::Map<Eigen::MatrixXd> plane(Eigen::Index c) {
        return {data.col(c).data(), h, w};
    }
    Eigen::Map<const Eigen::MatrixXd> plane(Eigen::Index c) const {
        return {data.col(c).data(), h, w};
    }
    static Window zeros_like(const Window& o) { return Window(o.h, o.w, o.k()); }
};

/// Window of k slices centered on axial slice `center` of the source volume.
struct ContextWindow {
    int center = 0;
    Window win;
};

/// Calcium-centered or background-only training block cut from a volume.
struct RoiBlock {
    Eigen::Vector3i origin{0, 0, 0};
    bool has_calcium = false;
    VoxelGrid values;
    BinaryMask mask;
};

struct RoiOptions {
    Eigen::Vector3i block{64, 64, 16};
    int jitter = 8;           // max in-plane centering offset, voxels
    int background_blocks = 1;
    int placement_attempts = 64;
};

/// (clip(v, -200, 800) + 200) / 1000, elementwise.
NormalizedGrid normalize(const VoxelGrid& v);

/// Inverse affine map 1000*n - 200. Values outside [0,1] are a domain error;
/// the training loss uses the raw affine map instead (see score module).
VoxelGrid denormalize(const NormalizedGrid& n);

/// Resample the masked region of `src` at offset `d` (voxels, trilinear) and
/// composite it over `background` wherever the shifted mask (trilinearly
/// interpolated, thresholded at >= 0.5) is set. Out-of-bounds samples drop.
VoxelGrid shift_region(const VoxelGrid& src, const BinaryMask& m,
                       const Eigen::Vector3d& d, const VoxelGrid& background);

/// shift_region with the source volume itself as background.
VoxelGrid shift_region(const VoxelGrid& v, const BinaryMask& m,
                       const Eigen::Vector3d& d);

/// Replace masked voxels by iterative neighbor-mean diffusion from the mask
/// boundary. Stops when the max per-iteration change drops below `tol_hu`
/// or after `max_iters` sweeps.
VoxelGrid inpaint(const VoxelGrid& v, const BinaryMask& m, double tol_hu = 0.1,
                  int max_iters = 500);

/// Calcium-centered blocks (one per 26-connected mask component, center
/// jittered in-plane) plus background-only blocks.
std::vector<RoiBlock> extract_rois(const VoxelGrid& v, const BinaryMask& m,
                                   Rng& rng, const RoiOptions& opt = {});

/// One window per z in `stride` steps; edge slices replicate. k must be odd.
std::vector<ContextWindow> extract_context_windows(const NormalizedGrid& v,
                                                   Eigen::Index h, Eigen::Index w,
                                                   Eigen::Index k, Eigen::Index stride);

/// Label 26-connected components of a mask; returns per-voxel labels
/// (0 = background, 1..n_components) and the component count.
std::pair<std::vector<int>, int> connected_components_3d(const BinaryMask& m);

} // namespace cacmc
