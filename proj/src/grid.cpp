#include "cacmc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace cacmc {

namespace {

// Trilinear sample of grid values at continuous voxel coordinates.
// Returns fallback outside the volume.
double sample_trilinear(const VoxelGrid& g, double x, double y, double z,
                        double fallback) {
    const auto nx = g.nx(), ny = g.ny(), nz = g.nz();
    if (x < 0.0 || y < 0.0 || z < 0.0 || x > double(nx - 1) || y > double(ny - 1) ||
        z > double(nz - 1))
        return fallback;
    const auto x0 = static_cast<Eigen::Index>(std::floor(x));
    const auto y0 = static_cast<Eigen::Index>(std::floor(y));
    const auto z0 = static_cast<Eigen::Index>(std::floor(z));
    const auto x1 = std::min(x0 + 1, nx - 1);
    const auto y1 = std::min(y0 + 1, ny - 1);
    const auto z1 = std::min(z0 + 1, nz - 1);
    const double fx = x - double(x0), fy = y - double(y0), fz = z - double(z0);
    auto v = [&](Eigen::Index i, Eigen::Index j, Eigen::Index k) {
        return g.at(i, j, k);
    };
    const double c00 = v(x0, y0, z0) * (1 - fx) + v(x1, y0, z0) * fx;
    const double c10 = v(x0, y1, z0) * (1 - fx) + v(x1, y1, z0) * fx;
    const double c01 = v(x0, y0, z1) * (1 - fx) + v(x1, y0, z1) * fx;
    const double c11 = v(x0, y1, z1) * (1 - fx) + v(x1, y1, z1) * fx;
    const double c0 = c00 * (1 - fy) + c10 * fy;
    const double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

// Same but for the 0/1 mask treated as a scalar field.
double sample_mask(const BinaryMask& m, double x, double y, double z) {
    const auto nx = m.nx(), ny = m.ny(), nz = m.nz();
    if (x < 0.0 || y < 0.0 || z < 0.0 || x > double(nx - 1) || y > double(ny - 1) ||
        z > double(nz - 1))
        return 0.0;
    const auto x0 = static_cast<Eigen::Index>(std::floor(x));
    const auto y0 = static_cast<Eigen::Index>(std::floor(y));
    const auto z0 = static_cast<Eigen::Index>(std::floor(z));
    const auto x1 = std::min(x0 + 1, nx - 1);
    const auto y1 = std::min(y0 + 1, ny - 1);
    const auto z1 = std::min(z0 + 1, nz - 1);
    const double fx = x - double(x0), fy = y - double(y0), fz = z - double(z0);
    auto v = [&](Eigen::Index i, Eigen::Index j, Eigen::Index k) {
        return double(m.at(i, j, k));
    };
    const double c00 = v(x0, y0, z0) * (1 - fx) + v(x1, y0, z0) * fx;
    const double c10 = v(x0, y1, z0) * (1 - fx) + v(x1, y1, z0) * fx;
    const double c01 = v(x0, y0, z1) * (1 - fx) + v(x1, y0, z1) * fx;
    const double c11 = v(x0, y1, z1) * (1 - fx) + v(x1, y1, z1) * fx;
    const double c0 = c00 * (1 - fy) + c10 * fy;
    const double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

struct Box {
    Eigen::Vector3i lo{0, 0, 0}, hi{-1, -1, -1}; // inclusive
    bool empty() const { return (hi.array() < lo.array()).any(); }
};

Box mask_bounds(const BinaryMask& m) {
    Box b;
    b.lo = m.dims;
    b.hi = Eigen::Vector3i(-1, -1, -1);
    for (Eigen::Index z = 0; z < m.nz(); ++z)
        for (Eigen::Index y = 0; y < m.ny(); ++y)
            for (Eigen::Index x = 0; x < m.nx(); ++x)
                if (m.at(x, y, z)) {
                    b.lo = b.lo.cwiseMin(Eigen::Vector3i(int(x), int(y), int(z)));
                    b.hi = b.hi.cwiseMax(Eigen::Vector3i(int(x), int(y), int(z)));
                }
    return b;
}

} // namespace

NormalizedGrid normalize(const VoxelGrid& v) {
    NormalizedGrid out(v.dims, v.spacing);
    out.values = (v.values.min(kClipHiHu).max(kClipLoHu) - kClipLoHu) / kHuSpan;
    return out;
}

VoxelGrid denormalize(const NormalizedGrid& n) {
    if ((n.values < 0.0).any() || (n.values > 1.0).any())
        throw ValidationError("denormalize: values outside [0,1]");
    VoxelGrid out(n.dims, n.spacing);
    out.values = kHuSpan * n.values + kClipLoHu;
    return out;
}

VoxelGrid shift_region(const VoxelGrid& src, const BinaryMask& m,
                       const Eigen::Vector3d& d, const VoxelGrid& background) {
    if (!src.same_shape(m) || !src.same_geometry(background))
        throw ValidationError("shift_region: geometry mismatch");
    VoxelGrid out = background;
    if (d.isZero()) {
        // Identity shift keeps the source values under the mask bit-exactly.
        for (Eigen::Index i = 0; i < src.size(); ++i)
            if (m.values[i]) out.values[i] = src.values[i];
        return out;
    }
    // Only voxels whose shifted mask weight reaches 0.5 can change; they live
    // inside the mask bounding box translated by d, padded one voxel.
    Box b = mask_bounds(m);
    if (b.empty()) return out;
    const Eigen::Vector3i lo =
        (b.lo.cast<double>() + d.array().floor().matrix() - Eigen::Vector3d::Ones())
            .cast<int>()
            .cwiseMax(Eigen::Vector3i::Zero());
    const Eigen::Vector3i hi =
        (b.hi.cast<double>() + d.array().ceil().matrix() + Eigen::Vector3d::Ones())
            .cast<int>()
            .cwiseMin(src.dims - Eigen::Vector3i::Ones());
    for (int z = lo[2]; z <= hi[2]; ++z)
        for (int y = lo[1]; y <= hi[1]; ++y)
            for (int x = lo[0]; x <= hi[0]; ++x) {
                const double mx = x - d[0], my = y - d[1], mz = z - d[2];
                if (sample_mask(m, mx, my, mz) >= 0.5)
                    out.at(x, y, z) =
                        sample_trilinear(src, mx, my, mz, background.at(x, y, z));
            }
    return out;
}

VoxelGrid shift_region(const VoxelGrid& v, const BinaryMask& m,
                       const Eigen::Vector3d& d) {
    return shift_region(v, m, d, v);
}

VoxelGrid inpaint(const VoxelGrid& v, const BinaryMask& m, double tol_hu,
                  int max_iters) {
    if (!v.same_shape(m)) throw ValidationError("inpaint: geometry mismatch");
    std::vector<Eigen::Index> masked;
    for (Eigen::Index i = 0; i < m.size(); ++i)
        if (m.values[i]) masked.push_back(i);
    if (masked.empty()) return v;
    if (Eigen::Index(masked.size()) == m.size())
        throw ValidationError("inpaint: mask covers the entire volume");

    VoxelGrid out = v;
    // Seed masked voxels with the boundary-ring mean so the maximum principle
    // holds from the first sweep.
    double ring_sum = 0.0;
    Eigen::Index ring_n = 0;
    const Eigen::Index nx = v.nx(), ny = v.ny(), nz = v.nz();
    auto for_neighbors = [&](Eigen::Index i, auto&& fn) {
        const Eigen::Index x = i % nx, y = (i / nx) % ny, z = i / (nx * ny);
        if (x > 0) fn(i - 1);
        if (x + 1 < nx) fn(i + 1);
        if (y > 0) fn(i - nx);
        if (y + 1 < ny) fn(i + nx);
        if (z > 0) fn(i - nx * ny);
        if (z + 1 < nz) fn(i + nx * ny);
    };
    for (Eigen::Index i : masked)
        for_neighbors(i, [&](Eigen::Index j) {
            if (!m.values[j]) {
                ring_sum += v.values[j];
                ++ring_n;
            }
        });
    if (ring_n == 0) throw ValidationError("inpaint: mask has no boundary ring");
    const double seed = ring_sum / double(ring_n);
    for (Eigen::Index i : masked) out.values[i] = seed;

    // Jacobi sweeps: order-independent, so parallel evaluation would agree.
    std::vector<double> next(masked.size());
    for (int it = 0; it < max_iters; ++it) {
        double max_change = 0.0;
        for (std::size_t k = 0; k < masked.size(); ++k) {
            double sum = 0.0;
            int n = 0;
            for_neighbors(masked[k], [&](Eigen::Index j) {
                sum += out.values[j];
                ++n;
            });
            next[k] = sum / double(n);
            max_change = std::max(max_change, std::abs(next[k] - out.values[masked[k]]));
        }
        for (std::size_t k = 0; k < masked.size(); ++k)
            out.values[masked[k]] = next[k];
        if (max_change < tol_hu) break;
    }
    return out;
}

std::pair<std::vector<int>, int> connected_components_3d(const BinaryMask& m) {
    std::vector<int> labels(m.size(), 0);
    int next_label = 0;
    const Eigen::Index nx = m.nx(), ny = m.ny(), nz = m.nz();
    std::deque<Eigen::Index> queue;
    for (Eigen::Index start = 0; start < m.size(); ++start) {
        if (!m.values[start] || labels[start]) continue;
        ++next_label;
        labels[start] = next_label;
        queue.push_back(start);
        while (!queue.empty()) {
            const Eigen::Index i = queue.front();
            queue.pop_front();
            const Eigen::Index x = i % nx, y = (i / nx) % ny, z = i / (nx * ny);
            for (Eigen::Index dz = -1; dz <= 1; ++dz)
                for (Eigen::Index dy = -1; dy <= 1; ++dy)
                    for (Eigen::Index dx = -1; dx <= 1; ++dx) {
                        const Eigen::Index X = x + dx, Y = y + dy, Z = z + dz;
                        if (X < 0 || Y < 0 || Z < 0 || X >= nx || Y >= ny || Z >= nz)
                            continue;
                        const Eigen::Index j = m.index(X, Y, Z);
                        if (m.values[j] && !labels[j]) {
                            labels[j] = next_label;
                            queue.push_back(j);
                        }
                    }
        }
    }
    return {std::move(labels), next_label};
}

std::vector<RoiBlock> extract_rois(const VoxelGrid& v, const BinaryMask& m,
                                   Rng& rng, const RoiOptions& opt) {
    if (!v.same_shape(m)) throw ValidationError("extract_rois: geometry mismatch");
    if ((v.dims.array() < opt.block.array()).any())
        throw ValidationError("extract_rois: volume smaller than ROI block");

    auto [labels, n_components] = connected_components_3d(m);

    auto cut = [&](const Eigen::Vector3i& origin, bool calcium) {
        RoiBlock blk;
        blk.origin = origin;
        blk.has_calcium = calcium;
        blk.values = VoxelGrid(opt.block, v.spacing);
        blk.mask = BinaryMask(opt.block, v.spacing);
        for (int z = 0; z < opt.block[2]; ++z)
            for (int y = 0; y < opt.block[1]; ++y)
                for (int x = 0; x < opt.block[0]; ++x) {
                    blk.values.at(x, y, z) =
                        v.at(origin[0] + x, origin[1] + y, origin[2] + z);
                    blk.mask.at(x, y, z) =
                        m.at(origin[0] + x, origin[1] + y, origin[2] + z);
                }
        return blk;
    };
    auto clamp_origin = [&](Eigen::Vector3i center) -> Eigen::Vector3i {
        const Eigen::Vector3i origin = center - opt.block / 2;
        return origin.cwiseMax(Eigen::Vector3i::Zero())
            .cwiseMin(v.dims - opt.block);
    };
    auto block_has_calcium = [&](const Eigen::Vector3i& origin) {
        for (int z = 0; z < opt.block[2]; ++z)
            for (int y = 0; y < opt.block[1]; ++y)
                for (int x = 0; x < opt.block[0]; ++x)
                    if (m.at(origin[0] + x, origin[1] + y, origin[2] + z)) return true;
        return false;
    };

    // Per-component centroids and one representative voxel each.
    std::vector<Eigen::Vector3d> centroid(n_components, Eigen::Vector3d::Zero());
    std::vector<Eigen::Index> count(n_components, 0);
    std::vector<Eigen::Vector3i> representative(n_components);
    for (Eigen::Index z = 0; z < v.nz(); ++z)
        for (Eigen::Index y = 0; y < v.ny(); ++y)
            for (Eigen::Index x = 0; x < v.nx(); ++x) {
                const int lab = labels[m.index(x, y, z)];
                if (!lab) continue;
                centroid[lab - 1] += Eigen::Vector3d(double(x), double(y), double(z));
                if (count[lab - 1]++ == 0)
                    representative[lab - 1] = Eigen::Vector3i(int(x), int(y), int(z));
            }

    std::vector<RoiBlock> out;
    for (int c = 0; c < n_components; ++c) {
        centroid[c] /= double(count[c]);
        Eigen::Vector3i center = centroid[c].array().round().cast<int>();
        center[0] += int(rng.uniform_int(-opt.jitter, opt.jitter));
        center[1] += int(rng.uniform_int(-opt.jitter, opt.jitter));
        Eigen::Vector3i origin = clamp_origin(center);
        if (!block_has_calcium(origin)) // concave component or heavy jitter
            origin = clamp_origin(representative[c]);
        out.push_back(cut(origin, true));
    }
    for (int b = 0; b < opt.background_blocks; ++b) {
        for (int attempt = 0; attempt < opt.placement_attempts; ++attempt) {
            Eigen::Vector3i origin(
                int(rng.uniform_int(0, v.dims[0] - opt.block[0])),
                int(rng.uniform_int(0, v.dims[1] - opt.block[1])),
                int(rng.uniform_int(0, v.dims[2] - opt.block[2])));
            if (!block_has_calcium(origin)) {
                out.push_back(cut(origin, false));
                break;
            }
        }
    }
    return out;
}

std::vector<ContextWindow> extract_context_windows(const NormalizedGrid& v,
                                                   Eigen::Index h, Eigen::Index w,
                                                   Eigen::Index k, Eigen::Index stride) {
    if (k % 2 == 0) throw ValidationError("context window depth k must be odd");
    if (k < 1 || stride < 1) throw ValidationError("invalid window parameters");
    if (h > v.nx() || w > v.ny())
        throw ValidationError("context window larger than volume plane");
    const Eigen::Index x0 = (v.nx() - h) / 2;
    const Eigen::Index y0 = (v.ny() - w) / 2;
    std::vector<ContextWindow> out;
    for (Eigen::Index zc = 0; zc < v.nz(); zc += stride) {
        ContextWindow cw;
        cw.center = int(zc);
        cw.win = Window(h, w, k);
        for (Eigen::Index j = 0; j < k; ++j) {
            // Replicate-clamp z at both volume edges.
            const Eigen::Index z =
                std::clamp(zc + j - (k - 1) / 2, Eigen::Index(0), v.nz() - 1);
            cw.win.plane(j) = v.slice(z).block(x0, y0, h, w);
        }
        out.push_back(std::move(cw));
    }
    return out;
}

} // namespace cacmc
