#include "cacmc/tomo.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace cacmc {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

Eigen::Index next_pow2(Eigen::Index n) {
    Eigen::Index p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Ram-Lak frequency response from its band-limited spatial kernel
// (Kak & Slaney), times two to pair with the pi/(2N) backprojection scale.
// The projector integrates strips over detector bins, a box response the
// plain ramp does not expect; dividing by sinc(pi f) undoes it.
constexpr double kSincCompensation = 2.5;

Eigen::VectorXd ramp_filter(Eigen::Index size, bool hann) {
    Eigen::VectorXd kernel = Eigen::VectorXd::Zero(size);
    kernel[0] = 0.25;
    for (Eigen::Index n = 1; n < size / 2; n += 2) {
        const double v = -1.0 / (M_PI * M_PI * double(n) * double(n));
        kernel[n] = v;
        kernel[size - n] = v; // circular symmetry
    }
    Eigen::FFT<double> fft;
    Eigen::VectorXcd spectrum(size);
    fft.fwd(spectrum, kernel);
    Eigen::VectorXd filt = 2.0 * spectrum.real();
    for (Eigen::Index i = 1; i < size; ++i) {
        const double f = double(i <= size / 2 ? i : i - size) / double(size);
        const double sinc = std::sin(M_PI * f) / (M_PI * f);
        filt[i] /= std::pow(sinc, kSincCompensation);
    }
    if (hann) {
        for (Eigen::Index i = 0; i < size; ++i) {
            const double f = double(i <= size / 2 ? i : i - size) / double(size);
            filt[i] *= 0.5 * (1.0 + std::cos(2.0 * M_PI * f));
        }
    }
    return filt;
}

} // namespace

bool valid_projection_count(int n) {
    return std::find(kProjectionCounts.begin(), kProjectionCounts.end(), n) !=
           kProjectionCounts.end();
}

int detector_bins(Eigen::Index nx, Eigen::Index ny) {
    return int(std::ceil(std::hypot(double(nx), double(ny))));
}

namespace {

// Cumulative projected footprint of a unit pixel onto the detector axis:
// the line integrals of a unit square along direction theta form a trapezoid
// with feet at +-a, plateau +-b and height 1/(a+b). T(x) integrates it from
// the left; bin weights are differences of T at the bin edges.
struct PixelFootprint {
    double a, b, height, ramp;

    explicit PixelFootprint(double theta_rad) {
        const double ac = std::abs(std::cos(theta_rad));
        const double as = std::abs(std::sin(theta_rad));
        a = 0.5 * (ac + as);
        b = 0.5 * std::abs(ac - as);
        height = 1.0 / std::max(ac, as);
        ramp = a - b;
    }

    double cumulative(double x) const {
        if (x <= -a) return 0.0;
        if (x >= a) return 1.0;
        if (ramp < 1e-12) // axis-aligned: box profile
            return std::clamp((x + a) * height, 0.0, 1.0);
        if (x < -b) return height * (x + a) * (x + a) / (2.0 * ramp);
        if (x <= b) return height * (0.5 * ramp + (x + b));
        return 1.0 - height * (a - x) * (a - x) / (2.0 * ramp);
    }
};

} // namespace

Eigen::VectorXd radon_project(const Eigen::Ref<const Eigen::MatrixXd>& slice,
                              double theta_deg, double spacing_mm, int bins) {
    if (!slice.allFinite()) throw NumericError("radon_project: non-finite input");
    const Eigen::Index nx = slice.rows(), ny = slice.cols();
    const double cx = double(nx - 1) / 2.0, cy = double(ny - 1) / 2.0;
    const double s0 = double(bins - 1) / 2.0; // detector center offset
    const double c = std::cos(theta_deg * kDegToRad);
    const double s = std::sin(theta_deg * kDegToRad);
    const PixelFootprint fp(theta_deg * kDegToRad);

    Eigen::VectorXd row = Eigen::VectorXd::Zero(bins);
    for (Eigen::Index y = 0; y < ny; ++y) {
        const double ry = double(y) - cy;
        for (Eigen::Index x = 0; x < nx; ++x) {
            const double val = slice(x, y);
            if (val == 0.0) continue;
            const double det = (double(x) - cx) * c + ry * s + s0;
            const auto j_lo = Eigen::Index(std::floor(det - fp.a + 0.5));
            const auto j_hi = Eigen::Index(std::floor(det + fp.a + 0.5));
            double below = 0.0;
            for (Eigen::Index j = j_lo; j <= j_hi; ++j) {
                const double upto = fp.cumulative(double(j) + 0.5 - det);
                // Clamp boundary crumbs into the edge bins so the detector
                // keeps the full slice mass.
                const auto jc = std::clamp<Eigen::Index>(j, 0, bins - 1);
                row[jc] += val * (upto - below);
                below = upto;
            }
            if (below < 1.0) row[std::min<Eigen::Index>(bins - 1, j_hi + 1)] +=
                val * (1.0 - below);
        }
    }
    return row * spacing_mm;
}

Sinogram radon_full(const Eigen::Ref<const Eigen::MatrixXd>& slice,
                    const AngleSet& angles, double spacing_mm) {
    Sinogram sino;
    sino.bin_spacing_mm = spacing_mm;
    const int bins = detector_bins(slice.rows(), slice.cols());
    sino.rows.resize(angles.count(), bins);
    for (int i = 0; i < angles.count(); ++i)
        sino.rows.row(i) = radon_project(slice, angles.degrees[i], spacing_mm, bins);
    return sino;
}

Eigen::MatrixXd fbp(const Sinogram& sino, const AngleSet& angles, Eigen::Index nx,
                    Eigen::Index ny, const FbpOptions& opt) {
    const int n_angles = angles.count();
    if (n_angles < 2) throw ValidationError("fbp: need at least two angles");
    if (sino.count() != n_angles)
        throw ValidationError("fbp: sinogram row count does not match angle set");
    const int bins = sino.bins();

    // Filter in pixel units: projections carry a *spacing factor from the
    // projector which the reconstruction removes again.
    const Eigen::Index pad = next_pow2(std::max<Eigen::Index>(64, 2 * bins));
    const Eigen::VectorXd filt = ramp_filter(pad, opt.hann);
    Eigen::FFT<double> fft;
    Eigen::MatrixXd filtered(n_angles, bins);
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(pad);
    Eigen::VectorXcd spec(pad);
    Eigen::VectorXd back(pad);
    for (int i = 0; i < n_angles; ++i) {
        padded.setZero();
        padded.head(bins) = sino.rows.row(i).transpose() / sino.bin_spacing_mm;
        fft.fwd(spec, padded);
        spec.array() *= filt.array();
        fft.inv(back, spec);
        filtered.row(i) = back.head(bins).transpose();
    }

    const double cx = double(nx - 1) / 2.0, cy = double(ny - 1) / 2.0;
    const double s0 = double(bins - 1) / 2.0;
    const double radius = double(std::min(nx, ny)) / 2.0;
    const double scale = M_PI / (2.0 * double(n_angles));

    Eigen::MatrixXd out(nx, ny);
    std::vector<double> cs(n_angles), sn(n_angles);
    for (int i = 0; i < n_angles; ++i) {
        cs[i] = std::cos(angles.degrees[i] * kDegToRad);
        sn[i] = std::sin(angles.degrees[i] * kDegToRad);
    }
    for (Eigen::Index y = 0; y < ny; ++y) {
        const double ry = double(y) - cy;
        for (Eigen::Index x = 0; x < nx; ++x) {
            const double rx = double(x) - cx;
            if (rx * rx + ry * ry > radius * radius) {
                out(x, y) = opt.background_hu;
                continue;
            }
            double acc = 0.0;
            for (int i = 0; i < n_angles; ++i) {
                const double det = rx * cs[i] + ry * sn[i] + s0;
                const auto j = Eigen::Index(std::floor(det));
                const double f = det - double(j);
                double v = 0.0;
                if (j >= 0 && j < bins) v += filtered(i, j) * (1.0 - f);
                if (j + 1 >= 0 && j + 1 < bins) v += filtered(i, j + 1) * f;
                acc += v;
            }
            out(x, y) = acc * scale;
        }
    }
    return out;
}

} // namespace cacmc
