#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "lrss/error.hpp"

namespace lrss {

/// Subpixel (row, col) position.
struct Pos {
    double row = 0.0;
    double col = 0.0;
};

/// Dense real-valued 2-D image, row-major.
struct Image {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Image() = default;
    Image(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    bool inside(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
    size_t size() const { return v.size(); }
};

inline void validate_image(const Image& img, const char* what) {
    if (img.rows < 1 || img.cols < 1)
        throw InvalidArgument(std::string(what) + ": empty image");
    if (img.v.size() != static_cast<size_t>(img.rows) * static_cast<size_t>(img.cols))
        throw InvalidArgument(std::string(what) + ": data length does not match rows*cols");
}

inline double deg_to_rad(double deg) { return deg * (std::numbers::pi / 180.0); }

/// cos/sin of an angle in degrees, exact at multiples of 90 so that
/// lattice-to-lattice rotations stay bit-exact.
struct CosSin {
    double c, s;
};

inline CosSin cos_sin_deg(double angle_deg) {
    const double q = angle_deg / 90.0;
    const double qr = std::round(q);
    if (q == qr && std::abs(qr) < 1e15) {
        switch (static_cast<int>(std::fmod(std::fmod(qr, 4.0) + 4.0, 4.0))) {
            case 0: return {1.0, 0.0};
            case 1: return {0.0, 1.0};
            case 2: return {-1.0, 0.0};
            default: return {0.0, -1.0};
        }
    }
    const double a = deg_to_rad(angle_deg);
    return {std::cos(a), std::sin(a)};
}

/// Applies the fixed rotation convention to a (row, col) offset: a positive
/// angle moves content counter-clockwise when the image is displayed with
/// row 0 at the top (so "right of center" rotates to "above center").
inline Pos rotate_offset(Pos offset, CosSin cs) {
    return {cs.c * offset.row - cs.s * offset.col,
            cs.s * offset.row + cs.c * offset.col};
}

inline Pos rotate_about(Pos p, Pos center, double angle_deg) {
    const CosSin cs = cos_sin_deg(angle_deg);
    const Pos d = rotate_offset({p.row - center.row, p.col - center.col}, cs);
    return {center.row + d.row, center.col + d.col};
}

/// Bilinear sample with zero padding outside the frame.
inline double bilinear_sample(const Image& img, double r, double c) {
    const double fr0 = std::floor(r);
    const double fc0 = std::floor(c);
    // Guard against casts overflowing for samples far outside the frame.
    if (fr0 <= -2.0 || fr0 >= static_cast<double>(img.rows) ||
        fc0 <= -2.0 || fc0 >= static_cast<double>(img.cols))
        return 0.0;
    const int r0 = static_cast<int>(fr0);
    const int c0 = static_cast<int>(fc0);
    const double wr = r - fr0;
    const double wc = c - fc0;
    auto px = [&](int rr, int cc) {
        return img.inside(rr, cc) ? img.at(rr, cc) : 0.0;
    };
    return (1.0 - wr) * ((1.0 - wc) * px(r0, c0) + wc * px(r0, c0 + 1)) +
           wr * ((1.0 - wc) * px(r0 + 1, c0) + wc * px(r0 + 1, c0 + 1));
}

/// Rotates image content by angle_deg about a subpixel center.
/// Inverse mapping: each output pixel samples the input at the back-rotated
/// coordinate, bilinearly, with out-of-bounds samples read as zero.
inline Image rotate_image(const Image& img, double angle_deg, Pos center) {
    validate_image(img, "rotate_image");
    if (!std::isfinite(angle_deg))
        throw InvalidArgument("rotate_image: non-finite angle");
    if (!(center.row >= 0.0 && center.row <= img.rows - 1.0 &&
          center.col >= 0.0 && center.col <= img.cols - 1.0))
        throw InvalidArgument("rotate_image: center outside image bounds");
    if (angle_deg == 0.0) return img;

    const CosSin cs = cos_sin_deg(-angle_deg);
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            const Pos src = rotate_offset({r - center.row, c - center.col}, cs);
            out.at(r, c) = bilinear_sample(img, center.row + src.row, center.col + src.col);
        }
    }
    return out;
}

enum class PsfNorm { UnitSum, UnitL2 };

/// Small odd-sized stamp modelling the instrument response.
/// Construct through make_psf / make_gaussian_psf so the declared
/// normalization holds by construction.
struct PsfTemplate {
    int size = 0; // odd k
    std::vector<double> v;
    PsfNorm normalization = PsfNorm::UnitSum;

    double& at(int r, int c) { return v[static_cast<size_t>(r) * size + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * size + c]; }
    int center() const { return (size - 1) / 2; }

    double sum() const {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    double l2_norm() const {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }
};

inline PsfTemplate make_psf(int k, std::vector<double> data, PsfNorm norm = PsfNorm::UnitSum) {
    if (k < 1 || k % 2 == 0)
        throw InvalidArgument("make_psf: size must be odd and >= 1, got " + std::to_string(k));
    if (data.size() != static_cast<size_t>(k) * static_cast<size_t>(k))
        throw InvalidArgument("make_psf: data length does not match size*size");
    for (double x : data)
        if (!std::isfinite(x)) throw InvalidArgument("make_psf: non-finite stamp value");
    PsfTemplate psf;
    psf.size = k;
    psf.v = std::move(data);
    psf.normalization = norm;
    double denom = (norm == PsfNorm::UnitSum) ? psf.sum() : psf.l2_norm();
    if (!(std::abs(denom) > 1e-300))
        throw InvalidArgument("make_psf: stamp cannot be normalized (zero sum/norm)");
    for (double& x : psf.v) x /= denom;
    return psf;
}

/// FWHM of a Gaussian = 2*sqrt(2*ln 2) * sigma.
inline constexpr double kFwhmToSigma = 2.3548200450309493;

/// Isotropic Gaussian stamp, peak at the center pixel, normalized unit-sum.
inline PsfTemplate make_gaussian_psf(int k, double fwhm) {
    if (k < 1 || k % 2 == 0)
        throw InvalidArgument("make_gaussian_psf: size must be odd and >= 1");
    if (!(fwhm > 0.0) || !std::isfinite(fwhm))
        throw InvalidArgument("make_gaussian_psf: fwhm must be positive");
    const double sigma = fwhm / kFwhmToSigma;
    const int c = (k - 1) / 2;
    std::vector<double> data(static_cast<size_t>(k) * k);
    for (int r = 0; r < k; ++r)
        for (int j = 0; j < k; ++j) {
            const double d2 = double(r - c) * (r - c) + double(j - c) * (j - c);
            data[static_cast<size_t>(r) * k + j] = std::exp(-d2 / (2.0 * sigma * sigma));
        }
    return make_psf(k, std::move(data), PsfNorm::UnitSum);
}

/// Cross-correlation (not flipped convolution): out(p) = sum_q img(p+q-c) * ker(q),
/// zero-padded at the boundary, c the kernel center pixel. Same-size output.
inline Image cross_correlate(const Image& img, const PsfTemplate& kernel) {
    validate_image(img, "cross_correlate");
    if (kernel.size > img.rows || kernel.size > img.cols)
        throw InvalidArgument("cross_correlate: kernel larger than image");
    const int kc = kernel.center();
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            double acc = 0.0;
            for (int i = 0; i < kernel.size; ++i) {
                const int rr = r + i - kc;
                if (rr < 0 || rr >= img.rows) continue;
                for (int j = 0; j < kernel.size; ++j) {
                    const int cc = c + j - kc;
                    if (cc < 0 || cc >= img.cols) continue;
                    acc += img.at(rr, cc) * kernel.at(i, j);
                }
            }
            out.at(r, c) = acc;
        }
    }
    return out;
}

/// Returns img + scale * (stamp bilinearly shifted to the subpixel center).
/// Stamp mass falling outside the frame is dropped; the input is untouched.
inline Image add_stamp(const Image& img, const PsfTemplate& stamp, Pos center, double scale) {
    validate_image(img, "add_stamp");
    if (!std::isfinite(center.row) || !std::isfinite(center.col))
        throw InvalidArgument("add_stamp: non-finite center");
    if (!std::isfinite(scale))
        throw InvalidArgument("add_stamp: non-finite scale");
    Image out = img;
    if (scale == 0.0) return out;
    const int kc = stamp.center();
    // Every stamp pixel lands with the same fractional offset, so the four
    // bilinear weights are shared across the stamp.
    const double tr = center.row - kc;
    const double tc = center.col - kc;
    const double br = std::floor(tr);
    const double bc = std::floor(tc);
    if (br <= -1e9 || br >= 1e9 || bc <= -1e9 || bc >= 1e9) return out; // far outside
    const int ir = static_cast<int>(br);
    const int ic = static_cast<int>(bc);
    const double fr = tr - br;
    const double fc = tc - bc;
    const double w00 = (1.0 - fr) * (1.0 - fc);
    const double w01 = (1.0 - fr) * fc;
    const double w10 = fr * (1.0 - fc);
    const double w11 = fr * fc;
    auto deposit = [&](int r, int c, double val) {
        if (val != 0.0 && out.inside(r, c)) out.at(r, c) += val;
    };
    for (int i = 0; i < stamp.size; ++i) {
        for (int j = 0; j < stamp.size; ++j) {
            const double val = scale * stamp.at(i, j);
            const int r = ir + i;
            const int c = ic + j;
            deposit(r, c, val * w00);
            deposit(r, c + 1, val * w01);
            deposit(r + 1, c, val * w10);
            deposit(r + 1, c + 1, val * w11);
        }
    }
    return out;
}

} // namespace lrss
