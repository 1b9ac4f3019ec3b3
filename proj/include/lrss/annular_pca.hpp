#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "lrss/cube.hpp"
#include "lrss/error.hpp"
#include "lrss/image.hpp"
#include "lrss/parallel.hpp"

namespace lrss {

enum class Collapse { Median, Mean };

struct ApcaConfig {
    int n_components = 0;
    double annulus_width = 1.0;
    double r_in = 0.0;
    double r_out = 0.0;
    Collapse collapse = Collapse::Median;
};

/// Per-annulus PCA background subtraction. For each ring of width
/// annulus_width between r_in and r_out: extract the T x n_pixels matrix,
/// subtract its temporal mean, project out the top n_components principal
/// components, write residuals back. n_components = 0 subtracts the temporal
/// mean only. Pixels outside [r_in, r_out] are zero in the output.
inline Cube annular_pca_residual(const AdiCube& cube, const ApcaConfig& cfg) {
    validate_adi_cube(cube, "annular_pca_residual");
    const int t = cube.frames.n_frames;
    const int h = cube.frames.height;
    const int w = cube.frames.width;
    if (!(cfg.r_in >= 0.0) || !(cfg.r_in < cfg.r_out))
        throw InvalidArgument("annular_pca_residual: need 0 <= r_in < r_out");
    if (!(cfg.annulus_width >= 1.0))
        throw InvalidArgument("annular_pca_residual: annulus_width must be >= 1");
    if (!(cfg.r_out <= (std::min(h, w) - 1) / 2.0 + 1.0))
        throw InvalidArgument("annular_pca_residual: annuli do not fit in the frame");
    if (cfg.n_components < 0 || cfg.n_components > t)
        throw InvalidArgument("annular_pca_residual: n_components must be in [0, T]");

    const int n_rings = static_cast<int>(
        std::ceil((cfg.r_out - cfg.r_in) / cfg.annulus_width - 1e-12));
    // Pixel lists per ring, row-major within each ring.
    std::vector<std::vector<int>> ring_pixels(static_cast<size_t>(std::max(n_rings, 1)));
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double rho = std::hypot(r - cube.center.row, c - cube.center.col);
            if (rho < cfg.r_in || rho > cfg.r_out) continue;
            int ring = static_cast<int>((rho - cfg.r_in) / cfg.annulus_width);
            ring = std::clamp(ring, 0, n_rings - 1);
            ring_pixels[static_cast<size_t>(ring)].push_back(r * w + c);
        }
    }

    Cube residual(t, h, w);
    parallel_for(static_cast<std::int64_t>(ring_pixels.size()), [&](std::int64_t ring) {
        const auto& pixels = ring_pixels[static_cast<size_t>(ring)];
        if (pixels.empty()) return;
        const int n = static_cast<int>(pixels.size());
        Eigen::MatrixXd m(t, n);
        for (int i = 0; i < t; ++i) {
            auto frame = cube.frames.frame_span(i);
            for (int j = 0; j < n; ++j) m(i, j) = frame[static_cast<size_t>(pixels[j])];
        }
        const Eigen::RowVectorXd mean = m.colwise().mean();
        Eigen::MatrixXd centered = m.rowwise() - mean;
        if (cfg.n_components > 0) {
            // Principal directions from the T x T Gram matrix; projecting out
            // the top-q left singular vectors removes the same subspace as
            // projecting rows onto the top-q right singular vectors.
            const Eigen::MatrixXd gram = centered * centered.transpose();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
            const Eigen::MatrixXd u =
                eig.eigenvectors().rightCols(cfg.n_components); // largest eigenvalues
            centered -= u * (u.transpose() * centered);
        }
        for (int i = 0; i < t; ++i) {
            auto frame = residual.frame_span(i);
            for (int j = 0; j < n; ++j) frame[static_cast<size_t>(pixels[j])] = centered(i, j);
        }
    });
    return residual;
}

/// Rotates each frame by -(angle_t - angle_0) about center, then collapses
/// pixel-wise with the median (even counts average the middle pair) or mean.
inline Image derotate_collapse(const Cube& residual, std::span<const double> angles_deg,
                               Pos center, Collapse collapse) {
    if (residual.n_frames < 1) throw InvalidArgument("derotate_collapse: empty cube");
    if (angles_deg.size() != static_cast<size_t>(residual.n_frames))
        throw InvalidArgument("derotate_collapse: angle count does not match frame count");
    const int t = residual.n_frames;
    std::vector<Image> rotated(static_cast<size_t>(t));
    parallel_for(t, [&](std::int64_t i) {
        const double dtheta = angles_deg[static_cast<size_t>(i)] - angles_deg[0];
        rotated[static_cast<size_t>(i)] =
            rotate_image(residual.frame_image(static_cast<int>(i)), -dtheta, center);
    });
    Image out(residual.height, residual.width);
    std::vector<double> column(static_cast<size_t>(t));
    for (size_t p = 0; p < out.v.size(); ++p) {
        for (int i = 0; i < t; ++i) column[static_cast<size_t>(i)] = rotated[static_cast<size_t>(i)].v[p];
        if (collapse == Collapse::Mean) {
            double s = 0.0;
            for (double x : column) s += x;
            out.v[p] = s / t;
        } else {
            std::sort(column.begin(), column.end());
            out.v[p] = (t % 2 == 1) ? column[static_cast<size_t>(t / 2)]
                                    : 0.5 * (column[static_cast<size_t>(t / 2 - 1)] +
                                             column[static_cast<size_t>(t / 2)]);
        }
    }
    return out;
}

namespace detail {

/// Integer offsets within the aperture radius, shared by every test and
/// reference aperture so their statistics are comparable.
inline std::vector<std::pair<int, int>> aperture_offsets(double radius) {
    std::vector<std::pair<int, int>> offsets;
    const int reach = static_cast<int>(std::floor(radius));
    for (int dr = -reach; dr <= reach; ++dr)
        for (int dc = -reach; dc <= reach; ++dc)
            if (static_cast<double>(dr) * dr + static_cast<double>(dc) * dc <=
                radius * radius)
                offsets.emplace_back(dr, dc);
    return offsets;
}

inline double aperture_sum(const Image& img, Pos p,
                           const std::vector<std::pair<int, int>>& offsets) {
    double s = 0.0;
    for (const auto& [dr, dc] : offsets)
        s += bilinear_sample(img, p.row + dr, p.col + dc);
    return s;
}

} // namespace detail

/// Aperture-photometry significance surface. Per pixel: (aperture sum minus
/// the mean of non-overlapping reference apertures at the same radius from
/// center) / (their sample std * sqrt(1 + 1/n)). The test aperture and its
/// two ring neighbours are excluded from the references; pixels with n < 3
/// references (or zero ring variance) score 0.
inline Image snr_map(const Image& collapsed, double fwhm, Pos center) {
    validate_image(collapsed, "snr_map");
    if (!(fwhm > 0.0)) throw InvalidArgument("snr_map: fwhm must be positive");
    const double radius = fwhm / 2.0;
    const auto offsets = detail::aperture_offsets(radius);
    Image out(collapsed.rows, collapsed.cols);
    parallel_for(collapsed.rows, [&](std::int64_t row) {
        const int r = static_cast<int>(row);
        for (int c = 0; c < collapsed.cols; ++c) {
            const double dr = r - center.row;
            const double dc = c - center.col;
            const double rho = std::hypot(dr, dc);
            if (rho < radius) continue; // no room for a ring of apertures
            const int n_slots = static_cast<int>(std::floor(std::numbers::pi * rho / radius));
            if (n_slots < 6) continue; // test + 2 neighbours + at least 3 references
            const double phi0 = std::atan2(dr, dc);
            std::vector<double> refs;
            refs.reserve(static_cast<size_t>(n_slots) - 3);
            for (int k = 2; k <= n_slots - 2; ++k) {
                const double phi = phi0 + 2.0 * std::numbers::pi * k / n_slots;
                const Pos p{center.row + rho * std::sin(phi), center.col + rho * std::cos(phi)};
                refs.push_back(detail::aperture_sum(collapsed, p, offsets));
            }
            const int n = static_cast<int>(refs.size());
            if (n < 3) continue;
            double mean = 0.0;
            for (double x : refs) mean += x;
            mean /= n;
            double var = 0.0;
            for (double x : refs) var += (x - mean) * (x - mean);
            var /= (n - 1);
            const double sd = std::sqrt(var);
            if (!(sd > 0.0)) continue;
            const double test = detail::aperture_sum(
                collapsed, {static_cast<double>(r), static_cast<double>(c)}, offsets);
            out.at(r, c) = (test - mean) / (sd * std::sqrt(1.0 + 1.0 / n));
        }
    });
    return out;
}

} // namespace lrss
