#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lrss/annular_pca.hpp"
#include "lrss/cube.hpp"
#include "lrss/dictionary.hpp"
#include "lrss/error.hpp"
#include "lrss/image.hpp"
#include "lrss/rng.hpp"
#include "lrss/solver.hpp"

namespace lrss {

/// Reproducible synthetic ADI cube: rank-r0 background A*B^T from a seeded
/// standard normal, plus i.i.d. Gaussian pixel noise.
struct SynthSpec {
    int t = 0, h = 0, w = 0;
    std::vector<double> angles_deg; // resolved list; see linspace_angles for spans
    int background_rank = 0;
    double background_scale = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

inline AdiCube synth_cube(const SynthSpec& spec) {
    if (spec.t < 2 || spec.h < 1 || spec.w < 1)
        throw InvalidArgument("synth_cube: need t >= 2 and nonempty frames");
    if (spec.angles_deg.size() != static_cast<size_t>(spec.t))
        throw InvalidArgument("synth_cube: angle count does not match frame count");
    if (spec.background_rank < 0)
        throw InvalidArgument("synth_cube: background rank must be >= 0");
    if (spec.noise_sigma < 0.0)
        throw InvalidArgument("synth_cube: noise sigma must be >= 0");

    const size_t npix = static_cast<size_t>(spec.h) * spec.w;
    Cube frames(spec.t, spec.h, spec.w);
    NormalSampler normal(spec.seed);

    // Draw order is fixed: A (t x r0, row-major), then B (npix x r0,
    // row-major), then per-pixel noise — identical spec, identical bytes.
    const int r0 = spec.background_rank;
    std::vector<double> a(static_cast<size_t>(spec.t) * r0);
    std::vector<double> b(npix * static_cast<size_t>(r0));
    for (double& x : a) x = normal();
    for (double& x : b) x = normal();
    for (int t = 0; t < spec.t; ++t) {
        auto frame = frames.frame_span(t);
        for (size_t p = 0; p < npix; ++p) {
            double acc = 0.0;
            for (int k = 0; k < r0; ++k)
                acc += a[static_cast<size_t>(t) * r0 + k] * b[p * static_cast<size_t>(r0) + k];
            frame[p] = spec.background_scale * acc;
        }
    }
    if (spec.noise_sigma > 0.0)
        for (double& x : frames.v) x += spec.noise_sigma * normal();

    return make_adi_cube(std::move(frames), spec.angles_deg);
}

/// Companion injection: flux is the scale applied to the unit-sum PSF, so it
/// equals the total injected flux per frame (before edge clipping).
struct InjectionSpec {
    Pos ref_pos;
    double flux = 0.0;
    PsfTemplate psf;
};

inline AdiCube inject(const AdiCube& cube, const InjectionSpec& inj) {
    validate_adi_cube(cube, "inject");
    if (!(inj.flux >= 0.0))
        throw InvalidArgument("inject: flux must be >= 0");
    AdiCube out = cube;
    const auto track = planet_track(inj.ref_pos, cube.center, cube.angles_deg);
    for (int t = 0; t < cube.frames.n_frames; ++t) {
        Image frame = out.frames.frame_image(t);
        out.frames.set_frame(t, add_stamp(frame, inj.psf, track[static_cast<size_t>(t)], inj.flux));
    }
    return out;
}

/// ROC curve over score sets. Thresholds are the sorted unique scores;
/// TPR/FPR count scores >= threshold, ties handled atomically (one point per
/// unique score). The curve implicitly starts at (0, 0); its last point is
/// (1, 1). AUC is the trapezoidal integral of that polyline.
struct RocReport {
    struct Point {
        double threshold, fpr, tpr;
    };
    std::vector<Point> points; // sorted by descending threshold
    double auc = 0.0;
    int n_pos = 0, n_neg = 0;

    /// Trapezoidal integral of the stored points, anchored at (0, 0).
    double trapezoid() const {
        double area = 0.0, prev_fpr = 0.0, prev_tpr = 0.0;
        for (const auto& p : points) {
            area += (p.fpr - prev_fpr) * (p.tpr + prev_tpr) / 2.0;
            prev_fpr = p.fpr;
            prev_tpr = p.tpr;
        }
        return area;
    }
};

inline RocReport roc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty())
        throw InvalidArgument("roc: score lists must be non-empty");
    for (double s : pos_scores)
        if (!std::isfinite(s)) throw InvalidArgument("roc: non-finite positive score");
    for (double s : neg_scores)
        if (!std::isfinite(s)) throw InvalidArgument("roc: non-finite negative score");

    std::vector<double> thresholds(pos_scores.begin(), pos_scores.end());
    thresholds.insert(thresholds.end(), neg_scores.begin(), neg_scores.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::vector<double> pos_sorted(pos_scores.begin(), pos_scores.end());
    std::vector<double> neg_sorted(neg_scores.begin(), neg_scores.end());
    std::sort(pos_sorted.begin(), pos_sorted.end(), std::greater<>());
    std::sort(neg_sorted.begin(), neg_sorted.end(), std::greater<>());

    RocReport report;
    report.n_pos = static_cast<int>(pos_scores.size());
    report.n_neg = static_cast<int>(neg_scores.size());
    size_t ip = 0, in = 0;
    for (double th : thresholds) {
        while (ip < pos_sorted.size() && pos_sorted[ip] >= th) ++ip;
        while (in < neg_sorted.size() && neg_sorted[in] >= th) ++in;
        report.points.push_back({th, static_cast<double>(in) / report.n_neg,
                                 static_cast<double>(ip) / report.n_pos});
    }
    report.auc = report.trapezoid();
    return report;
}

/// Mann-Whitney pair statistic: (#(p > n) + 0.5 * #(p == n)) / (P * N).
/// Kept alongside roc() as the independent cross-check of the trapezoid AUC.
inline double mann_whitney_auc(std::span<const double> pos_scores,
                               std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty())
        throw InvalidArgument("mann_whitney_auc: score lists must be non-empty");
    double acc = 0.0;
    for (double p : pos_scores)
        for (double n : neg_scores) {
            if (p > n) acc += 1.0;
            else if (p == n) acc += 0.5;
        }
    return acc / (static_cast<double>(pos_scores.size()) * neg_scores.size());
}

enum class Detector { Lrss, Apca };

inline std::string detector_name(Detector d) { return d == Detector::Lrss ? "lrss" : "apca"; }

/// Everything the two detectors need to score one cube.
struct DetectorParams {
    // shared geometry
    double r_in = 0.0, r_out = 0.0;
    int step = 1;
    PsfTemplate psf;
    double fwhm = 2.0;
    // lrss
    SolverConfig solver;
    // apca
    int apca_components = 0;
    double apca_annulus_width = 1.0;
    Collapse apca_collapse = Collapse::Median;
};

/// Dense sky-frame score surface for the structured-sparse detector:
/// |<Y - L, atom>| at every atom ref position. The dictionary must match the
/// cube's shape and angles.
inline Image lrss_score_surface(const AdiCube& cube, const TrajectoryDictionary& dict,
                                const SolverConfig& solver_cfg) {
    const Decomposition dec = solve(cube, dict, solver_cfg);
    Image surface(dict.height, dict.width);
    for (int a = 0; a < dict.n_atoms(); ++a) {
        const auto& atom = dict.atom(a);
        const int r = static_cast<int>(std::lround(atom.ref_pos.row));
        const int c = static_cast<int>(std::lround(atom.ref_pos.col));
        if (surface.inside(r, c))
            surface.at(r, c) = std::abs(dec.correlation_map[static_cast<size_t>(a)]);
    }
    return surface;
}

inline Image apca_score_surface(const AdiCube& cube, const DetectorParams& params) {
    ApcaConfig cfg;
    cfg.n_components = params.apca_components;
    cfg.annulus_width = params.apca_annulus_width;
    cfg.r_in = params.r_in;
    cfg.r_out = params.r_out;
    cfg.collapse = params.apca_collapse;
    const Cube residual = annular_pca_residual(cube, cfg);
    const Image collapsed =
        derotate_collapse(residual, cube.angles_deg, cube.center, cfg.collapse);
    return snr_map(collapsed, params.fwhm, cube.center);
}

/// Maximum of the score surface over the annulus [r_in, r_out] from center —
/// the "detection anywhere is a false positive" convention for blank trials.
inline double annulus_max(const Image& surface, Pos center, double r_in, double r_out) {
    double best = 0.0;
    bool any = false;
    for (int r = 0; r < surface.rows; ++r)
        for (int c = 0; c < surface.cols; ++c) {
            const double rho = std::hypot(r - center.row, c - center.col);
            if (rho < r_in || rho > r_out) continue;
            if (!any || surface.at(r, c) > best) {
                best = surface.at(r, c);
                any = true;
            }
        }
    return any ? best : 0.0;
}

/// One scalar per trial: positives read the surface at the injected position,
/// blank (negative) trials take the annulus maximum.
/// A pre-built dictionary for the cube's shape/angles is required for the
/// lrss detector and ignored by apca.
inline double score_trial(const AdiCube& cube, Detector detector, const DetectorParams& params,
                          const TrajectoryDictionary* dict, const Pos* injected_pos) {
    Image surface;
    if (detector == Detector::Lrss) {
        if (dict == nullptr)
            throw InvalidArgument("score_trial: lrss detector needs a dictionary");
        surface = lrss_score_surface(cube, *dict, params.solver);
    } else {
        surface = apca_score_surface(cube, params);
    }
    if (injected_pos == nullptr)
        return annulus_max(surface, cube.center, params.r_in, params.r_out);
    const int r = static_cast<int>(std::lround(injected_pos->row));
    const int c = static_cast<int>(std::lround(injected_pos->col));
    return surface.inside(r, c) ? surface.at(r, c) : 0.0;
}

} // namespace lrss
