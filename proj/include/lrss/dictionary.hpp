#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lrss/cube.hpp"
#include "lrss/error.hpp"
#include "lrss/image.hpp"
#include "lrss/parallel.hpp"

namespace lrss {

/// One candidate planet trajectory: the PSF swept along the field-rotation
/// arc anchored at ref_pos in the frame-0 (sky) orientation.
struct TrajectoryAtom {
    int atom_id = -1;
    Pos ref_pos;
    std::vector<Pos> per_frame_pos;
    double norm = 0.0; // l2 norm of the swept clipped stamp cube, pre-normalization
};

struct AnnulusGrid {
    double r_in = 0.0;
    double r_out = 0.0;
    int step = 1;
};

/// Detector positions of a planet fixed on sky while the field rotates:
/// position[t] = center + R(angles[t] - angles[0]) * (ref - center) under the
/// counter-clockwise-positive convention shared with rotate_image.
/// position[0] equals ref_pos exactly.
inline std::vector<Pos> planet_track(Pos ref_pos, Pos center,
                                     std::span<const double> angles_deg) {
    std::vector<Pos> track;
    track.reserve(angles_deg.size());
    for (double a : angles_deg) {
        if (!std::isfinite(a)) throw InvalidArgument("planet_track: non-finite angle");
        track.push_back(rotate_about(ref_pos, center, a - angles_deg[0]));
    }
    return track;
}

/// Immutable after build. Atoms are enumerated deterministically on the
/// integer annulus lattice, row-major, ids dense 0..n-1.
class TrajectoryDictionary {
public:
    struct Entry {
        std::int64_t index; // flat index into the T*H*W cube
        double value;       // normalized atom value
    };

    int n_frames = 0, height = 0, width = 0;
    Pos center;
    std::vector<double> angles_deg;
    PsfTemplate psf;
    AnnulusGrid grid;
    int n_dropped = 0; // degenerate (fully off-frame) candidates dropped at build

    const std::vector<TrajectoryAtom>& atoms() const { return atoms_; }
    int n_atoms() const { return static_cast<int>(atoms_.size()); }
    const TrajectoryAtom& atom(int id) const { return atoms_[static_cast<size_t>(id)]; }
    const std::vector<Entry>& entries(int id) const { return entries_[static_cast<size_t>(id)]; }

    bool shape_matches(const Cube& c) const {
        return c.n_frames == n_frames && c.height == height && c.width == width;
    }

private:
    friend TrajectoryDictionary build_dictionary(int, int, int, Pos, std::vector<double>,
                                                 PsfTemplate, double, double, int);
    std::vector<TrajectoryAtom> atoms_;
    std::vector<std::vector<Entry>> entries_; // sorted by flat index, unit l2 overall
};

namespace detail {

/// Swept-PSF cube for one track, built frame by frame with add_stamp into
/// zero frames. Returns the unnormalized cube.
inline Cube swept_stamp_cube(const std::vector<Pos>& track, const PsfTemplate& psf,
                             int t, int h, int w) {
    Cube cube(t, h, w);
    Image zero(h, w);
    for (int i = 0; i < t; ++i) {
        Image frame = add_stamp(zero, psf, track[static_cast<size_t>(i)], 1.0);
        cube.set_frame(i, frame);
    }
    return cube;
}

inline std::vector<TrajectoryDictionary::Entry> nonzero_entries(const Cube& cube) {
    std::vector<TrajectoryDictionary::Entry> entries;
    for (size_t i = 0; i < cube.v.size(); ++i)
        if (cube.v[i] != 0.0)
            entries.push_back({static_cast<std::int64_t>(i), cube.v[i]});
    return entries;
}

} // namespace detail

inline TrajectoryDictionary build_dictionary(int t, int h, int w, Pos center,
                                             std::vector<double> angles_deg,
                                             PsfTemplate psf, double r_in, double r_out,
                                             int step = 1) {
    if (t < 1 || h < 1 || w < 1)
        throw InvalidArgument("build_dictionary: invalid cube shape");
    if (angles_deg.size() != static_cast<size_t>(t))
        throw InvalidArgument("build_dictionary: angle count does not match frame count");
    if (!(r_in > 0.0) || !(r_in <= r_out))
        throw InvalidArgument("build_dictionary: need 0 < r_in <= r_out");
    if (!(r_out <= std::min(h, w) / 2.0 - 1.0))
        throw InvalidArgument("build_dictionary: r_out must be <= min(H,W)/2 - 1");
    if (step < 1) throw InvalidArgument("build_dictionary: step must be >= 1");

    TrajectoryDictionary dict;
    dict.n_frames = t;
    dict.height = h;
    dict.width = w;
    dict.center = center;
    dict.angles_deg = std::move(angles_deg);
    dict.psf = std::move(psf);
    dict.grid = {r_in, r_out, step};

    // Stride lattice anchored at the pixel nearest the star so the grid is
    // symmetric about it.
    const int anchor_r = static_cast<int>(std::lround(center.row));
    const int anchor_c = static_cast<int>(std::lround(center.col));
    auto on_lattice = [&](int r, int c) {
        return ((r - anchor_r) % step + step) % step == 0 &&
               ((c - anchor_c) % step + step) % step == 0;
    };

    std::vector<Pos> candidates;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!on_lattice(r, c)) continue;
            const double dist = std::hypot(r - center.row, c - center.col);
            if (dist >= r_in && dist <= r_out)
                candidates.push_back({static_cast<double>(r), static_cast<double>(c)});
        }
    }
    if (candidates.empty())
        throw InvalidArgument("build_dictionary: empty annulus (no lattice point in range)");

    struct Built {
        TrajectoryAtom atom;
        std::vector<TrajectoryDictionary::Entry> entries;
    };
    std::vector<Built> built(candidates.size());
    parallel_for(static_cast<std::int64_t>(candidates.size()), [&](std::int64_t i) {
        const Pos ref = candidates[static_cast<size_t>(i)];
        TrajectoryAtom atom;
        atom.ref_pos = ref;
        atom.per_frame_pos = planet_track(ref, dict.center, dict.angles_deg);
        Cube cube = detail::swept_stamp_cube(atom.per_frame_pos, dict.psf, t, h, w);
        atom.norm = frobenius_norm(cube);
        auto entries = detail::nonzero_entries(cube);
        if (atom.norm > 0.0)
            for (auto& e : entries) e.value /= atom.norm;
        built[static_cast<size_t>(i)] = {std::move(atom), std::move(entries)};
    });

    for (auto& b : built) {
        if (b.atom.norm <= 0.0) {
            ++dict.n_dropped;
            continue;
        }
        b.atom.atom_id = dict.n_atoms();
        dict.atoms_.push_back(std::move(b.atom));
        dict.entries_.push_back(std::move(b.entries));
    }
    if (dict.atoms_.empty())
        throw InvalidArgument("build_dictionary: all candidate trajectories leave the frame");
    return dict;
}

/// Dense unit-l2 atom cube. Frames are add_stamp placements of the PSF along
/// the track; partially off-frame stamps are clipped before normalization.
inline Cube materialize_atom(const TrajectoryDictionary& dict, int atom_id) {
    if (atom_id < 0 || atom_id >= dict.n_atoms())
        throw InvalidArgument("materialize_atom: atom_id out of range");
    const auto& entries = dict.entries(atom_id);
    if (entries.empty())
        throw DegenerateAtomError("materialize_atom: trajectory never intersects the frame");
    Cube cube(dict.n_frames, dict.height, dict.width);
    for (const auto& e : entries) cube.v[static_cast<size_t>(e.index)] = e.value;
    return cube;
}

/// Inner product of two unit-norm atoms (two-pointer walk over sorted entries).
inline double atom_inner_product(const TrajectoryDictionary& dict, int a, int b) {
    const auto& ea = dict.entries(a);
    const auto& eb = dict.entries(b);
    double acc = 0.0;
    size_t i = 0, j = 0;
    while (i < ea.size() && j < eb.size()) {
        if (ea[i].index < eb[j].index) ++i;
        else if (ea[i].index > eb[j].index) ++j;
        else acc += ea[i++].value * eb[j++].value;
    }
    return acc;
}

/// Exact atom-residual inner products: coeff[a] = <residual, atom_a>.
inline std::vector<double> correlate_all_exact(const TrajectoryDictionary& dict,
                                               const Cube& residual) {
    if (!dict.shape_matches(residual))
        throw InvalidArgument("correlate_all: residual shape does not match dictionary");
    std::vector<double> coeff(static_cast<size_t>(dict.n_atoms()), 0.0);
    parallel_for(dict.n_atoms(), [&](std::int64_t a) {
        double acc = 0.0;
        for (const auto& e : dict.entries(static_cast<int>(a)))
            acc += e.value * residual.v[static_cast<size_t>(e.index)];
        coeff[static_cast<size_t>(a)] = acc;
    });
    return coeff;
}

/// Fast path: per-frame PSF cross-correlation, derotation by -(angle_t -
/// angle_0), temporal sum, then a bilinear read at each ref_pos divided by
/// the atom norm. Approximates the exact path only through interpolation.
inline std::vector<double> correlate_all_fast(const TrajectoryDictionary& dict,
                                              const Cube& residual) {
    if (!dict.shape_matches(residual))
        throw InvalidArgument("correlate_all: residual shape does not match dictionary");
    std::vector<Image> derotated(static_cast<size_t>(dict.n_frames));
    parallel_for(dict.n_frames, [&](std::int64_t t) {
        Image corr = cross_correlate(residual.frame_image(static_cast<int>(t)), dict.psf);
        const double dtheta = dict.angles_deg[static_cast<size_t>(t)] - dict.angles_deg[0];
        derotated[static_cast<size_t>(t)] = rotate_image(corr, -dtheta, dict.center);
    });
    Image summed(dict.height, dict.width);
    for (const auto& img : derotated)
        for (size_t i = 0; i < summed.v.size(); ++i) summed.v[i] += img.v[i];

    std::vector<double> coeff(static_cast<size_t>(dict.n_atoms()), 0.0);
    for (int a = 0; a < dict.n_atoms(); ++a) {
        const auto& atom = dict.atom(a);
        coeff[static_cast<size_t>(a)] =
            bilinear_sample(summed, atom.ref_pos.row, atom.ref_pos.col) / atom.norm;
    }
    return coeff;
}

} // namespace lrss
