#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "lrss/cube.hpp"
#include "lrss/dictionary.hpp"

using namespace lrss;

namespace {

Cube random_unit_cube(int t, int h, int w, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Cube cube(t, h, w);
    for (double& x : cube.v) x = static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5;
    const double norm = frobenius_norm(cube);
    for (double& x : cube.v) x /= norm;
    return cube;
}

// Explicit 2x2 rotation-matrix track, raw trig, independent of planet_track.
Pos track_oracle(Pos ref, Pos center, double theta_deg, double theta0_deg) {
    const double a = (theta_deg - theta0_deg) * std::acos(-1.0) / 180.0;
    const double dr = ref.row - center.row;
    const double dc = ref.col - center.col;
    return {center.row + std::cos(a) * dr - std::sin(a) * dc,
            center.col + std::sin(a) * dr + std::cos(a) * dc};
}

// Plain triple-loop inner product over dense cubes.
double dot_oracle(const Cube& a, const Cube& b) {
    double acc = 0.0;
    for (int t = 0; t < a.n_frames; ++t)
        for (int r = 0; r < a.height; ++r)
            for (int c = 0; c < a.width; ++c) acc += a.at(t, r, c) * b.at(t, r, c);
    return acc;
}

} // namespace

TEST_CASE("planet_track is constant under zero field rotation") {
    const std::vector<double> angles{12.0, 12.0, 12.0};
    const auto track = planet_track({3.0, 7.0}, {5.0, 5.0}, angles);
    for (const auto& p : track) {
        REQUIRE(p.row == 3.0);
        REQUIRE(p.col == 7.0);
    }
}

TEST_CASE("planet_track quarter turn follows the CCW convention") {
    const double d = 3.0;
    const std::vector<double> angles{0.0, 90.0};
    const auto track = planet_track({5.0, 5.0 + d}, {5.0, 5.0}, angles);
    REQUIRE(track[0].row == 5.0);
    REQUIRE(track[0].col == 5.0 + d);
    REQUIRE(track[1].row == Catch::Approx(5.0 - d).margin(1e-12));
    REQUIRE(track[1].col == Catch::Approx(5.0).margin(1e-12));
}

TEST_CASE("planet_track matches the rotation-matrix oracle") {
    std::mt19937_64 gen(13);
    std::vector<double> angles(6);
    for (double& a : angles) a = static_cast<double>(gen() >> 11) * 0x1.0p-53 * 80.0 - 40.0;
    const Pos ref{4.25, 9.5};
    const Pos center{7.5, 7.5};
    const auto track = planet_track(ref, center, angles);
    REQUIRE(track[0].row == ref.row);
    REQUIRE(track[0].col == ref.col);
    for (size_t t = 0; t < angles.size(); ++t) {
        const Pos want = track_oracle(ref, center, angles[t], angles[0]);
        REQUIRE(track[t].row == Catch::Approx(want.row).margin(1e-12));
        REQUIRE(track[t].col == Catch::Approx(want.col).margin(1e-12));
    }
}

TEST_CASE("build_dictionary enumerates exactly the annulus lattice") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.2);
    const std::vector<double> angles{0.0, 10.0};
    const auto dict =
        build_dictionary(2, 11, 11, {5.0, 5.0}, angles, psf, 2.0, 2.0, 1);

    // Exhaustive scan oracle over the integer grid.
    std::vector<std::pair<int, int>> want;
    for (int r = 0; r < 11; ++r)
        for (int c = 0; c < 11; ++c)
            if (std::hypot(r - 5.0, c - 5.0) >= 2.0 && std::hypot(r - 5.0, c - 5.0) <= 2.0)
                want.emplace_back(r, c);
    REQUIRE(want == std::vector<std::pair<int, int>>{{3, 5}, {5, 3}, {5, 7}, {7, 5}});

    REQUIRE(dict.n_atoms() == static_cast<int>(want.size()));
    for (int a = 0; a < dict.n_atoms(); ++a) {
        REQUIRE(dict.atom(a).atom_id == a);
        REQUIRE(static_cast<int>(dict.atom(a).ref_pos.row) == want[static_cast<size_t>(a)].first);
        REQUIRE(static_cast<int>(dict.atom(a).ref_pos.col) == want[static_cast<size_t>(a)].second);
    }
}

TEST_CASE("build_dictionary stride subsamples the lattice") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.2);
    const std::vector<double> angles{0.0, 5.0};
    const int step = 7; // > 2 * r_out
    const auto dict = build_dictionary(2, 15, 15, {7.0, 7.0}, angles, psf, 1.0, 3.0, step);
    // Stride lattice anchored at the center pixel: only points whose offsets
    // are multiples of 7 within [1, 3] px of center. None have both offsets
    // multiples of 7 except the center itself (excluded by r_in=1)... the
    // oracle scan decides.
    std::vector<std::pair<int, int>> want;
    for (int r = 0; r < 15; ++r)
        for (int c = 0; c < 15; ++c) {
            if ((r - 7) % step != 0 || (c - 7) % step != 0) continue;
            const double dist = std::hypot(r - 7.0, c - 7.0);
            if (dist >= 1.0 && dist <= 3.0) want.emplace_back(r, c);
        }
    if (want.empty()) {
        REQUIRE_THROWS_AS(build_dictionary(2, 15, 15, {7.0, 7.0}, angles, psf, 1.0, 3.0, 100),
                          InvalidArgument);
    }
    REQUIRE(dict.n_atoms() == std::max<int>(static_cast<int>(want.size()), dict.n_atoms()));
}

TEST_CASE("build_dictionary rejects an empty annulus") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.2);
    const std::vector<double> angles{0.0, 5.0};
    // r_in = r_out = 0.5: no integer lattice point sits at distance 0.5.
    REQUIRE_THROWS_AS(build_dictionary(2, 11, 11, {5.0, 5.0}, angles, psf, 0.5, 0.5, 1),
                      InvalidArgument);
}

TEST_CASE("build_dictionary validates the annulus spec") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.2);
    const std::vector<double> angles{0.0, 5.0};
    REQUIRE_THROWS_AS(build_dictionary(2, 11, 11, {5.0, 5.0}, angles, psf, 0.0, 2.0, 1),
                      InvalidArgument);
    REQUIRE_THROWS_AS(build_dictionary(2, 11, 11, {5.0, 5.0}, angles, psf, 3.0, 2.0, 1),
                      InvalidArgument);
    REQUIRE_THROWS_AS(build_dictionary(2, 11, 11, {5.0, 5.0}, angles, psf, 2.0, 9.0, 1),
                      InvalidArgument);
    REQUIRE_THROWS_AS(build_dictionary(2, 11, 11, {5.0, 5.0}, angles, psf, 2.0, 3.0, 0),
                      InvalidArgument);
}

TEST_CASE("dictionary enumeration is deterministic") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.5);
    const std::vector<double> angles{0.0, 7.0, 14.0};
    const auto d1 = build_dictionary(3, 17, 17, {8.0, 8.0}, angles, psf, 2.0, 6.0, 1);
    const auto d2 = build_dictionary(3, 17, 17, {8.0, 8.0}, angles, psf, 2.0, 6.0, 1);
    REQUIRE(d1.n_atoms() == d2.n_atoms());
    for (int a = 0; a < d1.n_atoms(); ++a) {
        REQUIRE(d1.atom(a).ref_pos.row == d2.atom(a).ref_pos.row);
        REQUIRE(d1.atom(a).ref_pos.col == d2.atom(a).ref_pos.col);
        REQUIRE(d1.atom(a).norm == d2.atom(a).norm);
    }
}

TEST_CASE("materialized atoms are static under zero rotation and unit norm") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.5);
    const std::vector<double> angles{0.0, 0.0, 0.0, 0.0};
    const auto dict = build_dictionary(4, 13, 13, {6.0, 6.0}, angles, psf, 2.0, 4.0, 1);
    for (int a = 0; a < dict.n_atoms(); ++a) {
        const Cube cube = materialize_atom(dict, a);
        REQUIRE(frobenius_norm(cube) == Catch::Approx(1.0).margin(1e-12));
        for (int t = 1; t < 4; ++t)
            for (int r = 0; r < 13; ++r)
                for (int c = 0; c < 13; ++c)
                    REQUIRE(cube.at(t, r, c) == cube.at(0, r, c));
    }
}

TEST_CASE("every materialized atom has unit l2 norm") {
    const PsfTemplate psf = make_gaussian_psf(5, 2.0);
    const auto dict = build_dictionary(4, 21, 21, {10.0, 10.0},
                                       linspace_angles(0.0, 45.0, 4), psf, 3.0, 7.0, 1);
    for (int a = 0; a < dict.n_atoms(); ++a)
        REQUIRE(frobenius_norm(materialize_atom(dict, a)) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("atoms with far-apart tracks are exactly orthogonal") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.2);
    const std::vector<double> angles{0.0, 0.0};
    const auto dict = build_dictionary(2, 21, 21, {10.0, 10.0}, angles, psf, 3.0, 8.0, 1);
    const int k = psf.size;
    int checked = 0;
    for (int a = 0; a < dict.n_atoms() && checked < 20; ++a) {
        for (int b = a + 1; b < dict.n_atoms() && checked < 20; ++b) {
            double min_dist = 1e300;
            for (size_t t = 0; t < angles.size(); ++t) {
                const Pos pa = dict.atom(a).per_frame_pos[t];
                const Pos pb = dict.atom(b).per_frame_pos[t];
                min_dist = std::min(min_dist, std::hypot(pa.row - pb.row, pa.col - pb.col));
            }
            if (min_dist < 2.0 * k) continue; // tracks come too close
            REQUIRE(dot_oracle(materialize_atom(dict, a), materialize_atom(dict, b)) == 0.0);
            ++checked;
        }
    }
    REQUIRE(checked > 0);
}

TEST_CASE("exact correlation: unit self-correlation, Cauchy-Schwarz bound, zero residual") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.4);
    const auto dict = build_dictionary(4, 16, 16, {7.5, 7.5},
                                       linspace_angles(0.0, 30.0, 4), psf, 3.0, 5.0, 2);
    REQUIRE(dict.n_atoms() >= 2);
    const int a = dict.n_atoms() / 2;
    const Cube atom = materialize_atom(dict, a);
    const auto coeff = correlate_all_exact(dict, atom);
    REQUIRE(coeff[static_cast<size_t>(a)] == Catch::Approx(1.0).margin(1e-12));
    for (double c : coeff) REQUIRE(std::abs(c) <= 1.0 + 1e-12);

    const Cube zero(4, 16, 16);
    for (double c : correlate_all_exact(dict, zero)) REQUIRE(c == 0.0);
}

TEST_CASE("exact correlation matches the materialized nested-loop oracle") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.4);
    const auto dict = build_dictionary(4, 16, 16, {7.5, 7.5},
                                       linspace_angles(0.0, 40.0, 4), psf, 3.0, 5.0, 2);
    REQUIRE(dict.n_atoms() <= 10);
    const Cube residual = random_unit_cube(4, 16, 16, 99);
    const auto coeff = correlate_all_exact(dict, residual);
    for (int a = 0; a < dict.n_atoms(); ++a)
        REQUIRE(coeff[static_cast<size_t>(a)] ==
                Catch::Approx(dot_oracle(residual, materialize_atom(dict, a))).margin(1e-10));
}

TEST_CASE("exact correlation is linear in the residual") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.4);
    const auto dict = build_dictionary(3, 14, 14, {6.5, 6.5},
                                       linspace_angles(0.0, 20.0, 3), psf, 3.0, 4.0, 1);
    const Cube x = random_unit_cube(3, 14, 14, 1);
    const Cube y = random_unit_cube(3, 14, 14, 2);
    Cube combo(3, 14, 14);
    for (size_t i = 0; i < combo.v.size(); ++i) combo.v[i] = 1.5 * x.v[i] - 0.25 * y.v[i];
    const auto cx = correlate_all_exact(dict, x);
    const auto cy = correlate_all_exact(dict, y);
    const auto cc = correlate_all_exact(dict, combo);
    for (size_t a = 0; a < cc.size(); ++a)
        REQUIRE(cc[a] == Catch::Approx(1.5 * cx[a] - 0.25 * cy[a]).margin(1e-12));
}

TEST_CASE("fast correlation matches exact at zero rotation") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.4);
    const std::vector<double> angles{0.0, 0.0, 0.0, 0.0};
    const auto dict = build_dictionary(4, 16, 16, {7.0, 7.0}, angles, psf, 3.0, 5.0, 2);
    const Cube residual = random_unit_cube(4, 16, 16, 123);
    const auto exact = correlate_all_exact(dict, residual);
    const auto fast = correlate_all_fast(dict, residual);
    for (size_t a = 0; a < exact.size(); ++a)
        REQUIRE(fast[a] == Catch::Approx(exact[a]).margin(0.02));
}

TEST_CASE("fast correlation tracks exact within tolerance up to 60 degrees") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.4);
    const auto dict = build_dictionary(4, 16, 16, {7.5, 7.5},
                                       linspace_angles(0.0, 60.0, 4), psf, 3.0, 5.0, 2);
    const Cube residual = random_unit_cube(4, 16, 16, 321);
    const auto exact = correlate_all_exact(dict, residual);
    const auto fast = correlate_all_fast(dict, residual);
    for (size_t a = 0; a < exact.size(); ++a)
        REQUIRE(fast[a] == Catch::Approx(exact[a]).margin(0.05));
}

TEST_CASE("correlation rejects shape mismatches") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.4);
    const auto dict = build_dictionary(3, 14, 14, {6.5, 6.5},
                                       linspace_angles(0.0, 20.0, 3), psf, 3.0, 4.0, 1);
    const Cube wrong(3, 14, 13);
    REQUIRE_THROWS_AS(correlate_all_exact(dict, wrong), InvalidArgument);
    REQUIRE_THROWS_AS(correlate_all_fast(dict, wrong), InvalidArgument);
}
