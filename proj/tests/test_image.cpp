#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lrss/image.hpp"

using namespace lrss;

namespace {

Image random_image(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Image img(rows, cols);
    for (double& x : img.v)
        x = static_cast<double>(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    return img;
}

// Brute-force inverse-mapping rotation, written from scratch with raw trig:
// out(r,c) samples the input at the point that rotates onto (r,c).
Image rotate_oracle(const Image& img, double angle_deg, Pos center) {
    const double a = -angle_deg * std::acos(-1.0) / 180.0;
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            const double dr = r - center.row;
            const double dc = c - center.col;
            const double sr = center.row + std::cos(a) * dr - std::sin(a) * dc;
            const double sc = center.col + std::sin(a) * dr + std::cos(a) * dc;
            const int r0 = static_cast<int>(std::floor(sr));
            const int c0 = static_cast<int>(std::floor(sc));
            const double fr = sr - r0;
            const double fc = sc - c0;
            double acc = 0.0;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    const int rr = r0 + i;
                    const int cc = c0 + j;
                    if (rr < 0 || rr >= img.rows || cc < 0 || cc >= img.cols) continue;
                    acc += (i ? fr : 1.0 - fr) * (j ? fc : 1.0 - fc) * img.at(rr, cc);
                }
            out.at(r, c) = acc;
        }
    }
    return out;
}

// O(H*W*k^2) nested-loop cross-correlation.
Image correlate_oracle(const Image& img, const PsfTemplate& ker) {
    const int kc = (ker.size - 1) / 2;
    Image out(img.rows, img.cols);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            double acc = 0.0;
            for (int i = 0; i < ker.size; ++i)
                for (int j = 0; j < ker.size; ++j) {
                    const int rr = r + i - kc;
                    const int cc = c + j - kc;
                    if (rr >= 0 && rr < img.rows && cc >= 0 && cc < img.cols)
                        acc += img.at(rr, cc) * ker.at(i, j);
                }
            out.at(r, c) = acc;
        }
    return out;
}

double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

Image gaussian_blurred(const Image& img, double fwhm) {
    return cross_correlate(img, make_gaussian_psf(7, fwhm));
}

} // namespace

TEST_CASE("rotate_image identity at angle zero is bitwise") {
    const Image img = random_image(6, 7, 42);
    const Image out = rotate_image(img, 0.0, {2.0, 3.0});
    REQUIRE(out.v == img.v);
}

TEST_CASE("rotate_image quarter turn maps lattice to lattice exactly") {
    Image img(5, 5);
    img.at(2, 4) = 1.0;
    const Image out = rotate_image(img, 90.0, {2.0, 2.0});
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) {
            if (r == 0 && c == 2)
                REQUIRE(out.at(r, c) == 1.0);
            else
                REQUIRE(out.at(r, c) == 0.0);
        }
}

TEST_CASE("rotate_image matches brute-force inverse-map oracle") {
    const Image img = random_image(8, 8, 7);
    const Image got = rotate_image(img, 37.0, {3.5, 3.5});
    const Image want = rotate_oracle(img, 37.0, {3.5, 3.5});
    REQUIRE(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("rotate_image rejects bad input") {
    REQUIRE_THROWS_AS(rotate_image(Image{}, 10.0, {0.0, 0.0}), InvalidArgument);
    const Image img = random_image(4, 4, 1);
    REQUIRE_THROWS_AS(rotate_image(img, std::nan(""), {1.0, 1.0}), InvalidArgument);
    REQUIRE_THROWS_AS(rotate_image(img, 5.0, {9.0, 1.0}), InvalidArgument);
}

TEST_CASE("rotate_image round trip loses little on the interior") {
    const Image smooth = gaussian_blurred(random_image(24, 24, 11), 3.0);
    double maxval = 0.0;
    for (double x : smooth.v) maxval = std::max(maxval, std::abs(x));
    const Pos center{11.5, 11.5};
    const Image back = rotate_image(rotate_image(smooth, 23.0, center), -23.0, center);
    double worst = 0.0;
    for (int r = 2; r < 22; ++r)
        for (int c = 2; c < 22; ++c)
            worst = std::max(worst, std::abs(back.at(r, c) - smooth.at(r, c)));
    REQUIRE(worst <= 0.05 * maxval);
}

TEST_CASE("rotate_image is linear") {
    const Image x = random_image(9, 9, 3);
    const Image y = random_image(9, 9, 4);
    const double alpha = 1.7, beta = -0.6;
    Image combo(9, 9);
    for (size_t i = 0; i < combo.v.size(); ++i) combo.v[i] = alpha * x.v[i] + beta * y.v[i];
    const Pos center{4.0, 4.0};
    const Image lhs = rotate_image(combo, 31.0, center);
    const Image rx = rotate_image(x, 31.0, center);
    const Image ry = rotate_image(y, 31.0, center);
    for (size_t i = 0; i < lhs.v.size(); ++i)
        REQUIRE(lhs.v[i] == Catch::Approx(alpha * rx.v[i] + beta * ry.v[i]).margin(1e-12));
}

TEST_CASE("cross_correlate with delta kernel is identity") {
    const Image img = random_image(6, 6, 9);
    std::vector<double> delta(9, 0.0);
    delta[4] = 1.0;
    const PsfTemplate ker = make_psf(3, delta);
    const Image out = cross_correlate(img, ker);
    REQUIRE(max_abs_diff(out, img) == 0.0);
}

TEST_CASE("cross_correlate impulse response is the kernel stamp") {
    Image img(7, 7);
    img.at(3, 4) = 1.0;
    const PsfTemplate ker = make_gaussian_psf(3, 1.5); // symmetric
    const Image out = cross_correlate(img, ker);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            REQUIRE(out.at(2 + i, 3 + j) == Catch::Approx(ker.at(i, j)).margin(1e-15));
}

TEST_CASE("cross_correlate matches nested-loop oracle") {
    const Image img = random_image(6, 6, 21);
    std::mt19937_64 gen(22);
    std::vector<double> kdata(9);
    for (double& x : kdata) x = static_cast<double>(gen() >> 11) * 0x1.0p-53 + 0.1;
    const PsfTemplate ker = make_psf(3, kdata);
    REQUIRE(max_abs_diff(cross_correlate(img, ker), correlate_oracle(img, ker)) < 1e-12);
}

TEST_CASE("cross_correlate is linear in both arguments") {
    const Image x = random_image(8, 8, 31);
    const Image y = random_image(8, 8, 32);
    const PsfTemplate ker = make_gaussian_psf(3, 1.2);
    Image combo(8, 8);
    for (size_t i = 0; i < combo.v.size(); ++i) combo.v[i] = 2.0 * x.v[i] - 3.0 * y.v[i];
    const Image lhs = cross_correlate(combo, ker);
    const Image cx = cross_correlate(x, ker);
    const Image cy = cross_correlate(y, ker);
    for (size_t i = 0; i < lhs.v.size(); ++i)
        REQUIRE(lhs.v[i] == Catch::Approx(2.0 * cx.v[i] - 3.0 * cy.v[i]).margin(1e-12));
}

TEST_CASE("cross_correlate rejects oversized kernels") {
    const Image img = random_image(3, 3, 5);
    REQUIRE_THROWS_AS(cross_correlate(img, make_gaussian_psf(5, 2.0)), InvalidArgument);
}

TEST_CASE("add_stamp with zero scale returns the input") {
    const Image img = random_image(5, 5, 51);
    const Image out = add_stamp(img, make_gaussian_psf(3, 1.0), {2.2, 2.8}, 0.0);
    REQUIRE(out.v == img.v);
}

TEST_CASE("add_stamp at integer center embeds the stamp exactly") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.0);
    const Image out = add_stamp(Image(7, 7), psf, {3.0, 4.0}, 1.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            REQUIRE(out.at(2 + i, 3 + j) == psf.at(i, j));
    double total = 0.0;
    for (double x : out.v) total += std::abs(x);
    double stamp_total = 0.0;
    for (double x : psf.v) stamp_total += std::abs(x);
    REQUIRE(total == Catch::Approx(stamp_total));
}

TEST_CASE("add_stamp at half-pixel center equals the four-placement average") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.3);
    const Image zero(8, 8);
    const Image got = add_stamp(zero, psf, {2.5, 2.5}, 1.0);
    Image want(8, 8);
    for (const auto& [r, c] : {std::pair{2, 2}, {2, 3}, {3, 2}, {3, 3}}) {
        const Image piece =
            add_stamp(zero, psf, {static_cast<double>(r), static_cast<double>(c)}, 0.25);
        for (size_t i = 0; i < want.v.size(); ++i) want.v[i] += piece.v[i];
    }
    REQUIRE(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("add_stamp conserves flux for fully interior integer placements") {
    const Image img = random_image(9, 9, 61);
    const PsfTemplate psf = make_gaussian_psf(3, 1.1);
    const double scale = 2.75;
    const Image out = add_stamp(img, psf, {4.0, 4.0}, scale);
    double sum_out = 0.0, sum_in = 0.0, sum_psf = 0.0;
    for (double x : out.v) sum_out += x;
    for (double x : img.v) sum_in += x;
    for (double x : psf.v) sum_psf += x;
    REQUIRE(sum_out - sum_in == Catch::Approx(scale * sum_psf).margin(1e-12));
}

TEST_CASE("add_stamp drops mass falling outside the frame") {
    const PsfTemplate psf = make_gaussian_psf(3, 1.0);
    const Image out = add_stamp(Image(5, 5), psf, {0.0, 0.0}, 1.0);
    double total = 0.0;
    for (double x : out.v) total += x;
    REQUIRE(total < 1.0);
    REQUIRE(total > 0.0);
}

TEST_CASE("make_gaussian_psf shapes") {
    SECTION("k=1 is a single unit pixel") {
        const PsfTemplate psf = make_gaussian_psf(1, 2.0);
        REQUIRE(psf.v.size() == 1);
        REQUIRE(psf.v[0] == 1.0);
    }
    SECTION("unit sum and centered peak") {
        const PsfTemplate psf = make_gaussian_psf(5, 2.0);
        REQUIRE(psf.sum() == Catch::Approx(1.0).margin(1e-12));
        const double peak = psf.at(2, 2);
        for (double x : psf.v) REQUIRE(x <= peak);
    }
    SECTION("even size rejected") {
        REQUIRE_THROWS_AS(make_gaussian_psf(4, 2.0), InvalidArgument);
    }
}
