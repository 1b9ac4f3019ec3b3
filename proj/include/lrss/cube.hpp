#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lrss/error.hpp"
#include "lrss/image.hpp"

namespace lrss {

/// T x H x W stack of frames, frame-major row-major.
struct Cube {
    int n_frames = 0;
    int height = 0;
    int width = 0;
    std::vector<double> v;

    Cube() = default;
    Cube(int t, int h, int w, double fill = 0.0)
        : n_frames(t), height(h), width(w),
          v(static_cast<size_t>(t) * h * w, fill) {}

    size_t frame_size() const { return static_cast<size_t>(height) * width; }
    size_t size() const { return v.size(); }

    double& at(int t, int r, int c) {
        return v[(static_cast<size_t>(t) * height + r) * width + c];
    }
    double at(int t, int r, int c) const {
        return v[(static_cast<size_t>(t) * height + r) * width + c];
    }

    std::span<double> frame_span(int t) {
        return {v.data() + static_cast<size_t>(t) * frame_size(), frame_size()};
    }
    std::span<const double> frame_span(int t) const {
        return {v.data() + static_cast<size_t>(t) * frame_size(), frame_size()};
    }

    Image frame_image(int t) const {
        Image img(height, width);
        auto s = frame_span(t);
        std::copy(s.begin(), s.end(), img.v.begin());
        return img;
    }
    void set_frame(int t, const Image& img) {
        auto s = frame_span(t);
        std::copy(img.v.begin(), img.v.end(), s.begin());
    }

    bool same_shape(const Cube& other) const {
        return n_frames == other.n_frames && height == other.height && width == other.width;
    }
};

inline double frobenius_norm(const Cube& c) {
    double s = 0.0;
    for (double x : c.v) s += x * x;
    return std::sqrt(s);
}

inline Cube cube_sub(const Cube& a, const Cube& b) {
    Cube out = a;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b.v[i];
    return out;
}

/// Registered ADI observation: frames plus per-frame parallactic angles and
/// the star position. Default center is the geometric frame center.
struct AdiCube {
    Cube frames;
    std::vector<double> angles_deg;
    Pos center;
};

inline Pos default_center(int h, int w) {
    return {(h - 1) / 2.0, (w - 1) / 2.0};
}

inline void validate_adi_cube(const AdiCube& cube, const char* what = "AdiCube") {
    const Cube& f = cube.frames;
    if (f.n_frames < 2)
        throw InvalidArgument(std::string(what) + ": need at least 2 frames, got " +
                              std::to_string(f.n_frames));
    if (f.height < 1 || f.width < 1)
        throw InvalidArgument(std::string(what) + ": empty frames");
    if (f.v.size() != static_cast<size_t>(f.n_frames) * f.frame_size())
        throw InvalidArgument(std::string(what) + ": payload length mismatch");
    if (cube.angles_deg.size() != static_cast<size_t>(f.n_frames))
        throw InvalidArgument(std::string(what) + ": angle count does not match frame count");
    for (double a : cube.angles_deg)
        if (!std::isfinite(a))
            throw InvalidArgument(std::string(what) + ": non-finite parallactic angle");
    if (!std::isfinite(cube.center.row) || !std::isfinite(cube.center.col))
        throw InvalidArgument(std::string(what) + ": non-finite center");
}

inline AdiCube make_adi_cube(Cube frames, std::vector<double> angles_deg) {
    AdiCube cube;
    cube.center = default_center(frames.height, frames.width);
    cube.frames = std::move(frames);
    cube.angles_deg = std::move(angles_deg);
    validate_adi_cube(cube);
    return cube;
}

/// T angles evenly spanning [start, end].
inline std::vector<double> linspace_angles(double start_deg, double end_deg, int t) {
    if (t < 1) throw InvalidArgument("linspace_angles: need at least one frame");
    std::vector<double> angles(static_cast<size_t>(t));
    if (t == 1) {
        angles[0] = start_deg;
        return angles;
    }
    for (int i = 0; i < t; ++i)
        angles[static_cast<size_t>(i)] = start_deg + (end_deg - start_deg) * i / (t - 1);
    return angles;
}

} // namespace lrss
