#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "lrss/cube.hpp"
#include "lrss/error.hpp"
#include "lrss/image.hpp"

namespace lrss {

// On-disk cube container: <name>.bin holds little-endian f64 payload in
// frame-major row-major order; <name>.json is the sidecar header with fixed
// dtype/order markers. PSF templates and 2-D maps use the same container
// with t=1.
inline constexpr const char* kDtypeMarker = "f64le";
inline constexpr const char* kOrderMarker = "t-row-major";

namespace detail {

inline void encode_f64le(double x, unsigned char* out) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
}

inline double decode_f64le(const unsigned char* in) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

inline void create_parent_dirs(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
}

} // namespace detail

/// Low-level container content; t=1 files carry PSFs and 2-D maps, so the
/// AdiCube T>=2 invariant is enforced by load_cube, not here.
struct CubeFile {
    Cube frames;
    std::vector<double> angles_deg;
    Pos center;
};

inline void save_container(const CubeFile& file, const std::string& bin_path,
                           const std::string& json_path) {
    const Cube& frames = file.frames;
    if (frames.n_frames < 1 || frames.height < 1 || frames.width < 1)
        throw InvalidArgument("save_cube: cube must have t >= 1 and nonempty frames");
    if (frames.v.size() != static_cast<size_t>(frames.n_frames) * frames.frame_size())
        throw InvalidArgument("save_cube: payload length mismatch");
    if (file.angles_deg.size() != static_cast<size_t>(frames.n_frames))
        throw InvalidArgument("save_cube: angle count does not match frame count");

    detail::create_parent_dirs(bin_path);
    detail::create_parent_dirs(json_path);

    std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
    if (!bin) throw IoError("cannot open for writing: " + bin_path);
    std::vector<unsigned char> buf(frames.v.size() * 8);
    for (size_t i = 0; i < frames.v.size(); ++i)
        detail::encode_f64le(frames.v[i], buf.data() + i * 8);
    bin.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!bin) throw IoError("write failed: " + bin_path);
    bin.close();

    nlohmann::json header;
    header["t"] = frames.n_frames;
    header["h"] = frames.height;
    header["w"] = frames.width;
    header["angles_deg"] = file.angles_deg;
    header["center"] = {file.center.row, file.center.col};
    header["dtype"] = kDtypeMarker;
    header["order"] = kOrderMarker;
    std::ofstream js(json_path, std::ios::trunc);
    if (!js) throw IoError("cannot open for writing: " + json_path);
    js << header.dump(2) << "\n";
    if (!js) throw IoError("write failed: " + json_path);
}

inline CubeFile load_container(const std::string& bin_path, const std::string& json_path) {
    std::ifstream js(json_path);
    if (!js) throw IoError("cannot open: " + json_path);
    nlohmann::json header;
    try {
        js >> header;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad header " + json_path + ": " + e.what());
    }

    CubeFile file;
    try {
        const int t = header.at("t").get<int>();
        const int h = header.at("h").get<int>();
        const int w = header.at("w").get<int>();
        if (header.at("dtype").get<std::string>() != kDtypeMarker)
            throw FormatError("bad header " + json_path + ": dtype must be \"" +
                              std::string(kDtypeMarker) + "\"");
        if (header.at("order").get<std::string>() != kOrderMarker)
            throw FormatError("bad header " + json_path + ": order must be \"" +
                              std::string(kOrderMarker) + "\"");
        if (t < 1 || h < 1 || w < 1)
            throw FormatError("bad header " + json_path + ": t, h, w must be positive");
        file.frames = Cube(t, h, w);
        file.angles_deg = header.at("angles_deg").get<std::vector<double>>();
        if (file.angles_deg.size() != static_cast<size_t>(t))
            throw FormatError("bad header " + json_path + ": angles_deg length != t");
        const auto& ctr = header.at("center");
        if (!ctr.is_array() || ctr.size() != 2)
            throw FormatError("bad header " + json_path + ": center must be [row, col]");
        file.center = {ctr[0].get<double>(), ctr[1].get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad header " + json_path + ": " + e.what());
    }

    std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
    if (!bin) throw IoError("cannot open: " + bin_path);
    const std::uint64_t actual = static_cast<std::uint64_t>(bin.tellg());
    const std::uint64_t expected = 8ull * file.frames.v.size();
    if (actual != expected)
        throw FormatError(bin_path + ": expected 8*T*H*W = " + std::to_string(expected) +
                          " bytes, got " + std::to_string(actual));
    bin.seekg(0);
    std::vector<unsigned char> buf(actual);
    bin.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!bin) throw IoError("read failed: " + bin_path);
    for (size_t i = 0; i < file.frames.v.size(); ++i) {
        const double x = detail::decode_f64le(buf.data() + i * 8);
        if (!std::isfinite(x))
            throw DataError(bin_path + ": non-finite value at flat index " + std::to_string(i));
        file.frames.v[i] = x;
    }
    for (double a : file.angles_deg)
        if (!std::isfinite(a))
            throw DataError(json_path + ": non-finite parallactic angle");
    return file;
}

inline void save_cube(const AdiCube& cube, const std::string& bin_path,
                      const std::string& json_path) {
    validate_adi_cube(cube, "save_cube");
    save_container({cube.frames, cube.angles_deg, cube.center}, bin_path, json_path);
}

inline AdiCube load_cube(const std::string& bin_path, const std::string& json_path) {
    CubeFile file = load_container(bin_path, json_path);
    AdiCube cube{std::move(file.frames), std::move(file.angles_deg), file.center};
    validate_adi_cube(cube, "load_cube");
    return cube;
}

/// Saves a single image in the t=1 container.
inline void save_image(const Image& img, const std::string& bin_path,
                       const std::string& json_path) {
    validate_image(img, "save_image");
    Cube frames(1, img.rows, img.cols);
    std::copy(img.v.begin(), img.v.end(), frames.v.begin());
    save_container({std::move(frames), {0.0}, default_center(img.rows, img.cols)},
                   bin_path, json_path);
}

inline Image load_image(const std::string& bin_path, const std::string& json_path) {
    CubeFile file = load_container(bin_path, json_path);
    if (file.frames.n_frames != 1)
        throw FormatError(bin_path + ": expected a t=1 container");
    return file.frames.frame_image(0);
}

/// PSF files reuse the t=1 container; the stamp is renormalized to the
/// requested convention on load (files are not required to be pre-normalized).
inline void save_psf(const PsfTemplate& psf, const std::string& bin_path,
                     const std::string& json_path) {
    Cube frames(1, psf.size, psf.size);
    std::copy(psf.v.begin(), psf.v.end(), frames.v.begin());
    save_container({std::move(frames), {0.0}, {(psf.size - 1) / 2.0, (psf.size - 1) / 2.0}},
                   bin_path, json_path);
}

inline PsfTemplate load_psf(const std::string& bin_path, const std::string& json_path,
                            PsfNorm norm = PsfNorm::UnitSum) {
    CubeFile file = load_container(bin_path, json_path);
    if (file.frames.n_frames != 1)
        throw FormatError(bin_path + ": PSF container must have t=1");
    if (file.frames.height != file.frames.width)
        throw FormatError(bin_path + ": PSF stamp must be square");
    if (file.frames.height % 2 == 0)
        throw FormatError(bin_path + ": PSF stamp size must be odd");
    try {
        return make_psf(file.frames.height, std::move(file.frames.v), norm);
    } catch (const InvalidArgument& e) {
        throw DataError(bin_path + ": " + e.what());
    }
}

} // namespace lrss
