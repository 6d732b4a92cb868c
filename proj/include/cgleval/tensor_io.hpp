#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cgleval/attention.hpp"
#include "cgleval/errors.hpp"

namespace cgleval {

// Feature-volume interchange formats for externally exported tensors.
//
// Binary: three little-endian int64 header values d, h, w followed by
// d*h*w little-endian float64 samples in channel-major order
// (index = (c*h + y)*w + x). No magic, no padding.
//
// Text: a "d h w" header line, then the samples in the same order,
// whitespace-separated, at 17 significant digits (lossless for doubles).

namespace detail {

inline void put_le64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

inline std::uint64_t get_le64(std::istream& in, const std::string& what) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw IoError("tensor file truncated while reading " + what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace detail

inline void write_volume_binary(const FeatureVolume& volume, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    detail::put_le64(out, volume.dim);
    detail::put_le64(out, volume.height);
    detail::put_le64(out, volume.width);
    for (double v : volume.data) detail::put_le64(out, std::bit_cast<std::uint64_t>(v));
    if (!out) throw IoError("write failure on " + path.string());
}

inline FeatureVolume read_volume_binary(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec))
        throw FileNotFound("tensor file not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const auto d = detail::get_le64(in, "d");
    const auto h = detail::get_le64(in, "h");
    const auto w = detail::get_le64(in, "w");
    constexpr std::uint64_t sane = 1ull << 24;
    if (d == 0 || h == 0 || w == 0 || d > sane || h > sane || w > sane)
        throw IoError("tensor header of " + path.string() + " is implausible: " +
                      std::to_string(d) + "x" + std::to_string(h) + "x" + std::to_string(w));
    std::vector<double> data(d * h * w);
    for (double& v : data) v = std::bit_cast<double>(detail::get_le64(in, "sample"));
    return FeatureVolume(d, h, w, std::move(data));
}

inline void write_volume_text(const FeatureVolume& volume, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << volume.dim << " " << volume.height << " " << volume.width << "\n";
    out << std::setprecision(17);
    std::size_t col = 0;
    for (std::size_t i = 0; i < volume.data.size(); ++i) {
        out << volume.data[i];
        col = (col + 1) % volume.width;
        out << (col == 0 ? '\n' : ' ');
    }
    if (!out) throw IoError("write failure on " + path.string());
}

inline FeatureVolume read_volume_text(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec))
        throw FileNotFound("tensor file not found: " + path.string());
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    long long d = 0, h = 0, w = 0;
    if (!(in >> d >> h >> w) || d <= 0 || h <= 0 || w <= 0)
        throw IoError("tensor header of " + path.string() + " is malformed");
    std::vector<double> data(static_cast<std::size_t>(d) * h * w);
    for (double& v : data)
        if (!(in >> v)) throw IoError("tensor file " + path.string() + " truncated");
    return FeatureVolume(static_cast<std::size_t>(d), static_cast<std::size_t>(h),
                         static_cast<std::size_t>(w), std::move(data));
}

} // namespace cgleval
