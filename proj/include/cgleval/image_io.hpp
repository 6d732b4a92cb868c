#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "cgleval/errors.hpp"
#include "cgleval/grid.hpp"

namespace cgleval {

/// Maps raw 8-bit pixel values to class ids. Unmapped values are rejected at load time.
class ClassRemap {
public:
    /// raw value -> itself.
    static ClassRemap identity() {
        ClassRemap r;
        for (int i = 0; i < 256; ++i) r.table_[i] = i;
        return r;
    }

    /// 0 -> 0, any nonzero -> 1. The usual {0,255} foreground convention.
    static ClassRemap binary() {
        ClassRemap r;
        r.table_[0] = 0;
        for (int i = 1; i < 256; ++i) r.table_[i] = 1;
        return r;
    }

    static ClassRemap from_pairs(const std::vector<std::pair<int, int>>& pairs) {
        ClassRemap r;
        for (auto [raw, cls] : pairs) {
            if (raw < 0 || raw > 255)
                throw InvalidParameter("remap source value " + std::to_string(raw) +
                                       " outside [0,255]");
            if (cls < 0 || cls > 255)
                throw InvalidParameter("remap target class " + std::to_string(cls) +
                                       " outside [0,255]");
            r.table_[raw] = cls;
        }
        return r;
    }

    /// Text file: one "RAW CLASS" pair per line, '#' starts a comment.
    static ClassRemap from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw FileNotFound("remap file not found: " + path.string());
        std::vector<std::pair<int, int>> pairs;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ls(line);
            int raw, cls;
            if (!(ls >> raw)) continue; // blank line
            if (!(ls >> cls))
                throw InvalidParameter("remap file " + path.string() + ": line " +
                                       std::to_string(lineno) + " needs two integers");
            pairs.emplace_back(raw, cls);
        }
        if (pairs.empty())
            throw InvalidParameter("remap file " + path.string() + " contains no mappings");
        return from_pairs(pairs);
    }

    /// Mapped class id, or -1 if the raw value has no mapping.
    int map(std::uint8_t raw) const { return table_[raw]; }

    /// Largest mapped class id (-1 if nothing mapped).
    int max_class() const {
        int m = -1;
        for (int v : table_) m = std::max(m, v);
        return m;
    }

    /// Explicit raw->class pairs, for provenance echoing.
    std::vector<std::pair<int, int>> pairs() const {
        std::vector<std::pair<int, int>> out;
        for (int i = 0; i < 256; ++i)
            if (table_[i] >= 0) out.emplace_back(i, table_[i]);
        return out;
    }

    friend bool operator==(const ClassRemap&, const ClassRemap&) = default;

private:
    std::array<int, 256> table_{[] {
        std::array<int, 256> t{};
        t.fill(-1);
        return t;
    }()};
};

/// Raw decoded single-channel 8-bit image.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels; // row-major
};

namespace detail {

inline std::vector<std::uint8_t> slurp_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec))
        throw FileNotFound("file not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on " + path.string());
    return bytes;
}

// ---- PGM (P5 binary, P2 ascii) ----

struct PnmCursor {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    int next_token_int(const std::string& what) {
        // skip whitespace and '#' comments
        while (pos < bytes.size()) {
            if (std::isspace(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size())
            throw MalformedImage("pgm header truncated while reading " + what);
        if (!std::isdigit(bytes[pos]))
            throw MalformedImage("pgm header: expected integer for " + what);
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1'000'000'000) throw MalformedImage("pgm header value out of range");
            ++pos;
        }
        return static_cast<int>(v);
    }
};

inline GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2'))
        throw MalformedImage("not a pgm file: " + name);
    const bool binary = bytes[1] == '5';
    PnmCursor cur{bytes, 2};
    GrayImage img;
    img.width = cur.next_token_int("width");
    img.height = cur.next_token_int("height");
    const int maxval = cur.next_token_int("maxval");
    if (img.width <= 0 || img.height <= 0)
        throw MalformedImage("pgm with non-positive dimensions: " + name);
    if (maxval <= 0 || maxval > 255)
        throw MalformedImage("pgm " + name + " has maxval " + std::to_string(maxval) +
                             "; only 8-bit images are supported");
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    img.pixels.resize(n);
    if (binary) {
        // exactly one whitespace byte separates the header from the raster
        if (cur.pos >= bytes.size() || !std::isspace(bytes[cur.pos]))
            throw MalformedImage("pgm raster not preceded by whitespace: " + name);
        ++cur.pos;
        if (bytes.size() - cur.pos < n)
            throw MalformedImage("pgm raster truncated: " + name);
        std::memcpy(img.pixels.data(), bytes.data() + cur.pos, n);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const int v = cur.next_token_int("sample");
            if (v > maxval)
                throw MalformedImage("pgm sample " + std::to_string(v) + " exceeds maxval in " +
                                     name);
            img.pixels[i] = static_cast<std::uint8_t>(v);
        }
    }
    return img;
}

// ---- PNG via libpng ----

struct PngMemReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

inline void png_mem_read(png_structp png, png_bytep out, png_size_t count) {
    auto* r = static_cast<PngMemReader*>(png_get_io_ptr(png));
    if (r->pos + count > r->size) {
        png_error(png, "read past end of buffer");
        return;
    }
    std::memcpy(out, r->data + r->pos, count);
    r->pos += count;
}

inline GrayImage decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<png_bytep> rows;
    GrayImage img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw MalformedImage("png decode failed: " + name);
    }
    PngMemReader reader{bytes.data(), bytes.size(), 0};
    png_set_read_fn(png, &reader, png_mem_read);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (color_type != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw MalformedImage("png " + name + " is not single-channel grayscale");
    }
    if (bit_depth != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw MalformedImage("png " + name + " has bit depth " + std::to_string(bit_depth) +
                             "; only 8-bit images are supported");
    }
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.pixels.resize(static_cast<std::size_t>(w) * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void encode_png(const std::filesystem::path& path, int width, int height,
                       const std::uint8_t* pixels) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(f);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(f);
        throw IoError("png encode failed: " + path.string());
    }
    png_init_io(png, f);
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * width));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(f) != 0) throw IoError("close failed on " + path.string());
}

inline void encode_pgm(const std::filesystem::path& path, int width, int height,
                       const std::uint8_t* pixels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels),
              static_cast<std::streamsize>(width) * height);
    if (!out) throw IoError("write failure on " + path.string());
}

inline bool has_png_magic(const std::vector<std::uint8_t>& bytes) {
    static const std::uint8_t magic[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    return bytes.size() >= 8 && std::memcmp(bytes.data(), magic, 8) == 0;
}

} // namespace detail

/// Decodes a single-channel 8-bit raster image. The container is sniffed from
/// the file content (PNG signature or PGM magic), not the extension.
inline GrayImage read_gray_image(const std::filesystem::path& path) {
    const auto bytes = detail::slurp_file(path);
    if (detail::has_png_magic(bytes)) return detail::decode_png(bytes, path.string());
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2'))
        return detail::decode_pgm(bytes, path.string());
    throw MalformedImage("unrecognized image format: " + path.string());
}

/// Encodes an 8-bit grayscale image; the container follows the extension
/// (.png or .pgm, case-insensitive).
inline void write_gray_image(const std::filesystem::path& path, int width, int height,
                             const std::uint8_t* pixels) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png")
        detail::encode_png(path, width, height, pixels);
    else if (ext == ".pgm")
        detail::encode_pgm(path, width, height, pixels);
    else
        throw InvalidParameter("unsupported image extension: " + path.string());
}

/// Reads a label map: pixel value = class id, optionally passed through a remap table.
/// Fails with ClassIdOutOfRange if any (mapped) value is >= expected_classes, or if a
/// value has no entry in a supplied remap table.
inline LabelMap load_label_map(const std::filesystem::path& path, int expected_classes,
                               const std::optional<ClassRemap>& remap = std::nullopt) {
    if (expected_classes <= 0) throw InvalidParameter("expected_classes must be positive");
    GrayImage img = read_gray_image(path);
    std::vector<std::uint8_t> data(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        int cls = img.pixels[i];
        if (remap) {
            cls = remap->map(img.pixels[i]);
            if (cls < 0)
                throw ClassIdOutOfRange(img.pixels[i], i,
                                        path.string() + ": pixel value " +
                                        std::to_string(int(img.pixels[i])) + " at index " +
                                        std::to_string(i) + " has no remap entry");
        }
        if (cls >= expected_classes)
            throw ClassIdOutOfRange(cls, i,
                                    path.string() + ": class id " + std::to_string(cls) +
                                    " at index " + std::to_string(i) + " is >= expected_classes " +
                                    std::to_string(expected_classes));
        data[i] = static_cast<std::uint8_t>(cls);
    }
    return LabelMap(img.width, img.height, expected_classes, std::move(data));
}

/// Writes a mask with foreground pixels at `foreground` (255 by default, for viewers).
inline void save_mask(const BinaryMask& mask, const std::filesystem::path& path,
                      std::uint8_t foreground = 255) {
    std::vector<std::uint8_t> px(mask.size());
    const auto v = mask.values();
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = v[i] ? foreground : 0;
    write_gray_image(path, mask.width(), mask.height(), px.data());
}

/// Writes class ids verbatim as pixel values.
inline void save_label_map(const LabelMap& map, const std::filesystem::path& path) {
    write_gray_image(path, map.width(), map.height(), map.values().data());
}

/// Quantizes a real-valued grid to 8 bits: round(v * 255), clamped.
inline std::vector<std::uint8_t> quantize_grid(const FloatGrid& grid) {
    std::vector<std::uint8_t> px(grid.size());
    const auto v = grid.values();
    for (std::size_t i = 0; i < px.size(); ++i) {
        const long q = std::lround(v[i] * 255.0);
        px[i] = static_cast<std::uint8_t>(std::clamp(q, 0L, 255L));
    }
    return px;
}

} // namespace cgleval
