#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "cgleval/grid.hpp"

namespace helpers {

// Unique scratch directory, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& hint) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("cgleval-" + hint + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline cgleval::BinaryMask random_mask(std::mt19937_64& rng, int width, int height,
                                       double density = 0.5) {
    std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (auto& v : data) v = coin(rng) < density ? 1 : 0;
    return cgleval::BinaryMask(width, height, std::move(data));
}

inline cgleval::LabelMap random_label_map(std::mt19937_64& rng, int width, int height,
                                          int num_classes) {
    std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height);
    std::uniform_int_distribution<int> cls(0, num_classes - 1);
    for (auto& v : data) v = static_cast<std::uint8_t>(cls(rng));
    return cgleval::LabelMap(width, height, num_classes, std::move(data));
}

// Axis-aligned foreground rectangle [x0, x0+bw) x [y0, y0+bh).
inline cgleval::BinaryMask block_mask(int width, int height, int x0, int y0, int bw, int bh) {
    cgleval::BinaryMask mask(width, height, std::uint8_t{0});
    for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) mask.at(x, y) = 1;
    return mask;
}

// Grows the foreground by `px` pixels in every direction (Chebyshev dilation);
// negative px shrinks it instead.
inline cgleval::BinaryMask dilate(const cgleval::BinaryMask& mask, int px) {
    if (px < 0) {
        // erosion: keep pixels whose full neighborhood is foreground
        const int r = -px;
        cgleval::BinaryMask out(mask.width(), mask.height(), std::uint8_t{0});
        for (int y = 0; y < mask.height(); ++y)
            for (int x = 0; x < mask.width(); ++x) {
                bool all = true;
                for (int dy = -r; dy <= r && all; ++dy)
                    for (int dx = -r; dx <= r && all; ++dx) {
                        const int sx = x + dx, sy = y + dy;
                        if (sx < 0 || sx >= mask.width() || sy < 0 || sy >= mask.height() ||
                            mask.at(sx, sy) == 0)
                            all = false;
                    }
                out.at(x, y) = all ? 1 : 0;
            }
        return out;
    }
    cgleval::BinaryMask out(mask.width(), mask.height(), std::uint8_t{0});
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) {
            bool any = false;
            for (int dy = -px; dy <= px && !any; ++dy)
                for (int dx = -px; dx <= px && !any; ++dx) {
                    const int sx = x + dx, sy = y + dy;
                    if (sx >= 0 && sx < mask.width() && sy >= 0 && sy < mask.height() &&
                        mask.at(sx, sy) == 1)
                        any = true;
                }
            out.at(x, y) = any ? 1 : 0;
        }
    return out;
}

inline cgleval::LabelMap mask_to_labels(const cgleval::BinaryMask& mask, int num_classes = 2,
                                        int positive_class = 1) {
    std::vector<std::uint8_t> data(mask.size());
    const auto v = mask.values();
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = v[i] ? static_cast<std::uint8_t>(positive_class) : 0;
    return cgleval::LabelMap(mask.width(), mask.height(), num_classes, std::move(data));
}

} // namespace helpers
