#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cgleval/errors.hpp"

namespace cgleval {

/// Row-major 2-D grid, origin at the top-left corner. Index = y * width + x.
/// Treated as immutable once constructed; all operations below are pure.
template <typename T>
class Grid {
public:
    Grid(int width, int height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (width_ <= 0 || height_ <= 0)
            throw InvalidParameter("grid dimensions must be positive, got " +
                                   std::to_string(width_) + "x" + std::to_string(height_));
        if (data_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_))
            throw InvalidParameter("grid data length " + std::to_string(data_.size()) +
                                   " does not equal width*height = " +
                                   std::to_string(static_cast<std::size_t>(width_) * height_));
    }

    Grid(int width, int height, T fill = T{})
        : Grid(width, height,
               std::vector<T>(check_extent(width, height), fill)) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }

    T at(int x, int y) const { return data_[index(x, y)]; }
    T& at(int x, int y) { return data_[index(x, y)]; }

    std::span<const T> values() const { return data_; }
    std::span<T> values() { return data_; }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * width_ + x;
    }

    bool same_shape(const Grid& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    static std::size_t check_extent(int width, int height) {
        if (width <= 0 || height <= 0)
            throw InvalidParameter("grid dimensions must be positive");
        return static_cast<std::size_t>(width) * height;
    }

    int width_;
    int height_;
    std::vector<T> data_;
};

/// Single-channel real-valued grid (blurred fields and other intermediates).
using FloatGrid = Grid<double>;

/// Grid of {0,1} values. Foreground = 1.
class BinaryMask : public Grid<std::uint8_t> {
public:
    BinaryMask(int width, int height, std::vector<std::uint8_t> data)
        : Grid(width, height, std::move(data)) {
        const auto v = values();
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] > 1)
                throw InvalidParameter("binary mask value " + std::to_string(int(v[i])) +
                                       " at index " + std::to_string(i) + " is not 0 or 1");
    }

    BinaryMask(int width, int height, std::uint8_t fill = 0)
        : Grid(width, height, fill) {
        if (fill > 1) throw InvalidParameter("binary mask fill value must be 0 or 1");
    }
};

/// Grid of class ids in [0, num_classes).
class LabelMap : public Grid<std::uint8_t> {
public:
    LabelMap(int width, int height, int num_classes, std::vector<std::uint8_t> data)
        : Grid(width, height, std::move(data)), num_classes_(num_classes) {
        if (num_classes_ <= 0)
            throw InvalidParameter("num_classes must be positive");
        const auto v = values();
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] >= num_classes_)
                throw ClassIdOutOfRange(v[i], i,
                                        "class id " + std::to_string(int(v[i])) + " at index " +
                                        std::to_string(i) + " is >= num_classes " +
                                        std::to_string(num_classes_));
    }

    LabelMap(int width, int height, int num_classes, std::uint8_t fill = 0)
        : LabelMap(width, height, num_classes,
                   std::vector<std::uint8_t>(static_cast<std::size_t>(width > 0 ? width : 0) *
                                                 (height > 0 ? height : 0),
                                             fill)) {}

    int num_classes() const { return num_classes_; }

    friend bool operator==(const LabelMap&, const LabelMap&) = default;

private:
    int num_classes_;
};

namespace detail {

inline void require_same_shape(const Grid<std::uint8_t>& a, const Grid<std::uint8_t>& b,
                               const char* op) {
    if (!a.same_shape(b))
        throw DimensionMismatch(std::string(op) + ": grids are " + std::to_string(a.width()) +
                                "x" + std::to_string(a.height()) + " vs " +
                                std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

} // namespace detail

/// output[i] = 1 iff map[i] == positive_class.
inline BinaryMask binarize(const LabelMap& map, int positive_class) {
    if (positive_class < 0 || positive_class >= map.num_classes())
        throw ClassIdOutOfRange(positive_class, 0,
                                "positive_class " + std::to_string(positive_class) +
                                " is >= num_classes " + std::to_string(map.num_classes()));
    std::vector<std::uint8_t> out(map.size());
    const auto v = map.values();
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = (v[i] == positive_class) ? 1 : 0;
    return BinaryMask(map.width(), map.height(), std::move(out));
}

/// Set difference a \ b: output[i] = 1 iff a[i]=1 and b[i]=0.
inline BinaryMask complement_diff(const BinaryMask& a, const BinaryMask& b) {
    detail::require_same_shape(a, b, "complement_diff");
    std::vector<std::uint8_t> out(a.size());
    const auto va = a.values(), vb = b.values();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (va[i] == 1 && vb[i] == 0) ? 1 : 0;
    return BinaryMask(a.width(), a.height(), std::move(out));
}

/// Element-wise OR: output[i] = max(a[i], b[i]).
inline BinaryMask or_fuse(const BinaryMask& a, const BinaryMask& b) {
    detail::require_same_shape(a, b, "or_fuse");
    std::vector<std::uint8_t> out(a.size());
    const auto va = a.values(), vb = b.values();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = va[i] | vb[i];
    return BinaryMask(a.width(), a.height(), std::move(out));
}

/// Number of foreground pixels.
inline std::size_t count_ones(const BinaryMask& mask) {
    std::size_t n = 0;
    for (auto v : mask.values()) n += v;
    return n;
}

} // namespace cgleval
