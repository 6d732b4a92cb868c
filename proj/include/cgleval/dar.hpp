#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgleval/errors.hpp"
#include "cgleval/grid.hpp"
#include "cgleval/image_io.hpp"

namespace cgleval {

enum class BorderMode { zero_pad, replicate };

enum class EmptyGtPolicy {
    skip,   // image excluded from aggregation and flagged
    binary, // 1.0 if y' is empty, 0.0 otherwise
};

/// Parameters of the blur-threshold erosion pipeline. Defaults: sigma 3.0,
/// Th 0.999, radius ceil(3*sigma) = 9 (19x19 kernel), zero-padded borders.
struct DarParams {
    double sigma = 3.0;
    double th = 0.999;
    std::optional<int> kernel_radius; // nullopt: ceil(3*sigma)
    BorderMode border = BorderMode::zero_pad;
    EmptyGtPolicy empty_gt = EmptyGtPolicy::skip;
    bool clamp_negative = false;

    int resolved_radius() const {
        const int r = kernel_radius ? *kernel_radius : static_cast<int>(std::ceil(3.0 * sigma));
        if (r < 1) throw InvalidParameter("kernel radius must be >= 1");
        return r;
    }
};

/// Square symmetric convolution kernel with unit mass.
/// `factor1d`, when non-empty, is the separable factorization used by the
/// fast blur path; `weights` is its outer product (center-adjusted so the
/// row-major sum lands exactly on 1.0).
struct Kernel2D {
    int radius = 0;
    std::vector<double> weights;  // (2r+1)^2, row-major over offsets [-r, r]
    std::vector<double> factor1d; // 2r+1, or empty for non-separable kernels

    int side() const { return 2 * radius + 1; }
    double at(int dx, int dy) const {
        return weights[static_cast<std::size_t>(dy + radius) * side() + (dx + radius)];
    }
    double center() const { return at(0, 0); }
};

namespace detail {

inline void normalize_unit_mass(std::vector<double>& w) {
    double s = 0.0;
    for (double v : w) s += v;
    if (!(s > 0.0)) throw InvalidParameter("kernel mass must be positive");
    for (double& v : w) v /= s;
}

// Sum of the non-center taps, in the order blur_separable applies them.
inline double offcenter_sum(const std::vector<double>& k) {
    const int center = (static_cast<int>(k.size()) - 1) / 2;
    double t = 0.0;
    for (int i = 0; i < static_cast<int>(k.size()); ++i)
        if (i != center) t += k[i];
    return t;
}

// Pins the center tap to 1 - sum(others) so that a fully covered pixel blurs
// to exactly 1.0 (the separable pass adds the center tap last). The
// subtraction is exact whenever the off-center mass is >= 0.5 (any kernel
// with sigma around 1 px or wider); narrower kernels fall back to an ulp
// search and, failing that, stay within the 1e-12 mass invariant.
inline void pin_center_tap(std::vector<double>& k) {
    const int center = (static_cast<int>(k.size()) - 1) / 2;
    const double others = offcenter_sum(k);
    if (!(others < 1.0)) return;
    double tap = 1.0 - others;
    for (int probe = 0; probe < 64; ++probe) {
        const double total = others + tap;
        if (total == 1.0) break;
        tap = std::nextafter(tap, total < 1.0 ? std::numeric_limits<double>::infinity()
                                              : -std::numeric_limits<double>::infinity());
    }
    k[center] = tap;
}

inline int clamp_coord(int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); }

// Two-pass separable convolution. Off-center taps accumulate in ascending
// offset order and the center tap lands last, matching pin_center_tap, so a
// fully covered pixel comes out at exactly 1.0.
inline FloatGrid blur_separable(const BinaryMask& mask, const std::vector<double>& k,
                                BorderMode border) {
    const int w = mask.width(), h = mask.height();
    const int r = (static_cast<int>(k.size()) - 1) / 2;
    FloatGrid horiz(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dx = -r; dx <= r; ++dx) {
                if (dx == 0) continue;
                const int sx = x + dx;
                if (border == BorderMode::zero_pad) {
                    if (sx < 0 || sx >= w) continue;
                    acc += k[dx + r] * mask.at(sx, y);
                } else {
                    acc += k[dx + r] * mask.at(clamp_coord(sx, w), y);
                }
            }
            acc += k[r] * mask.at(x, y);
            horiz.at(x, y) = acc;
        }
    }
    FloatGrid out(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                if (dy == 0) continue;
                const int sy = y + dy;
                if (border == BorderMode::zero_pad) {
                    if (sy < 0 || sy >= h) continue;
                    acc += k[dy + r] * horiz.at(x, sy);
                } else {
                    acc += k[dy + r] * horiz.at(x, clamp_coord(sy, h));
                }
            }
            acc += k[r] * horiz.at(x, y);
            out.at(x, y) = std::clamp(acc, 0.0, 1.0);
        }
    }
    return out;
}

inline FloatGrid blur_direct(const BinaryMask& mask, const Kernel2D& kernel, BorderMode border) {
    const int w = mask.width(), h = mask.height();
    const int r = kernel.radius;
    FloatGrid out(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    int sx = x + dx, sy = y + dy;
                    if (border == BorderMode::zero_pad) {
                        if (sx < 0 || sx >= w || sy < 0 || sy >= h) continue;
                    } else {
                        sx = clamp_coord(sx, w);
                        sy = clamp_coord(sy, h);
                    }
                    acc += kernel.at(dx, dy) * mask.at(sx, sy);
                }
            }
            out.at(x, y) = std::clamp(acc, 0.0, 1.0);
        }
    }
    return out;
}

} // namespace detail

/// w(i,j) proportional to exp(-(i^2+j^2)/(2 sigma^2)) on [-radius, radius]^2,
/// normalized to unit mass after truncation.
inline Kernel2D gaussian_kernel(double sigma, int radius) {
    if (!(sigma > 0.0)) throw InvalidParameter("sigma must be > 0");
    if (radius < 1) throw InvalidParameter("kernel radius must be >= 1");
    const int side = 2 * radius + 1;
    Kernel2D kernel;
    kernel.radius = radius;
    kernel.factor1d.resize(side);
    for (int i = -radius; i <= radius; ++i)
        kernel.factor1d[i + radius] = std::exp(-(double(i) * i) / (2.0 * sigma * sigma));
    detail::normalize_unit_mass(kernel.factor1d);
    detail::pin_center_tap(kernel.factor1d);
    // the 2-D weights are the exact outer product of the unit-mass factor
    kernel.weights.resize(static_cast<std::size_t>(side) * side);
    for (int j = 0; j < side; ++j)
        for (int i = 0; i < side; ++i)
            kernel.weights[static_cast<std::size_t>(j) * side + i] =
                kernel.factor1d[j] * kernel.factor1d[i];
    return kernel;
}

/// out(p) = sum over offsets o of w(o) * mask(p+o). Out-of-bounds reads are 0
/// (zero_pad) or the nearest edge pixel (replicate). Uses the separable
/// factorization when the kernel carries one.
inline FloatGrid blur(const BinaryMask& mask, const Kernel2D& kernel, BorderMode border) {
    if (kernel.radius < 1 ||
        kernel.weights.size() != static_cast<std::size_t>(kernel.side()) * kernel.side())
        throw InvalidParameter("malformed kernel");
    if (!kernel.factor1d.empty())
        return detail::blur_separable(mask, kernel.factor1d, border);
    return detail::blur_direct(mask, kernel, border);
}

/// out(p) = 1 iff grid(p) > th. Strict comparison: a fully covered pixel
/// blurs to exactly 1.0 > th, a value of exactly th does not survive.
inline BinaryMask threshold(const FloatGrid& grid, double th) {
    if (!(th > 0.0 && th < 1.0)) throw InvalidParameter("threshold must lie in (0,1)");
    std::vector<std::uint8_t> out(grid.size());
    const auto v = grid.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > th ? 1 : 0;
    return BinaryMask(grid.width(), grid.height(), std::move(out));
}

/// True when the survivor masks are guaranteed subsets of their source
/// complements: a pixel outside the mask misses at least the center weight,
/// so its blurred value is at most 1 - w(0,0), which must not exceed Th.
inline bool erosion_subset_guaranteed(const Kernel2D& kernel, double th) {
    return kernel.center() > 1.0 - th;
}

enum class DarStatus { ok, empty_gt_skipped };

struct DarIntermediates {
    BinaryMask fp_mask, fn_mask;
    FloatGrid fp_blurred, fn_blurred;
    BinaryMask fp_eroded, fn_eroded;
    BinaryMask y_prime;
};

struct DarResult {
    DarStatus status = DarStatus::ok;
    std::optional<double> score; // absent when empty GT is skipped
    bool clamped = false;        // negative score clamped to 0
    std::size_t surviving_fp = 0;
    std::size_t surviving_fn = 0;
    std::size_t gt_ones = 0;
    std::optional<DarIntermediates> intermediates;
};

namespace detail {

inline DarResult dar_run(const BinaryMask& pred, const BinaryMask& gt, const DarParams& params,
                         const Kernel2D& kernel, bool keep_intermediates) {
    require_same_shape(pred, gt, "dar");
    if (!(params.th > 0.0 && params.th < 1.0))
        throw InvalidParameter("threshold must lie in (0,1)");

    BinaryMask fp = complement_diff(pred, gt); // false positives, pred \ gt
    BinaryMask fn = complement_diff(gt, pred); // false negatives, gt \ pred
    FloatGrid fp_blurred = blur(fp, kernel, params.border);
    FloatGrid fn_blurred = blur(fn, kernel, params.border);
    BinaryMask fp_eroded = threshold(fp_blurred, params.th);
    BinaryMask fn_eroded = threshold(fn_blurred, params.th);
    BinaryMask y_prime = or_fuse(fp_eroded, fn_eroded);

    DarResult result;
    result.surviving_fp = count_ones(fp_eroded);
    result.surviving_fn = count_ones(fn_eroded);
    result.gt_ones = count_ones(gt);

    const std::size_t surviving = count_ones(y_prime);
    if (result.gt_ones == 0) {
        if (params.empty_gt == EmptyGtPolicy::skip) {
            result.status = DarStatus::empty_gt_skipped;
        } else {
            result.score = surviving == 0 ? 1.0 : 0.0;
        }
    } else {
        double score =
            1.0 - static_cast<double>(surviving) / static_cast<double>(result.gt_ones);
        if (params.clamp_negative && score < 0.0) {
            score = 0.0;
            result.clamped = true;
        }
        result.score = score;
    }
    if (keep_intermediates)
        result.intermediates = DarIntermediates{std::move(fp),         std::move(fn),
                                                std::move(fp_blurred), std::move(fn_blurred),
                                                std::move(fp_eroded),  std::move(fn_eroded),
                                                std::move(y_prime)};
    return result;
}

} // namespace detail

/// Full pipeline with all intermediates retained, for debugging dumps.
inline DarResult dar_components(const BinaryMask& pred, const BinaryMask& gt,
                                const DarParams& params, const Kernel2D& kernel) {
    return detail::dar_run(pred, gt, params, kernel, /*keep_intermediates=*/true);
}

inline DarResult dar_components(const BinaryMask& pred, const BinaryMask& gt,
                                const DarParams& params) {
    return dar_components(pred, gt, params, gaussian_kernel(params.sigma, params.resolved_radius()));
}

/// DaR = 1 - |y'| / |GT ones|, where y' is the OR of the blur-threshold
/// survivors of the false-positive and false-negative complements.
inline DarResult dar_score(const BinaryMask& pred, const BinaryMask& gt, const DarParams& params,
                           const Kernel2D& kernel) {
    return detail::dar_run(pred, gt, params, kernel, /*keep_intermediates=*/false);
}

inline DarResult dar_score(const BinaryMask& pred, const BinaryMask& gt, const DarParams& params) {
    return dar_score(pred, gt, params, gaussian_kernel(params.sigma, params.resolved_radius()));
}

/// Writes the seven pipeline intermediates into out_dir with fixed names.
/// Masks and grids are quantized to 8 bits (value * 255, rounded).
inline std::vector<std::filesystem::path> dar_debug_dump(const DarResult& result,
                                                         const std::filesystem::path& out_dir) {
    if (!result.intermediates)
        throw InvalidParameter("dar_debug_dump requires a result with intermediates "
                               "(use dar_components)");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    const DarIntermediates& m = *result.intermediates;
    std::vector<std::filesystem::path> written;
    auto dump_mask = [&](const BinaryMask& mask, const char* name) {
        const auto path = out_dir / name;
        save_mask(mask, path, 255);
        written.push_back(path);
    };
    auto dump_grid = [&](const FloatGrid& grid, const char* name) {
        const auto path = out_dir / name;
        const auto px = quantize_grid(grid);
        write_gray_image(path, grid.width(), grid.height(), px.data());
        written.push_back(path);
    };
    dump_mask(m.fp_mask, "fp.png");
    dump_mask(m.fn_mask, "fn.png");
    dump_grid(m.fp_blurred, "fp_blur.png");
    dump_grid(m.fn_blurred, "fn_blur.png");
    dump_mask(m.fp_eroded, "fp_erode.png");
    dump_mask(m.fn_eroded, "fn_erode.png");
    dump_mask(m.y_prime, "y_prime.png");
    return written;
}

/// Labels 4-connected foreground components with ids 1..n (0 = background).
/// Returns n.
inline int connected_components(const BinaryMask& mask, std::vector<int>& labels) {
    const int w = mask.width(), h = mask.height();
    labels.assign(mask.size(), 0);
    int next = 0;
    std::vector<std::pair<int, int>> stack;
    for (int y0 = 0; y0 < h; ++y0) {
        for (int x0 = 0; x0 < w; ++x0) {
            if (mask.at(x0, y0) == 0 || labels[mask.index(x0, y0)] != 0) continue;
            ++next;
            stack.push_back({x0, y0});
            labels[mask.index(x0, y0)] = next;
            while (!stack.empty()) {
                auto [x, y] = stack.back();
                stack.pop_back();
                const int nx[4] = {x - 1, x + 1, x, x};
                const int ny[4] = {y, y, y - 1, y + 1};
                for (int i = 0; i < 4; ++i) {
                    if (nx[i] < 0 || nx[i] >= w || ny[i] < 0 || ny[i] >= h) continue;
                    const std::size_t idx = mask.index(nx[i], ny[i]);
                    if (mask.at(nx[i], ny[i]) == 1 && labels[idx] == 0) {
                        labels[idx] = next;
                        stack.push_back({nx[i], ny[i]});
                    }
                }
            }
        }
    }
    return next;
}

/// Number of GT components that, blurred in isolation, keep no pixel above th:
/// missing such a component entirely cannot lower the score. Diagnostic only.
///
/// Components whose radius-expanded bounding box stays inside the image are
/// blurred on a cropped canvas; every read a survivor candidate can make is
/// zero outside that canvas under either border mode, so the crop is exact.
inline std::size_t unsurvivable_components(const BinaryMask& gt, const Kernel2D& kernel,
                                           double th, BorderMode border) {
    std::vector<int> labels;
    const int n = connected_components(gt, labels);
    if (n == 0) return 0;

    struct Box {
        int x0, y0, x1, y1;
    };
    std::vector<Box> boxes(n, {gt.width(), gt.height(), -1, -1});
    for (int y = 0; y < gt.height(); ++y)
        for (int x = 0; x < gt.width(); ++x) {
            const int comp = labels[gt.index(x, y)];
            if (comp == 0) continue;
            Box& b = boxes[comp - 1];
            b.x0 = std::min(b.x0, x);
            b.y0 = std::min(b.y0, y);
            b.x1 = std::max(b.x1, x);
            b.y1 = std::max(b.y1, y);
        }

    const int r = kernel.radius;
    std::size_t unsurvivable = 0;
    for (int comp = 1; comp <= n; ++comp) {
        const Box& b = boxes[comp - 1];
        const bool cropable =
            b.x0 - r >= 0 && b.y0 - r >= 0 && b.x1 + r < gt.width() && b.y1 + r < gt.height();
        BinaryMask isolated = [&] {
            if (cropable) {
                const int cw = b.x1 - b.x0 + 1 + 2 * r;
                const int ch = b.y1 - b.y0 + 1 + 2 * r;
                BinaryMask canvas(cw, ch, std::uint8_t{0});
                for (int y = b.y0; y <= b.y1; ++y)
                    for (int x = b.x0; x <= b.x1; ++x)
                        if (labels[gt.index(x, y)] == comp)
                            canvas.at(x - b.x0 + r, y - b.y0 + r) = 1;
                return canvas;
            }
            std::vector<std::uint8_t> data(gt.size(), 0);
            for (std::size_t i = 0; i < labels.size(); ++i)
                if (labels[i] == comp) data[i] = 1;
            return BinaryMask(gt.width(), gt.height(), std::move(data));
        }();
        const BorderMode mode = cropable ? BorderMode::zero_pad : border;
        if (count_ones(threshold(blur(isolated, kernel, mode), th)) == 0) ++unsurvivable;
    }
    return unsurvivable;
}

} // namespace cgleval
