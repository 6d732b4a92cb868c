#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cgleval/errors.hpp"
#include "cgleval/grid.hpp"

namespace cgleval {

/// Per-class TP/FP/FN pixel counts. Merging is element-wise addition, so
/// per-image counts can be accumulated in any order.
struct ConfusionCounts {
    explicit ConfusionCounts(int num_classes)
        : num_classes(num_classes), tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0) {
        if (num_classes <= 0) throw InvalidParameter("num_classes must be positive");
    }

    void merge(const ConfusionCounts& other) {
        if (other.num_classes != num_classes)
            throw ClassCountMismatch("cannot merge counts over " +
                                     std::to_string(other.num_classes) + " classes into " +
                                     std::to_string(num_classes));
        for (int c = 0; c < num_classes; ++c) {
            tp[c] += other.tp[c];
            fp[c] += other.fp[c];
            fn[c] += other.fn[c];
        }
    }

    int num_classes;
    std::vector<std::uint64_t> tp, fp, fn;

    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

enum class IouAggregation { per_image_mean, global_counts };

struct IoUReport {
    std::vector<std::optional<double>> per_class_iou;
    double mean_iou = 0.0;
    std::optional<double> cgl_iou; // IoU of the positive class
    IouAggregation aggregation_mode = IouAggregation::per_image_mean;
};

inline ConfusionCounts confusion_counts(const LabelMap& pred, const LabelMap& gt) {
    if (!pred.same_shape(gt))
        throw DimensionMismatch("confusion_counts: maps are " + std::to_string(pred.width()) +
                                "x" + std::to_string(pred.height()) + " vs " +
                                std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
    if (pred.num_classes() != gt.num_classes())
        throw ClassCountMismatch("confusion_counts: " + std::to_string(pred.num_classes()) +
                                 " vs " + std::to_string(gt.num_classes()) + " classes");
    ConfusionCounts counts(pred.num_classes());
    const auto p = pred.values(), g = gt.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == g[i]) {
            ++counts.tp[p[i]];
        } else {
            ++counts.fp[p[i]];
            ++counts.fn[g[i]];
        }
    }
    return counts;
}

/// tp/(tp+fp+fn); nullopt when the class is absent from both pred and gt.
inline std::optional<double> class_iou(const ConfusionCounts& counts, int c) {
    if (c < 0 || c >= counts.num_classes)
        throw ClassIdOutOfRange(c, 0, "class id " + std::to_string(c) + " is >= num_classes " +
                                std::to_string(counts.num_classes));
    const std::uint64_t denom = counts.tp[c] + counts.fp[c] + counts.fn[c];
    if (denom == 0) return std::nullopt;
    return static_cast<double>(counts.tp[c]) / static_cast<double>(denom);
}

/// Arithmetic mean over classes whose IoU is defined.
inline double mean_iou(const ConfusionCounts& counts) {
    double sum = 0.0;
    int defined = 0;
    for (int c = 0; c < counts.num_classes; ++c) {
        if (auto iou = class_iou(counts, c)) {
            sum += *iou;
            ++defined;
        }
    }
    if (defined == 0) throw AllClassesUndefined("no class present in either map");
    return sum / defined;
}

/// Dataset-level IoU.
///  - global_counts: merge all counts, then score once.
///  - per_image_mean: score each image, then average the defined values.
inline IoUReport aggregate_iou(const std::vector<ConfusionCounts>& per_image,
                               IouAggregation mode, int positive_class = 1) {
    if (per_image.empty()) throw EmptyInput("aggregate_iou: no images");
    const int k = per_image.front().num_classes;
    for (const auto& c : per_image)
        if (c.num_classes != k)
            throw ClassCountMismatch("aggregate_iou: inconsistent class counts");
    if (positive_class < 0 || positive_class >= k)
        throw ClassIdOutOfRange(positive_class, 0, "positive_class out of range");

    IoUReport report;
    report.aggregation_mode = mode;
    report.per_class_iou.assign(k, std::nullopt);

    if (mode == IouAggregation::global_counts) {
        ConfusionCounts total(k);
        for (const auto& c : per_image) total.merge(c);
        for (int c = 0; c < k; ++c) report.per_class_iou[c] = class_iou(total, c);
        report.mean_iou = mean_iou(total);
        report.cgl_iou = report.per_class_iou[positive_class];
        return report;
    }

    std::vector<double> class_sum(k, 0.0);
    std::vector<int> class_n(k, 0);
    double miou_sum = 0.0;
    int miou_n = 0;
    for (const auto& counts : per_image) {
        for (int c = 0; c < k; ++c) {
            if (auto iou = class_iou(counts, c)) {
                class_sum[c] += *iou;
                ++class_n[c];
            }
        }
        // every non-empty image defines at least one class
        miou_sum += mean_iou(counts);
        ++miou_n;
    }
    for (int c = 0; c < k; ++c)
        if (class_n[c] > 0) report.per_class_iou[c] = class_sum[c] / class_n[c];
    if (miou_n == 0) throw AllClassesUndefined("no image defines any class");
    report.mean_iou = miou_sum / miou_n;
    report.cgl_iou = report.per_class_iou[positive_class];
    return report;
}

} // namespace cgleval
