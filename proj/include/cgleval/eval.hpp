#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cgleval/dar.hpp"
#include "cgleval/errors.hpp"
#include "cgleval/grid.hpp"
#include "cgleval/image_io.hpp"
#include "cgleval/iou.hpp"
#include "cgleval/version.hpp"

namespace cgleval {

enum class ReportFormat { json, csv };

struct MetricSet {
    bool miou = false;
    bool class_iou = false;
    bool dar = false;

    bool any() const { return miou || class_iou || dar; }
    bool needs_confusion() const { return miou || class_iou; }

    static MetricSet all() { return {true, true, true}; }

    static MetricSet parse(const std::vector<std::string>& names) {
        MetricSet set;
        for (const auto& name : names) {
            if (name == "miou")
                set.miou = true;
            else if (name == "class-iou")
                set.class_iou = true;
            else if (name == "dar")
                set.dar = true;
            else
                throw InvalidParameter("unknown metric '" + name +
                                       "' (expected miou, class-iou or dar)");
        }
        return set;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        if (miou) out.push_back("miou");
        if (class_iou) out.push_back("class-iou");
        if (dar) out.push_back("dar");
        return out;
    }
};

struct EvalConfig {
    std::filesystem::path pred_dir;
    std::filesystem::path gt_dir;
    MetricSet metrics = MetricSet::all();
    int positive_class = 1;
    DarParams dar;
    IouAggregation iou_aggregation = IouAggregation::per_image_mean;
    std::optional<ClassRemap> remap;
    int workers = 1;
    std::optional<std::filesystem::path> debug_dump_dir;
    std::filesystem::path out;
    ReportFormat format = ReportFormat::json;

    /// Class count implied by the configuration: at least 2, enough for the
    /// positive class, and enough for every remap target.
    int num_classes() const {
        int k = std::max(2, positive_class + 1);
        if (remap) k = std::max(k, remap->max_class() + 1);
        return k;
    }

    /// The remap actually applied at load time: the user-supplied table when
    /// present, the {0->0, nonzero->1} convention for binary evaluation,
    /// strict identity otherwise.
    std::optional<ClassRemap> effective_remap() const {
        if (remap) return remap;
        if (num_classes() == 2) return ClassRemap::binary();
        return std::nullopt;
    }
};

struct PerImageResult {
    std::string id;
    std::string resolution; // "WxH", empty when the pair failed to load
    std::optional<double> miou;
    std::optional<double> cgl_iou;
    std::optional<double> dar;
    // raw confusion counts (present when an IoU metric ran), so dataset
    // aggregates are recomputable from the per-image entries in either mode
    std::optional<ConfusionCounts> counts;
    std::vector<std::string> flags; // empty-gt, dar-clamped, thin-gt, load-error
    std::optional<std::string> error;
};

struct DatasetAggregates {
    std::size_t images = 0;
    std::size_t failed = 0;
    std::optional<double> miou;
    std::optional<double> cgl_iou;
    std::optional<double> dar;
    std::size_t iou_images = 0; // images contributing to IoU aggregates
    std::size_t dar_images = 0; // images contributing to the DaR mean
};

struct EvalReport {
    std::string toolkit_version;
    EvalConfig config;
    int kernel_radius = 0;
    bool erosion_subset_guaranteed = true;
    std::vector<PerImageResult> per_image;
    DatasetAggregates dataset;
    std::vector<std::string> unmatched_pred;
    std::vector<std::string> unmatched_gt;

    bool any_failures() const { return dataset.failed > 0; }
};

struct MaskPair {
    std::string id; // shared filename stem
    std::filesystem::path pred;
    std::filesystem::path gt;
};

struct PairingResult {
    std::vector<MaskPair> pairs; // sorted by id
    std::vector<std::string> unmatched_pred;
    std::vector<std::string> unmatched_gt;
};

namespace detail {

inline bool recognized_raster(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".pgm";
}

inline std::map<std::string, std::filesystem::path>
collect_masks(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
        throw DirectoryNotFound("directory not found: " + dir.string());
    std::map<std::string, std::filesystem::path> by_stem;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || !recognized_raster(entry.path())) continue;
        const std::string stem = entry.path().stem().string();
        auto [it, inserted] = by_stem.emplace(stem, entry.path());
        if (!inserted)
            throw InvalidParameter("duplicate stem '" + stem + "' in " + dir.string() + ": " +
                                   it->second.filename().string() + " and " +
                                   entry.path().filename().string());
    }
    return by_stem;
}

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace detail

/// Matches prediction and ground-truth files by identical filename stem
/// (extension-insensitive; .png and .pgm are considered). Pairs are sorted
/// lexicographically by stem; files without a partner are reported.
inline PairingResult pair_masks(const std::filesystem::path& pred_dir,
                                const std::filesystem::path& gt_dir) {
    const auto pred = detail::collect_masks(pred_dir);
    const auto gt = detail::collect_masks(gt_dir);
    PairingResult result;
    for (const auto& [stem, path] : pred) {
        auto it = gt.find(stem);
        if (it != gt.end())
            result.pairs.push_back({stem, path, it->second});
        else
            result.unmatched_pred.push_back(path.filename().string());
    }
    for (const auto& [stem, path] : gt)
        if (!pred.contains(stem)) result.unmatched_gt.push_back(path.filename().string());
    if (result.pairs.empty()) {
        std::string msg = "no prediction/ground-truth pairs found; unmatched predictions: [";
        for (std::size_t i = 0; i < result.unmatched_pred.size(); ++i)
            msg += (i ? ", " : "") + result.unmatched_pred[i];
        msg += "], unmatched ground truth: [";
        for (std::size_t i = 0; i < result.unmatched_gt.size(); ++i)
            msg += (i ? ", " : "") + result.unmatched_gt[i];
        msg += "]";
        throw NoPairsFound(msg);
    }
    return result;
}

namespace detail {

inline PerImageResult evaluate_pair(const MaskPair& pair, const EvalConfig& config,
                                    const Kernel2D& kernel) {
    PerImageResult result;
    result.id = pair.id;
    try {
        const int k = config.num_classes();
        const auto remap = config.effective_remap();
        const LabelMap pred = load_label_map(pair.pred, k, remap);
        const LabelMap gt = load_label_map(pair.gt, k, remap);
        if (!pred.same_shape(gt))
            throw DimensionMismatch("prediction is " + std::to_string(pred.width()) + "x" +
                                    std::to_string(pred.height()) + ", ground truth is " +
                                    std::to_string(gt.width()) + "x" +
                                    std::to_string(gt.height()));
        result.resolution = std::to_string(pred.width()) + "x" + std::to_string(pred.height());

        if (config.metrics.needs_confusion()) {
            ConfusionCounts counts = confusion_counts(pred, gt);
            if (config.metrics.miou) result.miou = mean_iou(counts);
            if (config.metrics.class_iou)
                result.cgl_iou = class_iou(counts, config.positive_class);
            result.counts = std::move(counts);
        }

        if (config.metrics.dar) {
            const BinaryMask pred_mask = binarize(pred, config.positive_class);
            const BinaryMask gt_mask = binarize(gt, config.positive_class);
            DarResult dar;
            if (config.debug_dump_dir) {
                dar = dar_components(pred_mask, gt_mask, config.dar, kernel);
                dar_debug_dump(dar, *config.debug_dump_dir / pair.id);
            } else {
                dar = dar_score(pred_mask, gt_mask, config.dar, kernel);
            }
            result.dar = dar.score;
            if (dar.gt_ones == 0) result.flags.push_back("empty-gt");
            if (dar.clamped) result.flags.push_back("dar-clamped");
            if (dar.gt_ones > 0 &&
                unsurvivable_components(gt_mask, kernel, config.dar.th, config.dar.border) > 0)
                result.flags.push_back("thin-gt");
        }
    } catch (const std::exception& e) {
        result = PerImageResult{};
        result.id = pair.id;
        result.flags = {"load-error"};
        result.error = e.what();
    }
    return result;
}

} // namespace detail

/// Evaluates every matched pair with the selected metrics. Per-image load
/// failures become flagged entries and do not abort the run. The report is a
/// pure function of inputs and config: results are collected by pair index,
/// so worker count never changes a byte of output.
inline EvalReport run_eval(const EvalConfig& config) {
    if (!config.metrics.any()) throw InvalidParameter("at least one metric must be selected");
    if (config.workers < 1) throw InvalidParameter("workers must be >= 1");
    if (config.positive_class < 0) throw InvalidParameter("positive_class must be >= 0");

    PairingResult pairing = pair_masks(config.pred_dir, config.gt_dir);
    const Kernel2D kernel = gaussian_kernel(config.dar.sigma, config.dar.resolved_radius());

    EvalReport report;
    report.toolkit_version = kVersion;
    report.config = config;
    report.kernel_radius = kernel.radius;
    report.erosion_subset_guaranteed = erosion_subset_guaranteed(kernel, config.dar.th);
    report.unmatched_pred = std::move(pairing.unmatched_pred);
    report.unmatched_gt = std::move(pairing.unmatched_gt);

    const std::size_t n = pairing.pairs.size();
    report.per_image.resize(n);
    const std::size_t nworkers = std::min<std::size_t>(config.workers, n);
    if (nworkers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            report.per_image[i] = detail::evaluate_pair(pairing.pairs[i], config, kernel);
    } else {
        std::atomic<std::size_t> cursor{0};
        auto drain = [&] {
            for (std::size_t i; (i = cursor.fetch_add(1)) < n;)
                report.per_image[i] = detail::evaluate_pair(pairing.pairs[i], config, kernel);
        };
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nworkers; ++t) pool.emplace_back(drain);
        for (auto& t : pool) t.join();
    }

    // dataset aggregates derive from the per-image entries alone, in id order
    std::vector<ConfusionCounts> all_counts;
    double dar_sum = 0.0;
    std::size_t dar_n = 0;
    report.dataset.images = n;
    for (const auto& entry : report.per_image) {
        if (entry.error) ++report.dataset.failed;
        if (entry.counts) all_counts.push_back(*entry.counts);
        if (entry.dar) {
            dar_sum += *entry.dar;
            ++dar_n;
        }
    }
    if (config.metrics.needs_confusion() && !all_counts.empty()) {
        const IoUReport iou =
            aggregate_iou(all_counts, config.iou_aggregation, config.positive_class);
        if (config.metrics.miou) report.dataset.miou = iou.mean_iou;
        if (config.metrics.class_iou) report.dataset.cgl_iou = iou.cgl_iou;
        report.dataset.iou_images = all_counts.size();
    }
    if (config.metrics.dar && dar_n > 0) {
        report.dataset.dar = dar_sum / static_cast<double>(dar_n);
        report.dataset.dar_images = dar_n;
    }
    return report;
}

inline const char* to_string(BorderMode mode) {
    return mode == BorderMode::zero_pad ? "zero" : "replicate";
}
inline const char* to_string(EmptyGtPolicy policy) {
    return policy == EmptyGtPolicy::skip ? "skip" : "binary";
}
inline const char* to_string(IouAggregation mode) {
    return mode == IouAggregation::per_image_mean ? "per-image" : "global";
}

/// Deterministic JSON rendering. The provenance block echoes every
/// score-affecting parameter; workers and output destination are omitted so
/// identical inputs produce byte-identical reports at any worker count.
inline nlohmann::ordered_json report_to_json(const EvalReport& report) {
    using json = nlohmann::ordered_json;
    const EvalConfig& c = report.config;

    json remap;
    if (c.remap) {
        remap = json::object();
        for (auto [raw, cls] : c.remap->pairs()) remap[std::to_string(raw)] = cls;
    } else if (c.num_classes() == 2) {
        remap = "binary-default";
    } else {
        remap = "none";
    }

    json provenance = {
        {"toolkit_version", report.toolkit_version},
        {"config",
         {{"pred_dir", c.pred_dir.string()},
          {"gt_dir", c.gt_dir.string()},
          {"metrics", c.metrics.names()},
          {"positive_class", c.positive_class},
          {"num_classes", c.num_classes()},
          {"sigma", c.dar.sigma},
          {"th", c.dar.th},
          {"kernel_radius", report.kernel_radius},
          {"border", to_string(c.dar.border)},
          {"clamp_dar", c.dar.clamp_negative},
          {"empty_gt", to_string(c.dar.empty_gt)},
          {"iou_agg", to_string(c.iou_aggregation)},
          {"remap", remap}}},
        {"erosion_subset_guaranteed", report.erosion_subset_guaranteed},
    };

    json per_image = json::array();
    for (const auto& entry : report.per_image) {
        json counts(nullptr);
        if (entry.counts)
            counts = {{"tp", entry.counts->tp}, {"fp", entry.counts->fp},
                      {"fn", entry.counts->fn}};
        json row = {
            {"id", entry.id},
            {"resolution", entry.resolution},
            {"miou", entry.miou ? json(*entry.miou) : json(nullptr)},
            {"cgl_iou", entry.cgl_iou ? json(*entry.cgl_iou) : json(nullptr)},
            {"dar", entry.dar ? json(*entry.dar) : json(nullptr)},
            {"counts", std::move(counts)},
            {"flags", entry.flags},
            {"error", entry.error ? json(*entry.error) : json(nullptr)},
        };
        per_image.push_back(std::move(row));
    }

    const DatasetAggregates& d = report.dataset;
    json dataset = {
        {"images", d.images},
        {"failed", d.failed},
        {"miou", d.miou ? json(*d.miou) : json(nullptr)},
        {"cgl_iou", d.cgl_iou ? json(*d.cgl_iou) : json(nullptr)},
        {"dar", d.dar ? json(*d.dar) : json(nullptr)},
        {"iou_images", d.iou_images},
        {"dar_images", d.dar_images},
    };

    return json{{"provenance", std::move(provenance)},
                {"per_image", std::move(per_image)},
                {"dataset", std::move(dataset)},
                {"unmatched", {{"pred", report.unmatched_pred}, {"gt", report.unmatched_gt}}}};
}

/// CSV: header, one row per image, then a "dataset" aggregate row. The column
/// order miou / cgl_iou / dar follows the usual reporting convention.
inline std::string report_to_csv(const EvalReport& report) {
    std::string out = "image_id,miou,cgl_iou,dar,flags\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? detail::format_double(*v) : std::string();
    };
    for (const auto& entry : report.per_image) {
        std::string flags;
        for (const auto& f : entry.flags) flags += (flags.empty() ? "" : ";") + f;
        if (!entry.resolution.empty())
            flags += (flags.empty() ? "res=" : ";res=") + entry.resolution;
        out += entry.id + "," + cell(entry.miou) + "," + cell(entry.cgl_iou) + "," +
               cell(entry.dar) + "," + flags + "\n";
    }
    out += "dataset," + cell(report.dataset.miou) + "," + cell(report.dataset.cgl_iou) + "," +
           cell(report.dataset.dar) + ",images=" + std::to_string(report.dataset.images) +
           ";failed=" + std::to_string(report.dataset.failed) + "\n";
    return out;
}

inline void write_report(const EvalReport& report, const std::filesystem::path& path,
                         ReportFormat format) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    if (format == ReportFormat::json)
        out << report_to_json(report).dump(2) << "\n";
    else
        out << report_to_csv(report);
    if (!out) throw IoError("write failure on " + path.string());
}

} // namespace cgleval
