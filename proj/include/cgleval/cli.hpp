#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgleval/eval.hpp"
#include "cgleval/version.hpp"

namespace cgleval::cli {

namespace detail {

struct DarFlags {
    double sigma = 3.0;
    double th = 0.999;
    int kernel_radius = 0; // 0: ceil(3*sigma)
    std::string border = "zero";
    bool clamp = false;
    std::string empty_gt = "skip";

    void attach(CLI::App* cmd) {
        cmd->add_option("--sigma", sigma, "Gaussian std-dev in pixels")
            ->capture_default_str();
        cmd->add_option("--th", th, "survivor threshold in (0,1)")->capture_default_str();
        cmd->add_option("--kernel-radius", kernel_radius,
                        "kernel radius in pixels; 0 selects ceil(3*sigma)")
            ->capture_default_str();
        cmd->add_option("--border", border, "out-of-bounds handling")
            ->transform(CLI::IsMember({"zero", "replicate"}))
            ->capture_default_str();
        cmd->add_flag("--clamp-dar", clamp, "clamp negative DaR scores to 0");
        cmd->add_option("--empty-gt", empty_gt,
                        "empty ground truth: skip the image or score it 1/0")
            ->transform(CLI::IsMember({"skip", "binary"}))
            ->capture_default_str();
    }

    DarParams params() const {
        DarParams p;
        p.sigma = sigma;
        p.th = th;
        if (kernel_radius > 0) p.kernel_radius = kernel_radius;
        p.border = border == "zero" ? BorderMode::zero_pad : BorderMode::replicate;
        p.clamp_negative = clamp;
        p.empty_gt = empty_gt == "skip" ? EmptyGtPolicy::skip : EmptyGtPolicy::binary;
        return p;
    }
};

inline void warn_if_unguaranteed(const Kernel2D& kernel, double th, std::ostream& err) {
    if (!erosion_subset_guaranteed(kernel, th))
        err << "warning: kernel center weight " << kernel.center() << " is <= 1 - Th; "
            << "blur-threshold survivors are not guaranteed to stay inside the "
            << "disagreement masks\n";
}

// Flat key=value config lines; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>>
parse_flat_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("config file not found: " + path.string());
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto from = s.find_first_not_of(" \t\r");
        const auto to = s.find_last_not_of(" \t\r");
        return from == std::string::npos ? std::string() : s.substr(from, to - from + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidParameter("config file " + path.string() + ": line " +
                                   std::to_string(lineno) + " is not key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw InvalidParameter("config file " + path.string() + ": line " +
                                   std::to_string(lineno) + " has an empty key");
        entries.emplace_back(key, value);
    }
    return entries;
}

// Applies a flat config file to the eval subcommand by appending "--key=value"
// for every key absent from the command line, so explicit flags always win.
inline void inject_config_args(std::vector<std::string>& args) {
    if (args.empty() || args.front() != "eval") return;
    std::string config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            config_path = args[i].substr(9);
    }
    if (config_path.empty()) return;

    static const std::vector<std::string> known = {
        "pred-dir", "gt-dir",   "metrics", "positive-class", "sigma",   "th",
        "kernel-radius", "border", "clamp-dar", "empty-gt",  "iou-agg", "remap",
        "workers",  "out",      "format",  "dump-dir"};
    auto has_flag = [&args](const std::string& name) {
        const std::string plain = "--" + name;
        const std::string prefixed = plain + "=";
        for (const auto& a : args)
            if (a == plain || a.rfind(prefixed, 0) == 0) return true;
        return false;
    };
    for (const auto& [key, value] : parse_flat_config(config_path)) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw InvalidParameter("config file: unknown key '" + key + "'");
        if (!has_flag(key)) args.push_back("--" + key + "=" + value);
    }
}

} // namespace detail

/// Entry point behind the cgleval binary. Returns the process exit code:
/// 0 success, 1 usage/config error, 2 when any per-image evaluation failed
/// (the report is still written).
inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"segmentation mask evaluation: DaR and IoU metrics over "
                 "prediction/ground-truth directories",
                 "cgleval"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "batch-evaluate a directory of mask pairs");
    std::string config_path;
    eval_cmd->add_option("--config", config_path,
                         "flat key=value file mirroring the flag names (CLI flags win)");
    std::string pred_dir, gt_dir, out_path;
    std::vector<std::string> metric_names{"miou", "class-iou", "dar"};
    int positive_class = 1;
    int workers = 1;
    std::string iou_agg = "per-image", format = "json", remap_path, dump_dir;
    detail::DarFlags dar_flags;
    eval_cmd->add_option("--pred-dir", pred_dir, "directory of predicted masks")->required();
    eval_cmd->add_option("--gt-dir", gt_dir, "directory of ground-truth masks")->required();
    eval_cmd->add_option("--metrics", metric_names, "comma-separated subset of miou,class-iou,dar")
        ->delimiter(',')
        ->capture_default_str();
    eval_cmd->add_option("--positive-class", positive_class, "class id scored by class-iou/dar")
        ->capture_default_str();
    dar_flags.attach(eval_cmd);
    eval_cmd->add_option("--iou-agg", iou_agg, "dataset IoU aggregation")
        ->transform(CLI::IsMember({"per-image", "global"}))
        ->capture_default_str();
    eval_cmd->add_option("--remap", remap_path, "pixel-value remap table file");
    eval_cmd->add_option("--workers", workers, "parallel workers")->capture_default_str();
    eval_cmd->add_option("--out", out_path, "report destination")->required();
    eval_cmd->add_option("--format", format, "report format")
        ->transform(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    eval_cmd->add_option("--dump-dir", dump_dir,
                         "write per-image DaR intermediates below this directory");

    // dar-debug
    auto* debug_cmd =
        app.add_subcommand("dar-debug", "run the DaR pipeline on one pair and dump intermediates");
    std::string dbg_pred, dbg_gt, dbg_dump, dbg_remap;
    int dbg_positive = 1;
    detail::DarFlags dbg_flags;
    debug_cmd->add_option("--pred", dbg_pred, "predicted mask image")->required();
    debug_cmd->add_option("--gt", dbg_gt, "ground-truth mask image")->required();
    debug_cmd->add_option("--dump-dir", dbg_dump, "directory for the seven intermediates")
        ->required();
    debug_cmd->add_option("--positive-class", dbg_positive, "class id treated as foreground")
        ->capture_default_str();
    debug_cmd->add_option("--remap", dbg_remap, "pixel-value remap table file");
    dbg_flags.attach(debug_cmd);

    // kernel-dump
    auto* kernel_cmd = app.add_subcommand("kernel-dump", "print the active Gaussian kernel");
    double kd_sigma = 3.0;
    int kd_radius = 0;
    kernel_cmd->add_option("--sigma", kd_sigma, "Gaussian std-dev in pixels")
        ->capture_default_str();
    kernel_cmd->add_option("--kernel-radius", kd_radius,
                           "kernel radius in pixels; 0 selects ceil(3*sigma)")
        ->capture_default_str();

    try {
        detail::inject_config_args(args);
        // CLI11's vector overload consumes the arguments back to front
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (eval_cmd->parsed()) {
            EvalConfig config;
            config.pred_dir = pred_dir;
            config.gt_dir = gt_dir;
            config.metrics = MetricSet::parse(metric_names);
            config.positive_class = positive_class;
            config.dar = dar_flags.params();
            config.iou_aggregation = iou_agg == "per-image" ? IouAggregation::per_image_mean
                                                            : IouAggregation::global_counts;
            if (!remap_path.empty()) config.remap = ClassRemap::from_file(remap_path);
            config.workers = workers;
            if (!dump_dir.empty()) config.debug_dump_dir = dump_dir;
            config.out = out_path;
            config.format = format == "json" ? ReportFormat::json : ReportFormat::csv;

            detail::warn_if_unguaranteed(
                gaussian_kernel(config.dar.sigma, config.dar.resolved_radius()), config.dar.th,
                err);
            const EvalReport report = run_eval(config);
            write_report(report, config.out, config.format);
            out << "evaluated " << report.dataset.images << " pairs ("
                << report.dataset.failed << " failed); report written to " << out_path << "\n";
            return report.any_failures() ? 2 : 0;
        }

        if (debug_cmd->parsed()) {
            const DarParams params = dbg_flags.params();
            const Kernel2D kernel = gaussian_kernel(params.sigma, params.resolved_radius());
            detail::warn_if_unguaranteed(kernel, params.th, err);
            std::optional<ClassRemap> remap;
            if (!dbg_remap.empty())
                remap = ClassRemap::from_file(dbg_remap);
            else if (dbg_positive <= 1)
                remap = ClassRemap::binary();
            const int k = std::max(2, dbg_positive + 1);
            const BinaryMask pred = binarize(load_label_map(dbg_pred, k, remap), dbg_positive);
            const BinaryMask gt = binarize(load_label_map(dbg_gt, k, remap), dbg_positive);
            const DarResult result = dar_components(pred, gt, params, kernel);
            const auto files = dar_debug_dump(result, dbg_dump);
            for (const auto& f : files) out << f.string() << "\n";
            if (result.score)
                out << "dar=" << *result.score << (result.clamped ? " (clamped)" : "") << "\n";
            else
                out << "dar=skipped (empty ground truth)\n";
            out << "surviving_fp=" << result.surviving_fp
                << " surviving_fn=" << result.surviving_fn << " gt_ones=" << result.gt_ones
                << "\n";
            return 0;
        }

        // kernel-dump
        const int radius =
            kd_radius > 0 ? kd_radius : static_cast<int>(std::ceil(3.0 * kd_sigma));
        const Kernel2D kernel = gaussian_kernel(kd_sigma, radius);
        out << "sigma=" << kd_sigma << " radius=" << kernel.radius << " side=" << kernel.side()
            << "\n";
        double sum = 0.0;
        for (double w : kernel.weights) sum += w;
        out << "sum=" << cgleval::detail::format_double(sum)
            << " center=" << cgleval::detail::format_double(kernel.center()) << "\n";
        for (int j = 0; j < kernel.side(); ++j) {
            for (int i = 0; i < kernel.side(); ++i) {
                out << cgleval::detail::format_double(
                    kernel.weights[static_cast<std::size_t>(j) * kernel.side() + i]);
                out << (i + 1 == kernel.side() ? "\n" : " ");
            }
        }
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}

inline int run_main(int argc, char** argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(std::move(args), out, err);
}

} // namespace cgleval::cli
