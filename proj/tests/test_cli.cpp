#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "cgleval/cli.hpp"

#include "helpers.hpp"

using namespace cgleval;

namespace {

struct CliRun {
    int exit_code;
    std::string out;
    std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cgleval::cli::run(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("usage errors print help and exit 1") {
    const CliRun bare = run_cli({});
    CHECK(bare.exit_code == 1);
    CHECK(bare.err.find("eval") != std::string::npos);

    const CliRun missing = run_cli({"eval"});
    CHECK(missing.exit_code == 1);

    const CliRun help = run_cli({"--help"});
    CHECK(help.exit_code == 0);
    CHECK(help.out.find("kernel-dump") != std::string::npos);

    const CliRun badflag = run_cli({"kernel-dump", "--no-such-flag"});
    CHECK(badflag.exit_code == 1);
}

TEST_CASE("eval subcommand writes a report and returns 0") {
    helpers::TempDir dir("cli-eval");
    const auto pred = dir.path() / "pred";
    const auto gt = dir.path() / "gt";
    std::filesystem::create_directories(pred);
    std::filesystem::create_directories(gt);
    const BinaryMask mask = helpers::block_mask(32, 32, 4, 4, 20, 20);
    save_mask(mask, pred / "a.png");
    save_mask(mask, gt / "a.png");
    const auto report_path = dir.path() / "r.json";

    const CliRun run = run_cli({"eval", "--pred-dir", pred.string(), "--gt-dir", gt.string(),
                            "--metrics", "miou,dar", "--out", report_path.string()});
    CHECK(run.exit_code == 0);
    REQUIRE(std::filesystem::exists(report_path));
    const auto parsed = nlohmann::ordered_json::parse(slurp(report_path));
    CHECK(parsed.at("dataset").at("miou") == 1.0);
    CHECK(parsed.at("dataset").at("dar") == 1.0);
    CHECK(parsed.at("dataset").at("cgl_iou").is_null()); // class-iou not selected

    SUBCASE("missing pair directory is a config error") {
        const CliRun broken = run_cli({"eval", "--pred-dir", (dir.path() / "nope").string(),
                                   "--gt-dir", gt.string(), "--out", report_path.string()});
        CHECK(broken.exit_code == 1);
        CHECK(broken.err.find("error") != std::string::npos);
    }

    SUBCASE("per-image failures exit 2 but still write the report") {
        std::ofstream(pred / "broken.png") << "junk";
        save_mask(mask, gt / "broken.png");
        const auto path2 = dir.path() / "r2.csv";
        const CliRun partial =
            run_cli({"eval", "--pred-dir", pred.string(), "--gt-dir", gt.string(), "--out",
                     path2.string(), "--format", "csv"});
        CHECK(partial.exit_code == 2);
        CHECK(std::filesystem::exists(path2));
        CHECK(slurp(path2).find("load-error") != std::string::npos);
    }

    SUBCASE("config file supplies defaults, CLI flags win") {
        const auto cfg = dir.path() / "run.cfg";
        std::ofstream(cfg) << "pred-dir=" << pred.string() << "\n"
                           << "gt-dir=" << gt.string() << "\n"
                           << "sigma=5.0\n"
                           << "out=" << (dir.path() / "cfg.json").string() << "\n";
        const CliRun from_cfg = run_cli({"eval", "--config", cfg.string()});
        CHECK(from_cfg.exit_code == 0);
        auto r1 = nlohmann::ordered_json::parse(slurp(dir.path() / "cfg.json"));
        CHECK(r1.at("provenance").at("config").at("sigma") == 5.0);
        CHECK(r1.at("provenance").at("config").at("kernel_radius") == 15);

        const CliRun overridden = run_cli({"eval", "--config", cfg.string(), "--sigma", "2.0",
                                       "--out", (dir.path() / "cli.json").string()});
        CHECK(overridden.exit_code == 0);
        auto r2 = nlohmann::ordered_json::parse(slurp(dir.path() / "cli.json"));
        CHECK(r2.at("provenance").at("config").at("sigma") == 2.0);
        CHECK(r2.at("provenance").at("config").at("kernel_radius") == 6);
    }
}

TEST_CASE("dar-debug dumps the seven intermediates for one pair") {
    helpers::TempDir dir("cli-debug");
    const BinaryMask gt = helpers::block_mask(64, 64, 12, 12, 40, 40);
    save_mask(BinaryMask(64, 64, std::uint8_t{0}), dir.path() / "pred.png");
    save_mask(gt, dir.path() / "gt.png");
    const auto dump = dir.path() / "dump";

    const CliRun run = run_cli({"dar-debug", "--pred", (dir.path() / "pred.png").string(), "--gt",
                            (dir.path() / "gt.png").string(), "--dump-dir", dump.string()});
    CHECK(run.exit_code == 0);
    int files = 0;
    for (const char* name : {"fp.png", "fn.png", "fp_blur.png", "fn_blur.png", "fp_erode.png",
                             "fn_erode.png", "y_prime.png"}) {
        CHECK(std::filesystem::exists(dump / name));
        ++files;
    }
    CHECK(files == 7);
    CHECK(run.out.find("surviving_fn=484") != std::string::npos);
}

TEST_CASE("kernel-dump prints the full kernel for audit") {
    const CliRun run = run_cli({"kernel-dump"});
    CHECK(run.exit_code == 0);
    CHECK(run.out.find("sigma=3 radius=9 side=19") != std::string::npos);
    const auto sum_pos = run.out.find("sum=");
    REQUIRE(sum_pos != std::string::npos);
    const double printed_sum = std::stod(run.out.substr(sum_pos + 4));
    CHECK(std::abs(printed_sum - 1.0) <= 1e-12);
    // 19 weight rows + 2 header lines
    int lines = 0;
    for (char c : run.out)
        if (c == '\n') ++lines;
    CHECK(lines == 21);

    const CliRun custom = run_cli({"kernel-dump", "--sigma", "1.0"});
    CHECK(custom.out.find("radius=3 side=7") != std::string::npos);
}
