#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "temp_dir.hpp"

using goxn::cli::run_cli;
using goxn::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        files[fs::relative(e.path(), root).generic_string()] = {std::istreambuf_iterator<char>(in), {}};
    }
    return files;
}

}  // namespace

TEST(Cli, NoArgsIsUsageError) {
    const auto r = cli({});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({"run"}).code, 2);
    EXPECT_EQ(cli({"compare", "x"}).code, 2);
}

TEST(Cli, HelpListsFlags) {
    const std::map<std::vector<std::string>, std::vector<std::string>> expected = {
        {{"run", "--help"}, {"--output", "--env", "--seed", "--command", "--prometheus"}},
        {{"suite", "--help"}, {"--output", "--sue", "--duration", "--step", "--factors", "--service-map"}},
        {{"process", "--help"}, {"--factors", "--service-map"}},
        {{"compare", "--help"}, {"--baseline", "--output"}},
        {{"sim", "serve", "--help"}, {"--topology", "--bind", "--scrape", "--sampling", "--mesh", "--seed"}},
    };
    for (const auto& [args, flags] : expected) {
        const auto r = cli(args);
        EXPECT_EQ(r.code, 0) << args[0];
        for (const auto& f : flags) EXPECT_NE(r.out.find(f), std::string::npos) << args[0] << " " << f;
    }
}

TEST(Cli, ProcessWithoutReportNamesFile) {
    TempDir tmp;
    const auto r = cli({"process", tmp.str()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("report.yaml"), std::string::npos) << r.err;
}

TEST(Cli, ExternalNeedsCommand) {
    TempDir tmp;
    EXPECT_EQ(cli({"run", std::string(GOXN_SOURCE_DIR) + "/config/tracing-high.yaml", "--env", "external",
                   "--output", tmp.str()})
                  .code,
              2);
}

TEST(Cli, RunProcessCompare) {
    TempDir tmp;
    const std::string spec = std::string(GOXN_SOURCE_DIR) + "/config/tracing-high.yaml";
    auto r = cli({"run", spec, "--output", tmp.str()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("tracing-high: complete"), std::string::npos) << r.out;
    r = cli({"process", tmp.str("tracing-high"), "--factors", std::string(GOXN_SOURCE_DIR) + "/config/factors.yaml"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("otel-collector"), std::string::npos);
    r = cli({"compare", tmp.str("tracing-high"), "--baseline", "tracing-high", "--output", tmp.str("cmp")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(tmp.path() / "cmp" / "comparison.csv"));
    EXPECT_TRUE(fs::exists(tmp.path() / "cmp" / "plot_data.csv"));
    EXPECT_EQ(cli({"compare", tmp.str("tracing-high"), "--baseline", "nope", "--output", tmp.str("cmp")}).code, 1);
}

TEST(Cli, SuiteCatalogIsDeterministic) {
    TempDir a, b;
    const auto ra = cli({"suite", "catalog", "--env", "sim", "--seed", "7", "--output", a.str()});
    ASSERT_EQ(ra.code, 0) << ra.err;
    const auto rb = cli({"suite", "catalog", "--env", "sim", "--seed", "7", "--output", b.str()});
    ASSERT_EQ(rb.code, 0) << rb.err;
    const auto ta = tree(a.path());
    const auto tb = tree(b.path());
    EXPECT_EQ(ta, tb);
    EXPECT_TRUE(ta.count("suite.yaml"));
    EXPECT_TRUE(ta.count("comparison.csv"));
    EXPECT_TRUE(ta.count("service-mesh/energy_totals_service-mesh.csv"));
}
