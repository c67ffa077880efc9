#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

namespace {

struct Run {
    int code;
    std::string output;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(FBMLT_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) {
        return {-1, ""};
    }
    std::string out;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe)) {
        out += buf.data();
    }
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string temp(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("fbmlt_cli_" + name)).string();
}

void write(const std::string& file, const std::string& text) {
    std::ofstream(file) << text;
}

}  // namespace

TEST(Cli, UnknownFlagIsUsageError) {
    EXPECT_EQ(run("--bogus").code, 1);
    EXPECT_EQ(run("simulate --hurst 0.3 --nonsense 1").code, 1);
}

TEST(Cli, ExperimentHappyPath) {
    const auto cfg = temp("lln.json");
    const auto out = temp("lln_report.json");
    write(cfg, R"({"kind":"lln","hurst":0.3,"n_values":[16,32,64],"n_max":256,"replications":8})");
    const auto r = run("--out " + out + " experiment --config " + cfg);
    EXPECT_EQ(r.code, 0) << r.output;
    std::ifstream is(out);
    const auto j = nlohmann::json::parse(is);
    EXPECT_EQ(j.at("rows").size(), 3u);
    std::filesystem::remove(cfg);
    std::filesystem::remove(out);
}

TEST(Cli, BadNValuesNamesOffender) {
    const auto cfg = temp("bad.json");
    write(cfg, R"({"kind":"lln","hurst":0.3,"n_values":[16,48],"n_max":256,"replications":8})");
    const auto r = run("experiment --config " + cfg);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("n = 48"), std::string::npos) << r.output;
    std::filesystem::remove(cfg);
}

TEST(Cli, OraclePairAndFirst) {
    auto r = run("oracle --kind pair --ell 1 --matrix 1 0.5 1");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NEAR(nlohmann::json::parse(r.output).at("value").get<double>(), -4.83679830462458, 1e-10);
    r = run("oracle --kind pair --ell 1 --matrix 1 2 1");
    EXPECT_EQ(r.code, 1);
    r = run("oracle --kind first --ell 0 --hurst 0.3 --eps 0.01 --lambda 0.5");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NEAR(nlohmann::json::parse(r.output).at("value").get<double>(), 0.40607409769189747, 1e-9);
}

TEST(Cli, OracleDivergence) {
    const auto r = run("oracle --kind divergence --ell 1 --hurst 0.4");
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(nlohmann::json::parse(r.output).at("verdict"), "diverging");
}

TEST(Cli, SimulateThenEstimate) {
    const auto path = temp("path.csv");
    auto r = run("--seed 3 --out " + path + " --format csv simulate --hurst 0.3 --n 256");
    ASSERT_EQ(r.code, 0) << r.output;
    for (const char* route : {"discrete", "mollified", "fourier", "occupation"}) {
        const std::string extra = std::string(route) == "occupation" ? " --lo -0.5 --hi 0.5" : "";
        r = run(std::string("estimate --path ") + path + " --route " + route + " --ell 0 --lambda 0 0.1" + extra);
        EXPECT_EQ(r.code, 0) << route << ": " << r.output;
    }
    r = run("estimate --path " + path + " --route mollified --t 5");
    EXPECT_EQ(r.code, 1);
    std::filesystem::remove(path);
}

TEST(Cli, MomentsAndAudit) {
    auto r = run("moments --kernel bump affine_gaussian");
    EXPECT_EQ(r.code, 0) << r.output;
    r = run("moments --kernel nope");
    EXPECT_EQ(r.code, 1);
    r = run("audit --samples 500");
    EXPECT_EQ(r.code, 0) << r.output;
}
