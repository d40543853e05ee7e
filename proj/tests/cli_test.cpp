#include "stratcomm/cli.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace stratcomm;
using nlohmann::json;

namespace {

struct CliRun {
    int exit_code = 0;
    std::string out;
    std::string err;
};

CliRun run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliRun result;
    result.exit_code = run_cli(args, out, err);
    result.out = out.str();
    result.err = err.str();
    return result;
}

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = std::string(::testing::TempDir()) + name;
    std::ofstream f(path);
    f << content;
    return path;
}

}  // namespace

TEST(CliEquilibrium, GoldenFixtureJson) {
    const CliRun r = run({"equilibrium", "--r", "1", "--rho", "0"});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_NEAR(j["closed_form"]["alpha"].get<double>(), 0.6180340, 1e-6);
    EXPECT_NEAR(j["numeric"]["alpha"].get<double>(), 0.6180340, 1e-6);
    EXPECT_TRUE(j["consistent"].get<bool>());
    EXPECT_EQ(j["version"], kVersion);
    EXPECT_TRUE(j.contains("config"));
}

TEST(CliEquilibrium, DegenerateModelExitsThree) {
    const CliRun r = run({"equilibrium", "--r", "1", "--rho", "1"});
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_NE(r.err.find("r_theta > rho_xtheta^2"), std::string::npos);
}

TEST(CliEquilibrium, UncorrelatedSiMatchesPlainAlpha) {
    const CliRun plain = run({"equilibrium", "--r", "1", "--rho", "0.2"});
    const CliRun si = run({"equilibrium", "--r", "1", "--rho", "0.2", "--si", "--rho-xw", "0",
                           "--rho-thetaw", "0", "--r-w", "1"});
    ASSERT_EQ(plain.exit_code, 0);
    ASSERT_EQ(si.exit_code, 0) << si.err;
    const double a0 = json::parse(plain.out)["numeric"]["alpha"].get<double>();
    const double a1 = json::parse(si.out)["numeric"]["alpha"].get<double>();
    EXPECT_NEAR(a0, a1, 1e-6);
}

TEST(CliRdCurve, HeaderIsBitExactAndZeroRateRowIsAnalytic) {
    const CliRun r = run({"rd-curve", "--r", "1", "--rho", "0.3", "--sigma-x2", "2",
                          "--rates", "0,0.5,1"});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(header, "R_bits,beta,sigma_s2,D_E,D_D,D_E_paper,D_D_paper,I_YW_bits");
    std::string row0;
    std::getline(lines, row0);
    std::istringstream cells(row0);
    std::string cell;
    std::vector<double> v;
    while (std::getline(cells, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
    ASSERT_EQ(v.size(), 8u);
    EXPECT_EQ(v[0], 0.0);
    EXPECT_NEAR(v[4], 2.0, 1e-12);                    // D_D = sigma_x2
    EXPECT_NEAR(v[3], 2.0 * (1.0 + 0.6 + 1.0), 1e-12);  // D_E = sigma_x2(1+2rho+r)
    EXPECT_EQ(v[7], 0.0);
}

TEST(CliRdCurve, LargeRateApproachesEquilibriumColumn) {
    const CliRun r = run({"rd-curve", "--r", "1", "--rho", "0", "--rates", "12"});
    ASSERT_EQ(r.exit_code, 0);
    std::istringstream lines(r.out);
    std::string header, row;
    std::getline(lines, header);
    std::getline(lines, row);
    std::istringstream cells(row);
    std::string cell;
    std::vector<double> v;
    while (std::getline(cells, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
    EXPECT_NEAR(v[4], 0.2763932, 2e-7);
    EXPECT_NEAR(v[3], 0.3819660, 2e-7);
}

TEST(CliRdCurve, SiCurveBetaVariesOnlyThroughSigma) {
    const CliRun r = run({"rd-curve", "--si", "--r", "1", "--rho", "0.2", "--rho-xw", "0.4",
                          "--rho-thetaw", "0.3", "--r-w", "1", "--rates", "0.5,2"});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    std::istringstream lines(r.out);
    std::string header, row1, row2;
    std::getline(lines, header);
    std::getline(lines, row1);
    std::getline(lines, row2);
    auto parse = [](const std::string& row) {
        std::istringstream cells(row);
        std::string cell;
        std::vector<double> v;
        while (std::getline(cells, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
        return v;
    };
    const auto a = parse(row1), b = parse(row2);
    EXPECT_NEAR(a[1], 0.58989094, 1e-6);
    EXPECT_NEAR(b[1], 0.58989094, 1e-6);
    EXPECT_GT(a[2], b[2]);  // sigma_s2 shrinks with rate
    EXPECT_GT(a[7], 0.0);   // I(Y;W) > 0 for these parameters
}

TEST(CliAudit, MatchPassesOnConstructedSetAndFailsPerturbed) {
    const CliRun built = run({"match-construct", "--r", "1", "--rho", "0", "--rho-thetaw", "0.5",
                              "--r-w", "1", "--p-t", "1", "--sigma-n2", "1"});
    ASSERT_EQ(built.exit_code, 0) << built.err;
    const json j = json::parse(built.out);
    const double rho_xw = j["model"]["rho_xw"].get<double>();
    EXPECT_NEAR(rho_xw, -0.309017, 1e-6);

    const CliRun pass = run({"audit", "match", "--r", "1", "--rho", "0", "--rho-xw",
                             cliutil::fmt17(rho_xw), "--rho-thetaw", "0.5", "--r-w", "1",
                             "--p-t", "1", "--sigma-n2", "1"});
    EXPECT_EQ(pass.exit_code, 0) << pass.err;
    EXPECT_TRUE(json::parse(pass.out)["holds"].get<bool>());

    const CliRun fail = run({"audit", "match", "--r", "1", "--rho", "0", "--rho-xw",
                             cliutil::fmt17(rho_xw + 0.05), "--rho-thetaw", "0.5", "--r-w", "1",
                             "--p-t", "1", "--sigma-n2", "1"});
    EXPECT_EQ(fail.exit_code, 4);
    const json fj = json::parse(fail.out);
    EXPECT_FALSE(fj["holds"].get<bool>());
    EXPECT_NEAR(fj["residual"].get<double>(), 0.05, 0.02);
}

TEST(CliAudit, DeviationNegativeControlExitsFour) {
    const CliRun r = run({"audit", "deviation", "--r", "1", "--rho", "0", "--alpha", "0",
                          "--offsets", "0,0.6", "--n", "200000"});
    EXPECT_EQ(r.exit_code, 4);
    const json j = json::parse(r.out);
    EXPECT_FALSE(j["pass"].get<bool>());
}

TEST(CliAudit, TxSiAndRateLossAndFormulasRun) {
    const std::vector<std::string> model{"--r", "1", "--rho", "0.2", "--rho-xw", "0.4",
                                         "--rho-thetaw", "0.3", "--r-w", "1"};
    std::vector<std::string> tx{"audit", "tx-si"};
    tx.insert(tx.end(), model.begin(), model.end());
    const CliRun t = run(tx);
    EXPECT_EQ(t.exit_code, 0) << t.err;
    EXPECT_TRUE(json::parse(t.out)["pass"].get<bool>());

    std::vector<std::string> rl{"audit", "rate-loss", "--rate", "1.5"};
    rl.insert(rl.end(), model.begin(), model.end());
    const CliRun l = run(rl);
    EXPECT_EQ(l.exit_code, 0) << l.err;

    const CliRun f = run({"audit", "formulas", "--rates", "0.5,2,8"});
    EXPECT_EQ(f.exit_code, 0) << f.err;
    const json fj = json::parse(f.out);
    EXPECT_TRUE(fj["discrepancy_flagged"].get<bool>());
    EXPECT_NE(f.err.find("oracle"), std::string::npos);
}

TEST(CliSimulate, Theorem1FixtureAndDeterminism) {
    const std::vector<std::string> cmd{"simulate", "--strategies", "theorem1", "--r", "1",
                                       "--rho", "0", "--n", "200000", "--seed", "0"};
    const CliRun a = run(cmd);
    ASSERT_EQ(a.exit_code, 0) << a.err;
    const json j = json::parse(a.out);
    EXPECT_NEAR(j["d_e_hat"].get<double>(), 0.3819660, 5.0 * j["d_e_stderr"].get<double>());
    const CliRun b = run(cmd);
    EXPECT_EQ(a.out, b.out);
}

TEST(CliSimulate, EnvSeedOverridesDefault) {
    ::setenv("STRATCOMM_SEED", "777", 1);
    const CliRun env_run = run({"simulate", "--strategies", "theorem1", "--r", "1", "--rho", "0",
                                "--n", "1000"});
    ::unsetenv("STRATCOMM_SEED");
    ASSERT_EQ(env_run.exit_code, 0) << env_run.err;
    EXPECT_EQ(json::parse(env_run.out)["seed"].get<std::uint64_t>(), 777u);
}

TEST(CliSimulate, CustomStrategiesAndChannelMisuse) {
    const CliRun custom = run({"simulate", "--strategies", "custom", "--r", "1", "--rho", "0",
                               "--enc-alpha", "0.6", "--dec-y", "0.7", "--n", "5000"});
    EXPECT_EQ(custom.exit_code, 0) << custom.err;
    const CliRun bad = run({"simulate", "--strategies", "theorem1", "--r", "1", "--rho", "0",
                            "--p-t", "1", "--sigma-n2", "1", "--n", "1000"});
    EXPECT_EQ(bad.exit_code, 2);
}

TEST(CliConfig, FileDrivesCommandAndFlagsOverride) {
    const std::string path = write_temp(
        "cfg.json",
        R"({"model": {"sigma_x2": 1.0, "rho_xtheta": 0.0, "r_theta": 1.0}, "seed": 3, "n": 2000})");
    const CliRun r = run({"simulate", "--strategies", "theorem1", "--config", path});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["seed"].get<std::uint64_t>(), 3u);
    const CliRun o = run({"simulate", "--strategies", "theorem1", "--config", path, "--seed", "9"});
    EXPECT_EQ(json::parse(o.out)["seed"].get<std::uint64_t>(), 9u);
}

TEST(CliConfig, UnknownKeysRejected) {
    const std::string path = write_temp("bad.json", R"({"modle": {}})");
    const CliRun r = run({"equilibrium", "--r", "1", "--config", path});
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("unknown key"), std::string::npos);

    const std::string path2 =
        write_temp("bad2.json", R"({"model": {"r_theta": 1.0, "bogus": 2}})");
    const CliRun r2 = run({"equilibrium", "--config", path2});
    EXPECT_EQ(r2.exit_code, 2);
}

TEST(CliConfig, OutWritesFile) {
    const std::string path = std::string(::testing::TempDir()) + "report.json";
    std::remove(path.c_str());
    const CliRun r = run({"equilibrium", "--r", "1", "--rho", "0", "--out", path});
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_TRUE(r.out.empty());
    std::ifstream f(path);
    ASSERT_TRUE(f.good());
    json j;
    f >> j;
    EXPECT_TRUE(j["consistent"].get<bool>());
}

TEST(CliParsing, BadArgumentsExitTwoAndHelpExitsZero) {
    EXPECT_EQ(run({"equilibrium", "--no-such-flag"}).exit_code, 2);
    EXPECT_EQ(run({"audit", "bogus-kind"}).exit_code, 2);
    EXPECT_EQ(run({}).exit_code, 2);
    const CliRun help = run({"--help"});
    EXPECT_EQ(help.exit_code, 0);
    EXPECT_NE(help.out.find("equilibrium"), std::string::npos);
}

TEST(CliNats, MatchReportCarriesNatsCompanions) {
    const CliRun r = run({"audit", "match", "--r", "1", "--rho", "0", "--rho-xw", "0",
                          "--rho-thetaw", "0", "--r-w", "1", "--p-t", "3", "--sigma-n2", "1",
                          "--nats"});
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json j = json::parse(r.out);
    EXPECT_NEAR(j["capacity_bits"].get<double>(), 1.0, 1e-12);
    EXPECT_NEAR(j["capacity_nats"].get<double>(), std::log(2.0), 1e-12);
}
