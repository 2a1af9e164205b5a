/*
 Copyright 2026 The cbfqp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cbfqp/report.hpp"
#include "commands.hpp"
#include "test_util.hpp"

namespace cbfqp {
namespace {

namespace fs = std::filesystem;

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "cbfqp");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("cbfqp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write(const std::string& name, const std::string& text) {
        auto p = dir_ / name;
        std::ofstream(p) << text;
        return p.string();
    }

    fs::path dir_;
};

TEST_F(CliTest, EveryCommandSucceedsOnBundledScenarios) {
    for (const char* name : {"fig1", "deadlock2d", "filter2d"}) {
        const std::string sc = testing::scenario_path(name);
        const std::string out = (dir_ / name).string();
        for (const char* cmd : {"equilibria", "simulate", "feasibility-scan", "kkt-audit"}) {
            auto r = run_cli({cmd, "--scenario", sc, "--out", out});
            EXPECT_EQ(r.code, 0) << name << " " << cmd << "\n" << r.err;
        }
        EXPECT_TRUE(fs::exists(fs::path(out) / (std::string(name) + "_report.json")));
        EXPECT_TRUE(fs::exists(fs::path(out) / (std::string(name) + "_traj_0.csv")));
        EXPECT_TRUE(fs::exists(fs::path(out) / (std::string(name) + "_feasibility.csv")));
        EXPECT_TRUE(fs::exists(fs::path(out) / (std::string(name) + "_kkt_audit.json")));
    }
}

TEST_F(CliTest, EquilibriaReportReloads) {
    auto r = run_cli({"equilibria", "--scenario", testing::scenario_path("deadlock2d"), "--out", dir_.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto report = report_from_json(read_text_file((dir_ / "deadlock2d_report.json").string()));
    ASSERT_EQ(report.boundary.size(), 1U);
    ASSERT_EQ(report.boundary[0].equilibria.size(), 1U);
    EXPECT_EQ(report.boundary[0].equilibria[0].stability->verdict, Verdict::Unstable);
    EXPECT_NE(r.out.find("unstable"), std::string::npos);
}

TEST_F(CliTest, ValidationErrorExitsOne) {
    std::string text = read_text_file(testing::scenario_path("deadlock2d"));
    text.replace(text.find("\"p\": 1"), 6, "\"p\": -1");
    auto path = write("bad.scenario", text);
    auto r = run_cli({"equilibria", "--scenario", path, "--out", dir_.string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("p must be positive"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingScenarioExitsThree) {
    auto r = run_cli({"simulate", "--scenario", (dir_ / "missing.scenario").string(), "--out", dir_.string()});
    EXPECT_EQ(r.code, 3);
}

TEST_F(CliTest, UsageErrorsExitOne) {
    EXPECT_EQ(run_cli({}).code, 1);
    EXPECT_EQ(run_cli({"simulate"}).code, 1);
    EXPECT_EQ(run_cli({"frobnicate", "--scenario", "x"}).code, 1);
    EXPECT_EQ(run_cli({"simulate", "--scenario", testing::scenario_path("deadlock2d"), "--x0-index", "7"}).code, 1);
    EXPECT_EQ(run_cli({"kkt-audit", "--scenario", testing::scenario_path("deadlock2d"), "--samples", "-3",
                       "--out", dir_.string()})
                  .code,
              1);
}

TEST_F(CliTest, EmptyInitialStatesIsNoOp) {
    std::string text = read_text_file(testing::scenario_path("deadlock2d"));
    text.replace(text.find("[[5, 0], [5, 0.1]]"), 18, "[]");
    auto path = write("empty.scenario", text);
    auto r = run_cli({"simulate", "--scenario", path, "--out", dir_.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("nothing to simulate"), std::string::npos);
}

TEST_F(CliTest, ZeroSampleAuditWarns) {
    auto r = run_cli({"kkt-audit", "--scenario", testing::scenario_path("fig1"), "--samples", "0", "--out",
                      dir_.string()});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST_F(CliTest, OutputsAreByteIdentical) {
    const std::string sc = testing::scenario_path("deadlock2d");
    for (const char* run : {"a", "b"}) {
        const std::string out = (dir_ / run).string();
        for (const char* cmd : {"equilibria", "feasibility-scan", "kkt-audit"}) {
            ASSERT_EQ(run_cli({cmd, "--scenario", sc, "--out", out, "--seed", "5"}).code, 0);
        }
        ASSERT_EQ(run_cli({"simulate", "--scenario", sc, "--out", out, "--x0-index", "0"}).code, 0);
    }
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(dir_ / "a")) {
        auto other = dir_ / "b" / entry.path().filename();
        ASSERT_TRUE(fs::exists(other)) << other;
        EXPECT_EQ(read_text_file(entry.path().string()), read_text_file(other.string())) << entry.path();
        ++compared;
    }
    EXPECT_GE(compared, 6);
}

}  // namespace
}  // namespace cbfqp
