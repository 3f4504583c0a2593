// Copyright 2026 The masstrace Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

const fs::path kWork = fs::temp_directory_path() / ("masstrace-cli-" + std::to_string(::getpid()));

int run(const std::string& args) {
  const std::string cmd =
      std::string(MASSTRACE_CLI) + " " + args + " >" + (kWork / "stdout").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string path(const std::string& name) { return (kWork / name).string(); }

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    ASSERT_EQ(run("generate --traces 3000 --spans " + path("s.jsonl") + " --labels " +
                  path("l.csv")),
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(kWork); }
};

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("sample --input " + path("s.jsonl")), 1);
  EXPECT_EQ(run("sample --input x --out-dir y --budget 2"), 1);
  EXPECT_EQ(run("sample --input x --out-dir y --pool-fill sometimes"), 1);
  EXPECT_EQ(run("sample --input " + path("s.jsonl") + " --out-dir " + path("o") +
                " --bandwidth 0,0.1"),
            1);
}

TEST_F(CliTest, DataErrorsExitTwo) {
  EXPECT_EQ(run("sample --input " + path("missing.jsonl") + " --out-dir " + path("o")), 2);
  EXPECT_EQ(run("evaluate --labels " + path("missing.csv") + " --decisions x --budget 0.05"), 2);
}

TEST_F(CliTest, SampleThenEvaluate) {
  ASSERT_EQ(run("sample --input " + path("s.jsonl") + " --out-dir " + path("run") +
                " --warmup 500 --window 500"),
            0);
  EXPECT_TRUE(fs::exists(path("run/decisions.jsonl")));
  ASSERT_EQ(run("evaluate --labels " + path("l.csv") + " --decisions " +
                path("run/decisions.jsonl") + " --json " + path("r.json")),
            0);
  std::ifstream in(path("stdout"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "budget,J,P,R,F1");
}

TEST_F(CliTest, ConfigFileWithFlagOverride) {
  {
    std::ofstream cfg(path("c.toml"));
    cfg << "[sample]\nwindow = 400\nbandwidth = [0.1, 0.3]\nbudget = 0.02\n";
  }
  ASSERT_EQ(run("--config " + path("c.toml") + " sample --input " + path("s.jsonl") +
                " --out-dir " + path("cfg") + " --warmup 500 --budget 0.1"),
            0);
  std::ifstream in(path("cfg/run.json"));
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("\"window\": 400"), std::string::npos);
  EXPECT_NE(text.find("\"budget\": 0.1"), std::string::npos);
  EXPECT_NE(text.find("0.3"), std::string::npos);
}

}  // namespace
