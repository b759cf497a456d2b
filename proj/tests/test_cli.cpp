#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "psychoval/cli.hpp"

using namespace psychoval;
namespace fs = std::filesystem;

namespace {

const fs::path kSamples = PSYCHOVAL_SAMPLES_DIR;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string sample(const char* name) { return (kSamples / name).string(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("psychoval_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
    unsetenv("PSYCHOVAL_SEED");
  }
  void TearDown() override {
    unsetenv("PSYCHOVAL_SEED");
    fs::remove_all(dir_);
  }
  std::string path(const char* name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, ValidateJsonHappyPath) {
  const auto r = cli({"validate", "--input", sample("survey.csv"), "--likert", "1:7", "--format",
                      "json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["solution"]["m"], 2);
  EXPECT_EQ(j["scales"].size(), 2u);
  EXPECT_TRUE(r.err.empty());
}

TEST_F(CliTest, ValidateTwiceIsByteIdentical) {
  const auto a = cli({"validate", "-i", sample("survey.csv")});
  const auto b = cli({"validate", "-i", sample("survey.csv")});
  ASSERT_EQ(a.code, kExitOk);
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, BartlettOnNoiseExitsOne) {
  const auto r = cli({"bartlett", "--input", sample("noise.csv")});
  EXPECT_EQ(r.code, kExitAnalysis);
  EXPECT_NE(r.err.find("AssumptionsNotMet"), std::string::npos);
  EXPECT_NE(r.out.find("chi2"), std::string::npos);
}

TEST_F(CliTest, ValidateOnNoiseExitsOneUnlessForced) {
  EXPECT_EQ(cli({"validate", "-i", sample("noise.csv")}).code, kExitAnalysis);
  const auto forced = cli({"validate", "-i", sample("noise.csv"), "--force"});
  ASSERT_EQ(forced.code, kExitOk) << forced.err;
  EXPECT_NE(forced.out.find("AssumptionsNotMet"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {},
           {"frobnicate"},
           {"validate"},
           {"validate", "-i", "/no/such/file.csv"},
           {"validate", "-i", sample("survey.csv"), "--likert", "7:1"},
           {"validate", "-i", sample("survey.csv"), "--likert", "-3"},
           {"validate", "-i", sample("survey.csv"), "--format", "xml"},
           {"validate", "-i", sample("survey.csv"), "--retention", "kaiser", "--factors", "2"},
           {"validate", "-i", sample("survey.csv"), "--bartlett-alpha", "2"},
           {"efa", "-i", sample("survey.csv"), "--rotation", "promax"},
       }) {
    const auto r = cli(args);
    EXPECT_EQ(r.code, kExitUsage) << ::testing::PrintToString(args);
    EXPECT_TRUE(r.out.empty());
    EXPECT_NE(r.err.find("sage"), std::string::npos);
  }
}

TEST_F(CliTest, HelpExitsZero) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("validate"), std::string::npos);
}

TEST_F(CliTest, SimulateTwiceByteIdentical) {
  const auto a = path("a.csv"), b = path("b.csv");
  ASSERT_EQ(cli({"simulate", "--spec", sample("model.txt"), "--n", "500", "--seed", "42", "--out", a})
                .code,
            kExitOk);
  ASSERT_EQ(cli({"simulate", "--spec", sample("model.txt"), "--n", "500", "--seed", "42", "--out", b})
                .code,
            kExitOk);
  const std::string first = slurp(a);
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(first, slurp(b));
}

TEST_F(CliTest, EnvironmentSeedWithFlagWinning) {
  const auto base = cli({"simulate", "--spec", sample("model.txt"), "--n", "50", "--seed", "7"});
  setenv("PSYCHOVAL_SEED", "7", 1);
  const auto from_env = cli({"simulate", "--spec", sample("model.txt"), "--n", "50"});
  EXPECT_EQ(from_env.out, base.out);
  const auto flag = cli({"simulate", "--spec", sample("model.txt"), "--n", "50", "-s", "8"});
  unsetenv("PSYCHOVAL_SEED");
  const auto flag_only = cli({"simulate", "--spec", sample("model.txt"), "--n", "50", "-s", "8"});
  EXPECT_EQ(flag.out, flag_only.out);
  EXPECT_NE(flag.out, base.out);
  setenv("PSYCHOVAL_SEED", "abc", 1);
  EXPECT_EQ(cli({"simulate", "--spec", sample("model.txt"), "--n", "5"}).code, kExitUsage);
}

TEST_F(CliTest, SeedEchoedInConfig) {
  setenv("PSYCHOVAL_SEED", "1234", 1);
  const auto r = cli({"validate", "-i", sample("survey.csv")});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_EQ(Json::parse(r.out)["config"]["seed"], 1234);
}

TEST_F(CliTest, SubcommandsRun) {
  const std::string survey = sample("survey.csv");
  EXPECT_EQ(cli({"efa", "-i", survey, "--rotation", "varimax", "--factors", "2"}).code, kExitOk);
  EXPECT_EQ(cli({"kmo", "-i", survey}).code, kExitOk);
  const auto alpha = cli({"alpha", "-i", survey, "--scales", sample("scales.txt")});
  ASSERT_EQ(alpha.code, kExitOk) << alpha.err;
  EXPECT_EQ(Json::parse(alpha.out)["scales"].size(), 2u);
  EXPECT_EQ(cli({"describe", "-i", survey, "-f", "text"}).code, kExitOk);
  const auto retest = cli({"retest", "-i", survey, "--retest", survey});
  ASSERT_EQ(retest.code, kExitOk) << retest.err;
  EXPECT_NE(retest.out.find("1"), std::string::npos);
}

TEST_F(CliTest, OutFileReceivesResults) {
  const auto out = path("report.json");
  const auto r = cli({"validate", "-i", sample("survey.csv"), "-o", out});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_TRUE(r.out.empty());
  EXPECT_TRUE(Json::accept(slurp(out)));
}

TEST_F(CliTest, AnalysisErrorNamesTheError) {
  const auto bad = path("bad.csv");
  std::ofstream(bad) << "id,A,B\nr1,1,9\n";
  const auto r = cli({"describe", "-i", bad});
  EXPECT_EQ(r.code, kExitAnalysis);
  EXPECT_NE(r.err.find("RangeError"), std::string::npos);
}

TEST_F(CliTest, ShippedSamplesRegenerateFromTheirSpecs) {
  for (const auto& [spec, csv] : std::vector<std::pair<const char*, const char*>>{
           {"model.txt", "survey.csv"}, {"noise_model.txt", "noise.csv"},
           {"prune_model.txt", "prune.csv"}}) {
    const auto r = cli({"simulate", "--spec", sample(spec)});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(r.out, slurp(kSamples / csv)) << spec;
  }
}
