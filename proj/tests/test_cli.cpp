#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <json.hpp>

#include "degint/scenarios.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = DEGINT_CLI_PATH;

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / ("degint_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the binary with stdout captured to a file; returns the exit status.
int invoke(const std::string& args, std::string* stdout_text = nullptr, const std::string& env = "") {
  const fs::path out = scratch_dir() / "stdout.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + kCli + "\" " + args + " > \"" + out.string() +
                          "\" 2> \"" + (scratch_dir() / "stderr.txt").string() + "\"";
  const int raw = std::system(cmd.c_str());
  if (stdout_text) *stdout_text = slurp(out);
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

TEST(Cli, ListPrintsEveryScenario) {
  std::string text;
  ASSERT_EQ(invoke("--list", &text), 0);
  std::istringstream in(text);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 8);
  EXPECT_NE(text.find("kepler"), std::string::npos);
  EXPECT_NE(text.find("factorization-flow"), std::string::npos);
  EXPECT_NE(text.find("verify-brackets"), std::string::npos);
}

TEST(Cli, InvalidConfigurationExitsWithOne) {
  EXPECT_EQ(invoke("--scenario no-such-scenario"), 1);
  EXPECT_EQ(invoke("--scenario kepler --tol 1e-3"), 1);
  EXPECT_EQ(invoke("--scenario factorization-flow --n 9"), 1);
  EXPECT_EQ(invoke("--scenario relativistic-cm --q 1"), 1);
  EXPECT_EQ(invoke("--scenario kepler --no-such-flag"), 1);
  EXPECT_EQ(invoke(""), 1);
}

TEST(Cli, UnwritableOutputExitsWithThree) {
  EXPECT_EQ(invoke("--scenario kepler --out-json /nonexistent-dir/report.json"), 3);
}

TEST(Cli, KeplerReport) {
  std::string text;
  ASSERT_EQ(invoke("--scenario kepler", &text), 0);
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j["scenario"], "kepler");
  EXPECT_EQ(j["seed"], 1);
  EXPECT_TRUE(j["flags"].empty());
  EXPECT_TRUE(j["elapsed_seconds"].is_null());
  std::vector<std::string> names;
  for (const auto& d : j["drifts"]) {
    names.push_back(d["name"]);
    if (d["name"] != "q1") {
      EXPECT_LE(d["max_abs"].get<double>(), 1e-8) << d["name"];
    }
  }
  for (const char* want : {"M1", "M2", "M3", "A1", "A2", "A3", "H"})
    EXPECT_NE(std::find(names.begin(), names.end(), want), names.end()) << want;
}

TEST(Cli, TimingIsOptIn) {
  std::string text;
  ASSERT_EQ(invoke("--scenario kepler --t-max 0.5 --timing", &text), 0);
  EXPECT_TRUE(nlohmann::json::parse(text)["elapsed_seconds"].is_number());
}

TEST(Cli, FilesAreWrittenAndDeterministic) {
  const fs::path dir = scratch_dir();
  const std::string base = "--scenario ruijsenaars-rational --samples 8 --seed 5";
  const auto files = [&](const std::string& tag) {
    return " --out-csv \"" + (dir / (tag + ".csv")).string() + "\" --out-json \"" + (dir / (tag + ".json")).string() +
           "\" --out-svg \"" + (dir / (tag + ".svg")).string() + "\"";
  };
  ASSERT_EQ(invoke(base + files("a")), 0);
  ASSERT_EQ(invoke(base + files("b")), 0);
  for (const char* ext : {".csv", ".json", ".svg"}) {
    const std::string a = slurp(dir / (std::string("a") + ext));
    EXPECT_FALSE(a.empty()) << ext;
    EXPECT_EQ(a, slurp(dir / (std::string("b") + ext))) << ext;
  }
  EXPECT_EQ(slurp(dir / "a.svg").rfind("<svg", 0), 0u);
  EXPECT_EQ(slurp(dir / "a.csv").rfind("t,", 0), 0u);
}

TEST(Cli, ThreadCountDoesNotChangeResults) {
  std::string one, many;
  const std::string args = "--scenario duality-check --samples 6 --seed 3";
  ASSERT_EQ(invoke(args, &one, "DEGINT_THREADS=1"), 0);
  ASSERT_EQ(invoke(args, &many, "DEGINT_THREADS=4"), 0);
  EXPECT_EQ(one, many);
}

TEST(Cli, ConfigFileWithCommandLineOverride) {
  const fs::path cfg = scratch_dir() / "run.toml";
  std::ofstream(cfg) << "scenario = \"kepler\"\nt-max = 0.25\nseed = 9\n";
  std::string text;
  ASSERT_EQ(invoke("--config \"" + cfg.string() + "\" --seed 4", &text), 0);
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j["scenario"], "kepler");
  EXPECT_EQ(j["seed"], 4);
  EXPECT_DOUBLE_EQ(j["parameters"]["t_max"].get<double>(), 0.25);
}

TEST(CliInProcess, FormatsNumbersPortably) {
  EXPECT_EQ(degint::cli::format_number(0.1), "1.0000000000000001e-01");
  EXPECT_EQ(degint::cli::format_number(-2.0), "-2.0000000000000000e+00");
}
