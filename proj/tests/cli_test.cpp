#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "gravhom/io.hpp"

namespace gravhom {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(GRAVHOM_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("gravhom_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }

  fs::path dir_;
};

// Drops the named columns so tables can be compared across runs.
std::string without_columns(const std::string& csv, const TableSchema& schema) {
  std::stringstream in(csv);
  const CsvTable t = read_csv(in, schema);
  std::vector<bool> keep(schema.columns.size(), true);
  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    for (const auto& tc : schema.timing_columns) {
      if (schema.columns[i] == tc) keep[i] = false;
    }
  }
  std::string outs;
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (keep[i]) outs += row[i] + ",";
    }
    outs += "\n";
  }
  return outs;
}

TEST_F(CliTest, StabilityWritesTablesAndManifest) {
  const RunResult r = run("stability --instances 25 --seed 3 --output " + out("a"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  for (const char* name : {"calib", "fhf", "frhfr"}) {
    std::ifstream in(dir_ / "a" / ("stability_" + std::string(name) + ".csv"));
    const CsvTable t = read_csv(in, table_schema("stability"));
    EXPECT_EQ(t.rows.size(), 25u) << name;
  }
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(manifest["subcommand"], "stability");
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(manifest["schema_version"], kSchemaVersion);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "stability_summary.json"));
}

TEST_F(CliTest, SameSeedSameTables) {
  for (const char* sub : {"a", "b"}) {
    const RunResult r = run("ransac --solver fhf --repeats 3 --iterations 200 --seed 5 --output " +
                            out(sub));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const RunResult s = run("stability --solver frhfr --instances 30 --seed 5 --output " +
                            out(sub));
    ASSERT_EQ(s.exit_code, 0) << s.output;
  }
  EXPECT_EQ(slurp(dir_ / "a" / "stability_frhfr.csv"), slurp(dir_ / "b" / "stability_frhfr.csv"));
  const TableSchema& runs = table_schema("ransac_runs");
  EXPECT_EQ(without_columns(slurp(dir_ / "a" / "ransac_runs.csv"), runs),
            without_columns(slurp(dir_ / "b" / "ransac_runs.csv"), runs));
  const TableSchema& trace = table_schema("ransac_trace");
  EXPECT_EQ(without_columns(slurp(dir_ / "a" / "ransac_trace.csv"), trace),
            without_columns(slurp(dir_ / "b" / "ransac_trace.csv"), trace));
}

TEST_F(CliTest, NoiseRowsPerLevel) {
  const RunResult r = run("noise --solver fhf --instances 10 --noise-sigma 0,1 --output " +
                          out("n"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  std::ifstream in(dir_ / "n" / "noise_fhf.csv");
  EXPECT_EQ(read_csv(in, table_schema("noise")).rows.size(), 20u);
  std::ifstream sin(dir_ / "n" / "noise_summary_fhf.csv");
  EXPECT_EQ(read_csv(sin, table_schema("noise_summary")).rows.size(), 10u);
}

TEST_F(CliTest, JsonFormat) {
  const RunResult r =
      run("stability --solver calib --instances 4 --format json --output " + out("j"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto rows = nlohmann::json::parse(slurp(dir_ / "j" / "stability_calib.json"));
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& c : table_schema("stability").columns) EXPECT_TRUE(rows[0].contains(c)) << c;
}

TEST_F(CliTest, EmptySigmaListIsUsageError) {
  const RunResult r = run("noise --noise-sigma '' --output " + out("e"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("UsageError"), std::string::npos) << r.output;
}

TEST_F(CliTest, UnknownSolverIsUsageError) {
  const RunResult r = run("stability --solver 5pt --output " + out("e"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("UsageError"), std::string::npos) << r.output;
}

TEST_F(CliTest, MissingSubcommandIsUsageError) {
  const RunResult r = run("");
  EXPECT_EQ(r.exit_code, 2);
}

TEST_F(CliTest, SynthSolveRoundTrip) {
  RunResult r = run("synth --points 3 --seed 21 --lambda -0.2 --focal 1.4 --output " + out("s"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  r = run("solve --solver frhfr --input " + (dir_ / "s" / "correspondences.csv").string() +
          " --output " + out("r"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto sols = nlohmann::json::parse(slurp(dir_ / "r" / "solutions.json"));
  const auto truth = nlohmann::json::parse(slurp(dir_ / "s" / "ground_truth.json"));
  ASSERT_EQ(sols["status"], "ok");
  double best = 1e9;
  for (const auto& s : sols["solutions"]) {
    best = std::min(best, std::abs(s["focal"].get<double>() - 1.4) +
                              std::abs(s["lambda"].get<double>() + 0.2));
  }
  // CSV round trip keeps 17 significant digits.
  EXPECT_LT(best, 1e-6);
  EXPECT_EQ(truth["focal"], 1.4);
}

TEST_F(CliTest, SynthSolveWithRansac) {
  RunResult r = run("synth --points 100 --inlier-fraction 0.7 --noise-sigma 1 --seed 4 "
                    "--lambda 0 --focal 1.0 --output " + out("s"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  r = run("solve --solver fhf --ransac --iterations 500 --input " +
          (dir_ / "s" / "correspondences.csv").string() + " --output " + out("r"));
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const auto sols = nlohmann::json::parse(slurp(dir_ / "r" / "solutions.json"));
  EXPECT_GE(sols["num_inliers"].get<int>(), 66);
  EXPECT_NEAR(sols["solutions"][0]["focal"].get<double>(), 1.0, 0.05);
}

TEST_F(CliTest, MalformedCorrespondenceNamesRow) {
  std::ofstream csv(dir_ / "bad.csv");
  csv << "x1,y1,x2,y2,qw1,qx1,qy1,qz1,qw2,qx2,qy2,qz2\n"
      << "1,2,3,4,1,0,0,0,1,0,0,0\n"
      << "1,2,3,4,1,0,0,0,1,0,0\n";
  csv.close();
  std::ofstream side(dir_ / "bad.json");
  side << R"({"width": 640, "height": 480})";
  side.close();
  const RunResult r = run("solve --input " + (dir_ / "bad.csv").string() + " --output " + out("r"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("ParseError"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("row 2"), std::string::npos) << r.output;
}

TEST_F(CliTest, BadQuaternionIsValidationError) {
  std::ofstream csv(dir_ / "q.csv");
  csv << "x1,y1,x2,y2,qw1,qx1,qy1,qz1,qw2,qx2,qy2,qz2\n"
      << "1,2,3,4,2,0,0,0,1,0,0,0\n";
  csv.close();
  std::ofstream side(dir_ / "q.json");
  side << R"({"width": 640, "height": 480})";
  side.close();
  const RunResult r = run("solve --input " + (dir_ / "q.csv").string() + " --output " + out("r"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("ValidationError"), std::string::npos) << r.output;
}

TEST_F(CliTest, SchemaMatchesDocs) {
  const RunResult r = run("schema");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.output),
            nlohmann::json::parse(slurp(fs::path(GRAVHOM_SOURCE_DIR) / "docs" / "schemas.json")));
}

}  // namespace
}  // namespace gravhom
