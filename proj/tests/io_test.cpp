#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gravhom/io.hpp"

namespace gravhom {
namespace {

std::string header_line(const std::string& table) {
  std::string out;
  for (const auto& c : table_schema(table).columns) {
    if (!out.empty()) out += ",";
    out += c;
  }
  return out;
}

TEST(Schema, ManifestMatchesCheckedInFile) {
  const nlohmann::json on_disk = read_json_file(std::string(GRAVHOM_SOURCE_DIR) +
                                                "/docs/schemas.json");
  EXPECT_EQ(on_disk, nlohmann::json(schema_manifest()));
}

TEST(Schema, TimingColumnsAreColumns) {
  for (const auto& s : table_schemas()) {
    for (const auto& tc : s.timing_columns) {
      EXPECT_NE(std::find(s.columns.begin(), s.columns.end(), tc), s.columns.end())
          << s.name << "." << tc;
    }
  }
}

TEST(Schema, UnknownTable) {
  try {
    table_schema("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
  }
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.0, -1.5, 1e-300, 0.1, 3.141592653589793, 1e21}) {
    EXPECT_EQ(parse_double(format_double(v), 1, "x"), v);
  }
  EXPECT_EQ(format_double(kNaN), "nan");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_TRUE(std::isnan(parse_double("nan", 1, "x")));
}

TEST(ParseDouble, NamesRowAndColumn) {
  try {
    parse_double("1.2.3", 7, "err_h");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("row 7"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("err_h"), std::string::npos);
  }
}

TEST(ReadCsv, EmptyTableHasHeaderOnly) {
  std::stringstream ss;
  write_stability_csv(ss, {});
  EXPECT_EQ(ss.str(), header_line("stability") + "\n");
  const CsvTable t = read_csv(ss, table_schema("stability"));
  EXPECT_TRUE(t.rows.empty());
}

TEST(ReadCsv, HeaderMismatchIsSchemaError) {
  std::stringstream ss("a,b,c\n1,2,3\n");
  try {
    read_csv(ss, table_schema("timing"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
  }
  std::stringstream empty;
  EXPECT_THROW(read_csv(empty, table_schema("timing")), Error);
}

TEST(ReadCsv, MalformedRowIsNamed) {
  std::stringstream ss(header_line("ransac_trace") + "\n0,1,0.5,10\n\n0,2,0.7\n");
  try {
    read_csv(ss, table_schema("ransac_trace"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("row 3 (line 4)"), std::string::npos) << e.what();
  }
}

TEST(StabilityCsv, RowCountAndQuantilesFromFile) {
  const auto recs = stability_experiment(SolverKind::kFhf, 50, 3);
  std::stringstream ss;
  write_stability_csv(ss, recs);
  const CsvTable t = read_csv(ss, table_schema("stability"));
  ASSERT_EQ(t.rows.size(), 50u);
  // Consumers recompute summary statistics from the file alone.
  std::vector<double> lh;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    lh.push_back(parse_double(t.rows[r][9], t.row_numbers[r], "log10_err_h"));
  }
  const nlohmann::ordered_json summary = stability_summary(recs);
  const Quantiles q = summarize(lh);
  EXPECT_DOUBLE_EQ(q.median, summary["log10_err_h"]["median"].get<double>());
  EXPECT_EQ(summary["instances"].get<int>(), 50);
}

TEST(NoiseCsv, RowsPerLevelAndSummary) {
  const std::vector<double> sigmas{0.0, 0.5};
  const auto recs = noise_experiment(SolverKind::kFrhfr, sigmas, 20, 2);
  std::stringstream raw;
  write_noise_csv(raw, recs);
  EXPECT_EQ(read_csv(raw, table_schema("noise")).rows.size(), 40u);

  std::stringstream sum;
  write_noise_summary_csv(sum, SolverKind::kFrhfr, summarize_noise(recs, sigmas));
  const CsvTable t = read_csv(sum, table_schema("noise_summary"));
  EXPECT_EQ(t.rows.size(), 10u);  // 2 levels x 5 metrics
}

TEST(TimingCsv, RowsAndColumns) {
  std::stringstream ss;
  TimingRow row;
  row.solver = SolverKind::kFhf;
  row.instances = 10;
  row.mean_us = 2.5;
  write_timing_csv(ss, {row, row});
  const CsvTable t = read_csv(ss, table_schema("timing"));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "fhf");
  EXPECT_EQ(parse_double(t.rows[0][4], 1, "mean_us"), 2.5);
}

TEST(RansacCsv, TraceRowsMatchRuns) {
  RansacRunRecord a;
  a.trace = {{1, 0.1, 3}, {2, 0.2, 5}};
  RansacRunRecord b;
  b.repeat = 1;
  b.trace = {{1, 0.3, 4}};
  std::stringstream runs;
  write_ransac_runs_csv(runs, {a, b});
  EXPECT_EQ(read_csv(runs, table_schema("ransac_runs")).rows.size(), 2u);
  std::stringstream trace;
  write_ransac_trace_csv(trace, {a, b});
  const CsvTable t = read_csv(trace, table_schema("ransac_trace"));
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[2][0], "1");
  std::stringstream mean;
  write_trace_mean_csv(mean, average_traces({a, b}, 1.0, 11));
  EXPECT_EQ(read_csv(mean, table_schema("ransac_trace_mean")).rows.size(), 11u);
}

TEST(Correspondences, RoundTripThroughCsv) {
  SceneConfig cfg;
  cfg.num_points = 25;
  const SyntheticInstance inst = generate(cfg, 4);
  const ImageFrame frame{800, 600};
  std::stringstream ss;
  write_correspondences_csv(ss, inst.correspondences, frame);
  const auto back = read_correspondences_csv(ss, frame);
  ASSERT_EQ(back.size(), inst.correspondences.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_LT((back[i].p1 - inst.correspondences[i].p1).norm(), 1e-15);
    EXPECT_LT((back[i].p2 - inst.correspondences[i].p2).norm(), 1e-15);
    EXPECT_LT((back[i].r1.matrix() - inst.correspondences[i].r1.matrix()).norm(), 1e-14);
    EXPECT_LT((back[i].r2.matrix() - inst.correspondences[i].r2.matrix()).norm(), 1e-14);
  }
}

TEST(Correspondences, NonUnitQuaternionIsValidationError) {
  std::stringstream ss(header_line("correspondences") +
                       "\n1,2,3,4,1,0,0,0,1,0,0,0\n1,2,3,4,1,0,0,0,0.9,0,0,0\n");
  try {
    read_correspondences_csv(ss, ImageFrame());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(Correspondences, NonNumericCellIsParseError) {
  std::stringstream ss(header_line("correspondences") + "\n1,2,x,4,1,0,0,0,1,0,0,0\n");
  try {
    read_correspondences_csv(ss, ImageFrame());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("x2"), std::string::npos);
  }
}

TEST(Correspondences, SidecarValidation) {
  EXPECT_THROW(frame_from_json(nlohmann::json{{"width", 640}}), Error);
  EXPECT_THROW(frame_from_json(nlohmann::json{{"width", -1}, {"height", 2}}), Error);
  const ImageFrame f = frame_from_json(nlohmann::json{{"width", 1920}, {"height", 1080}});
  EXPECT_EQ(f.width, 1920);
  EXPECT_EQ(f.height, 1080);
}

TEST(Correspondences, MissingFileIsIoError) {
  try {
    read_json_file("/nonexistent/sidecar.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(SolutionJson, CarriesPoseAndIntrinsics) {
  SceneConfig cfg;
  const SyntheticInstance inst = generate(cfg, 8);
  SolverSolution s;
  s.hy = inst.hy;
  s.focal = inst.intrinsics.focal;
  s.tag = SolverKind::kFhf;
  const auto j = solution_json(s, inst.r1, inst.r2, inst.intrinsics);
  EXPECT_EQ(j["solver"], "fhf");
  EXPECT_TRUE(j["focal_estimated"].get<bool>());
  EXPECT_FALSE(j["lambda_estimated"].get<bool>());
  EXPECT_EQ(j["translation_dir"].size(), 3u);
  EXPECT_EQ(j["homography_normalized"].size(), 3u);
}

}  // namespace
}  // namespace gravhom
