#include "clip/report.hpp"
#include "clip/runlog.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

using namespace clip;

namespace {

RunLog make_log(const std::string& strategy,
                std::vector<std::pair<long long, double>> points) {
  RunLog log;
  log.meta.strategy = strategy;
  log.meta.pacing = strategy == "clip" ? "quadratic" : "-";
  log.meta.epsilon = strategy == "clip" ? 0.05 : 0.0;
  log.meta.seed = 7;
  log.meta.dataset_path = "data/manifest.json";
  int epoch = 0;
  for (const auto& [samples, train_loss] : points) {
    RunLogRow row;
    row.stage = 1;
    row.epoch = ++epoch;
    row.samples_cum = samples;
    row.train_loss = train_loss;
    row.val_mae = 1.5;
    row.val_game = 2.5;
    row.val_ssim = 0.5;
    row.val_psnr = 20.0;
    log.rows.push_back(row);
  }
  return log;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in),
          std::istreambuf_iterator<char>()};
}

std::size_t count_occurrences(const std::string& text,
                              const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("run logs round trip through csv") {
  testing::TempDir dir;
  RunLog log;
  log.meta.strategy = "clip";
  log.meta.pacing = "linear";
  log.meta.epsilon = 0.05;
  log.meta.seed = 123456789012345ull;
  log.meta.dataset_path = "runs/data/manifest.json";
  RunLogRow row;
  row.stage = 3;
  row.epoch = 6;
  row.samples_cum = 1234567890123ll;
  row.train_loss = 1.0 / 3.0;
  row.val_mae = 1e-17;
  row.val_game = 2.5;
  row.val_ssim = -0.25;
  row.val_psnr = 31.415926535897931;
  log.rows.push_back(row);

  const auto path = dir / "run.csv";
  write_runlog_csv(log, path);
  const RunLog back = read_runlog_csv(path);

  CHECK(back.meta.strategy == "clip");
  CHECK(back.meta.pacing == "linear");
  CHECK(back.meta.epsilon == 0.05);
  CHECK(back.meta.seed == 123456789012345ull);
  CHECK(back.meta.dataset_path == "runs/data/manifest.json");
  REQUIRE(back.rows.size() == 1);
  CHECK(back.rows[0].stage == 3);
  CHECK(back.rows[0].epoch == 6);
  CHECK(back.rows[0].samples_cum == 1234567890123ll);
  CHECK(back.rows[0].train_loss == 1.0 / 3.0);
  CHECK(back.rows[0].val_mae == 1e-17);
  CHECK(back.rows[0].val_game == 2.5);
  CHECK(back.rows[0].val_ssim == -0.25);
  CHECK(back.rows[0].val_psnr == 31.415926535897931);
}

TEST_CASE("infinite psnr is written as the 100 sentinel") {
  testing::TempDir dir;
  RunLog log = make_log("standard", {{10, 0.5}});
  log.rows[0].val_psnr = std::numeric_limits<double>::infinity();
  const auto path = dir / "run.csv";
  write_runlog_csv(log, path);
  CHECK(slurp(path).find("inf") == std::string::npos);
  const RunLog back = read_runlog_csv(path);
  CHECK(back.rows[0].val_psnr == 100.0);
}

TEST_CASE("identical logs serialize to identical bytes") {
  testing::TempDir dir;
  const RunLog log = make_log("clip", {{8, 0.9}, {17, 0.7}, {30, 0.4}});
  write_runlog_csv(log, dir / "a.csv");
  write_runlog_csv(log, dir / "b.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
}

TEST_CASE("log parsing tolerates crlf and unknown comments") {
  testing::TempDir dir;
  const auto path = dir / "run.csv";
  std::ofstream(path) << "# strategy=standard\r\n"
                      << "# note without equals\r\n"
                      << "# future=ignored\r\n"
                      << "stage,epoch,samples_cum,train_loss,val_mae,"
                         "val_game,val_ssim,val_psnr\r\n"
                      << "1,1,10,0.5,1,2,0.5,20\r\n"
                      << "\r\n"
                      << "1,2,20,0.25,1,2,0.5,20\r\n";
  const RunLog log = read_runlog_csv(path);
  CHECK(log.meta.strategy == "standard");
  REQUIRE(log.rows.size() == 2);
  CHECK(log.rows[1].samples_cum == 20);
  CHECK(log.rows[1].train_loss == 0.25);
}

TEST_CASE("malformed logs name the offending line") {
  testing::TempDir dir;
  const auto path = dir / "run.csv";
  const std::string header =
      "stage,epoch,samples_cum,train_loss,val_mae,val_game,val_ssim,"
      "val_psnr\n";

  SUBCASE("missing header") {
    std::ofstream(path) << "# strategy=clip\n1,1,10,0.5,1,2,0.5,20\n";
    CHECK_THROWS_AS(read_runlog_csv(path), FormatError);
  }
  SUBCASE("wrong field count") {
    std::ofstream(path) << header << "1,1,10,0.5\n";
    try {
      read_runlog_csv(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("non-numeric field") {
    std::ofstream(path) << header << "1,1,10,abc,1,2,0.5,20\n";
    CHECK_THROWS_AS(read_runlog_csv(path), FormatError);
  }
  SUBCASE("absent file") {
    CHECK_THROWS_AS(read_runlog_csv(dir / "nope.csv"), IoError);
  }
}

TEST_CASE("reports merge runs over the union of sample axes") {
  testing::TempDir dir;
  const std::vector<RunLog> runs{
      make_log("clip", {{10, 0.9}, {20, 0.5}}),
      make_log("standard", {{10, 0.95}, {30, 0.6}}),
  };
  const std::vector<std::string> labels{"clip", "standard"};
  const ReportPaths paths = write_report(runs, labels, dir / "report");

  const std::string csv = slurp(paths.merged_csv);
  std::istringstream lines(csv);
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "samples_cum,clip,standard");
  REQUIRE(std::getline(lines, line));
  CHECK(line == "10,0.9,0.95");
  REQUIRE(std::getline(lines, line));
  CHECK(line == "20,0.5,");
  REQUIRE(std::getline(lines, line));
  CHECK(line == "30,,0.6");
  CHECK_FALSE(std::getline(lines, line));
}

TEST_CASE("report charts are self-contained svg with one curve per run") {
  testing::TempDir dir;
  const std::vector<RunLog> runs{
      make_log("clip", {{10, 0.9}, {20, 0.5}, {35, 0.3}}),
      make_log("standard", {{16, 0.95}, {32, 0.7}}),
  };
  const std::vector<std::string> labels{"clip<fast>", "standard"};
  const ReportPaths paths = write_report(runs, labels, dir / "report");

  const std::string svg = slurp(paths.chart_svg);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(count_occurrences(svg, "<polyline") == 2);
  // Labels are escaped, never embedded raw.
  CHECK(svg.find("clip<fast>") == std::string::npos);
  CHECK(svg.find("clip&lt;fast&gt;") != std::string::npos);

  // Same inputs, same bytes.
  const ReportPaths again = write_report(runs, labels, dir / "report2");
  CHECK(slurp(paths.chart_svg) == slurp(again.chart_svg));
  CHECK(slurp(paths.merged_csv) == slurp(again.merged_csv));
}

TEST_CASE("threshold scan finds the first crossing per run") {
  const std::vector<RunLog> runs{
      make_log("clip", {{10, 5.0}, {20, 3.0}, {30, 1.0}}),
      make_log("standard", {{10, 5.0}, {40, 4.0}}),
  };
  const std::vector<std::string> labels{"clip", "standard"};
  const auto entries = samples_to_threshold(runs, labels, 3.0);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].label == "clip");
  CHECK(entries[0].reached);
  CHECK(entries[0].samples == 20);
  CHECK(entries[0].final_loss == 1.0);
  CHECK(entries[1].label == "standard");
  CHECK_FALSE(entries[1].reached);
  CHECK(entries[1].final_loss == 4.0);
}

TEST_CASE("report inputs are validated") {
  testing::TempDir dir;
  const RunLog log = make_log("clip", {{10, 0.5}});
  const std::vector<RunLog> one{log};

  CHECK_THROWS_AS(write_report({}, {}, dir / "r"), std::invalid_argument);
  CHECK_THROWS_AS(write_report(one, {"a", "b"}, dir / "r"),
                  std::invalid_argument);
  CHECK_THROWS_AS(write_report({log, log}, {"dup", "dup"}, dir / "r"),
                  std::invalid_argument);
  CHECK_THROWS_AS(write_report(one, {"bad,label"}, dir / "r"),
                  std::invalid_argument);
  CHECK_THROWS_AS(write_report(one, {""}, dir / "r"), std::invalid_argument);

  RunLog empty_rows;
  empty_rows.meta.strategy = "clip";
  CHECK_THROWS_AS(write_report({empty_rows}, {"x"}, dir / "r"),
                  std::invalid_argument);
  CHECK_THROWS_AS(samples_to_threshold({log, log}, {"dup", "dup"}, 1.0),
                  std::invalid_argument);
}
