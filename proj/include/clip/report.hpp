#pragma once

#include "clip/runlog.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace clip {

struct ReportPaths {
  std::filesystem::path merged_csv;
  std::filesystem::path chart_svg;
};

struct ThresholdEntry {
  std::string label;
  bool reached{false};
  // Cumulative samples at the first epoch whose training loss fell to the
  // threshold; meaningful only when reached.
  long long samples{0};
  double final_loss{0.0};
};

// Writes report.csv (losses of all runs merged over the union of their
// cumulative-sample axes) and report.svg (loss curves against samples
// consumed) into the output directory. Labels must be unique, one per run.
ReportPaths write_report(const std::vector<RunLog>& runs,
                         const std::vector<std::string>& labels,
                         const std::filesystem::path& out_dir);

// How many samples each run needed to first push training loss to or below
// the threshold.
std::vector<ThresholdEntry> samples_to_threshold(
    const std::vector<RunLog>& runs, const std::vector<std::string>& labels,
    double threshold);

}  // namespace clip
