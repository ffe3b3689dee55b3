#pragma once

#include "clip/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace clip {

struct RunLogRow {
  int stage{0};
  int epoch{0};
  long long samples_cum{0};
  double train_loss{0.0};
  double val_mae{0.0};
  double val_game{0.0};
  double val_ssim{0.0};
  double val_psnr{0.0};
};

struct RunLogMeta {
  std::string strategy;      // "standard" or "clip"
  std::string pacing;        // "linear", "quadratic" or "-"
  double epsilon{0.0};
  std::uint64_t seed{0};
  std::string dataset_path;  // manifest the run was trained from
};

struct RunLog {
  RunLogMeta meta;
  std::vector<RunLogRow> rows;
};

// CSV with "# key=value" metadata lines, then a fixed header row, then one
// row per epoch. Floats are written in shortest round-trip form and infinite
// PSNR is recorded as 100. The bytes depend only on the log contents, so
// identical runs produce identical files.
void write_runlog_csv(const RunLog& log, const std::filesystem::path& path);

// Throws FormatError naming file and line on malformed input.
RunLog read_runlog_csv(const std::filesystem::path& path);

}  // namespace clip
