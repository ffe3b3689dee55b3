#include "clip/runlog.hpp"

#include "bytes.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace clip {

namespace {

constexpr char kHeader[] =
    "stage,epoch,samples_cum,train_loss,val_mae,val_game,val_ssim,val_psnr";

// Infinite PSNR (a perfect reconstruction) is logged as this sentinel so
// the CSV stays numeric.
constexpr double kPsnrSentinel = 100.0;

std::string format_metric(double v) {
  if (std::isinf(v) && v > 0.0) {
    return detail::format_double(kPsnrSentinel);
  }
  return detail::format_double(v);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

template <typename T>
T parse_number(const std::string& field, const std::filesystem::path& path,
               std::size_t line_no) {
  T value{};
  const auto res =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw FormatError(path.string() + ":" + std::to_string(line_no) +
                      ": bad numeric field '" + field + "'");
  }
  return value;
}

}  // namespace

void write_runlog_csv(const RunLog& log, const std::filesystem::path& path) {
  std::string bytes;
  bytes += "# strategy=" + log.meta.strategy + "\n";
  bytes += "# pacing=" + log.meta.pacing + "\n";
  bytes += "# epsilon=" + detail::format_double(log.meta.epsilon) + "\n";
  bytes += "# seed=" + std::to_string(log.meta.seed) + "\n";
  bytes += "# data=" + log.meta.dataset_path + "\n";
  bytes += kHeader;
  bytes += '\n';
  for (const RunLogRow& row : log.rows) {
    bytes += std::to_string(row.stage);
    bytes += ',';
    bytes += std::to_string(row.epoch);
    bytes += ',';
    bytes += std::to_string(row.samples_cum);
    bytes += ',';
    bytes += format_metric(row.train_loss);
    bytes += ',';
    bytes += format_metric(row.val_mae);
    bytes += ',';
    bytes += format_metric(row.val_game);
    bytes += ',';
    bytes += format_metric(row.val_ssim);
    bytes += ',';
    bytes += format_metric(row.val_psnr);
    bytes += '\n';
  }
  detail::write_file(path, bytes);
}

RunLog read_runlog_csv(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  RunLog log;
  bool header_seen = false;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < bytes.size()) {
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) end = bytes.size();
    std::string line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::size_t start = 1;
      while (start < line.size() && line[start] == ' ') ++start;
      const std::size_t eq = line.find('=', start);
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(start, eq - start);
      const std::string value = line.substr(eq + 1);
      if (key == "strategy") {
        log.meta.strategy = value;
      } else if (key == "pacing") {
        log.meta.pacing = value;
      } else if (key == "epsilon") {
        log.meta.epsilon = parse_number<double>(value, path, line_no);
      } else if (key == "seed") {
        log.meta.seed = parse_number<std::uint64_t>(value, path, line_no);
      } else if (key == "data") {
        log.meta.dataset_path = value;
      }
      continue;
    }
    if (!header_seen) {
      if (line != kHeader) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": expected header '" + kHeader + "'");
      }
      header_seen = true;
      continue;
    }
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 8) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 8 fields, got " +
                        std::to_string(fields.size()));
    }
    RunLogRow row;
    row.stage = parse_number<int>(fields[0], path, line_no);
    row.epoch = parse_number<int>(fields[1], path, line_no);
    row.samples_cum = parse_number<long long>(fields[2], path, line_no);
    row.train_loss = parse_number<double>(fields[3], path, line_no);
    row.val_mae = parse_number<double>(fields[4], path, line_no);
    row.val_game = parse_number<double>(fields[5], path, line_no);
    row.val_ssim = parse_number<double>(fields[6], path, line_no);
    row.val_psnr = parse_number<double>(fields[7], path, line_no);
    log.rows.push_back(row);
  }
  if (!header_seen) {
    throw FormatError(path.string() + ": missing header row");
  }
  return log;
}

}  // namespace clip
