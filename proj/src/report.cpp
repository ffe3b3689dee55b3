#include "clip/report.hpp"

#include "bytes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <system_error>

namespace clip {

namespace {

const char* kPalette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44",
                          "#66ccee", "#aa3377", "#994455", "#222222"};
constexpr int kPaletteSize = 8;

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string format_tick(double v) {
  if (v == 0.0) {
    return "0";
  }
  const double a = std::abs(v);
  char buf[64];
  int written;
  if (a >= 0.01 && a < 100000.0) {
    written = std::snprintf(buf, sizeof(buf), "%.4g", v);
  } else {
    written = std::snprintf(buf, sizeof(buf), "%.2e", v);
  }
  return std::string(buf, static_cast<std::size_t>(written));
}

void validate_inputs(const std::vector<RunLog>& runs,
                     const std::vector<std::string>& labels) {
  if (runs.empty()) {
    throw std::invalid_argument("report needs at least one run");
  }
  if (runs.size() != labels.size()) {
    throw std::invalid_argument("one label per run is required");
  }
  std::set<std::string> unique(labels.begin(), labels.end());
  if (unique.size() != labels.size()) {
    throw std::invalid_argument("report labels must be unique");
  }
  for (const std::string& label : labels) {
    if (label.empty() || label.find(',') != std::string::npos ||
        label.find('\n') != std::string::npos) {
      throw std::invalid_argument("report label '" + label +
                                  "' is empty or contains , or newline");
    }
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].rows.empty()) {
      throw std::invalid_argument("run '" + labels[i] + "' has no rows");
    }
  }
}

std::string render_chart_svg(const std::vector<RunLog>& runs,
                             const std::vector<std::string>& labels) {
  constexpr double kWidth = 880.0;
  constexpr double kHeight = 480.0;
  constexpr double kLeft = 80.0;
  constexpr double kRight = kWidth - 200.0;
  constexpr double kTop = 50.0;
  constexpr double kBottom = kHeight - 60.0;

  double x_max = 0.0;
  double y_max = 0.0;
  for (const RunLog& run : runs) {
    for (const RunLogRow& row : run.rows) {
      x_max = std::max(x_max, static_cast<double>(row.samples_cum));
      if (std::isfinite(row.train_loss)) {
        y_max = std::max(y_max, row.train_loss);
      }
    }
  }
  if (x_max <= 0.0) x_max = 1.0;
  if (y_max <= 0.0) y_max = 1.0;

  const auto to_x = [&](double samples) {
    return kLeft + (samples / x_max) * (kRight - kLeft);
  };
  const auto to_y = [&](double value) {
    return kBottom - (value / y_max) * (kBottom - kTop);
  };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         format_tick(kWidth) + "\" height=\"" + format_tick(kHeight) +
         "\" viewBox=\"0 0 " + format_tick(kWidth) + " " +
         format_tick(kHeight) + "\">\n";
  svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "  <text x=\"" + format_tick((kLeft + kRight) / 2.0) +
         "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">Training loss vs samples consumed</text>\n";

  // Axes.
  svg += "  <line x1=\"" + format_tick(kLeft) + "\" y1=\"" +
         format_tick(kBottom) + "\" x2=\"" + format_tick(kRight) +
         "\" y2=\"" + format_tick(kBottom) +
         "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  svg += "  <line x1=\"" + format_tick(kLeft) + "\" y1=\"" +
         format_tick(kTop) + "\" x2=\"" + format_tick(kLeft) + "\" y2=\"" +
         format_tick(kBottom) +
         "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = static_cast<double>(i) / kTicks;
    const double sx = fx * x_max;
    const double px = to_x(sx);
    svg += "  <line x1=\"" + format_tick(px) + "\" y1=\"" +
           format_tick(kBottom) + "\" x2=\"" + format_tick(px) + "\" y2=\"" +
           format_tick(kBottom + 5.0) +
           "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg += "  <text x=\"" + format_tick(px) + "\" y=\"" +
           format_tick(kBottom + 20.0) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">" +
           format_tick(sx) + "</text>\n";
    const double sy = fx * y_max;
    const double py = to_y(sy);
    svg += "  <line x1=\"" + format_tick(kLeft - 5.0) + "\" y1=\"" +
           format_tick(py) + "\" x2=\"" + format_tick(kLeft) + "\" y2=\"" +
           format_tick(py) + "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg += "  <text x=\"" + format_tick(kLeft - 8.0) + "\" y=\"" +
           format_tick(py + 4.0) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">" +
           format_tick(sy) + "</text>\n";
  }
  svg += "  <text x=\"" + format_tick((kLeft + kRight) / 2.0) + "\" y=\"" +
         format_tick(kHeight - 16.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">samples consumed</text>\n";
  svg += "  <text x=\"22\" y=\"" + format_tick((kTop + kBottom) / 2.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 22 " +
         format_tick((kTop + kBottom) / 2.0) + ")\">training loss</text>\n";

  for (std::size_t r = 0; r < runs.size(); ++r) {
    const char* color = kPalette[r % kPaletteSize];
    std::string points;
    for (const RunLogRow& row : runs[r].rows) {
      const double loss = std::isfinite(row.train_loss)
                              ? std::min(row.train_loss, y_max)
                              : y_max;
      points += format_tick(to_x(static_cast<double>(row.samples_cum)));
      points += ',';
      points += format_tick(to_y(loss));
      points += ' ';
    }
    if (!points.empty()) points.pop_back();
    svg += "  <polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    const double ly = kTop + 18.0 * static_cast<double>(r);
    svg += "  <line x1=\"" + format_tick(kRight + 12.0) + "\" y1=\"" +
           format_tick(ly) + "\" x2=\"" + format_tick(kRight + 36.0) +
           "\" y2=\"" + format_tick(ly) + "\" stroke=\"" +
           std::string(color) + "\" stroke-width=\"2\"/>\n";
    svg += "  <text x=\"" + format_tick(kRight + 42.0) + "\" y=\"" +
           format_tick(ly + 4.0) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" +
           xml_escape(labels[r]) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace

ReportPaths write_report(const std::vector<RunLog>& runs,
                         const std::vector<std::string>& labels,
                         const std::filesystem::path& out_dir) {
  validate_inputs(runs, labels);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + out_dir.string() + ": " +
                  ec.message());
  }

  // Union of the cumulative-sample axes, one loss column per run.
  std::map<long long, std::vector<std::string>> rows;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const RunLogRow& row : runs[r].rows) {
      auto& cells = rows[row.samples_cum];
      cells.resize(runs.size());
      cells[r] = detail::format_double(row.train_loss);
    }
  }
  std::string csv = "samples_cum";
  for (const std::string& label : labels) {
    csv += ',';
    csv += label;
  }
  csv += '\n';
  for (auto& [samples, cells] : rows) {
    cells.resize(runs.size());
    csv += std::to_string(samples);
    for (const std::string& cell : cells) {
      csv += ',';
      csv += cell;
    }
    csv += '\n';
  }

  ReportPaths paths;
  paths.merged_csv = out_dir / "report.csv";
  paths.chart_svg = out_dir / "report.svg";
  detail::write_file(paths.merged_csv, csv);
  detail::write_file(paths.chart_svg, render_chart_svg(runs, labels));
  return paths;
}

std::vector<ThresholdEntry> samples_to_threshold(
    const std::vector<RunLog>& runs, const std::vector<std::string>& labels,
    double threshold) {
  validate_inputs(runs, labels);
  std::vector<ThresholdEntry> entries;
  entries.reserve(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    ThresholdEntry entry;
    entry.label = labels[r];
    entry.final_loss = runs[r].rows.back().train_loss;
    for (const RunLogRow& row : runs[r].rows) {
      if (row.train_loss <= threshold) {
        entry.reached = true;
        entry.samples = row.samples_cum;
        break;
      }
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace clip
