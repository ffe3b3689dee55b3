#include "clip/dataio.hpp"

#include "bytes.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <system_error>
#include <unordered_set>
#include <vector>

namespace clip {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using detail::append_f64le;
using detail::append_u32le;
using detail::format_double;
using detail::read_f64le;
using detail::read_file;
using detail::read_u32le;
using detail::write_file;

// Skips whitespace and "#" comment lines inside a PGM header.
std::size_t next_header_token(const std::string& bytes, std::size_t pos,
                              const fs::path& path, std::string& token) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() &&
         !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    ++pos;
  }
  if (start == pos) {
    throw FormatError(path.string() + ": truncated PGM header");
  }
  token = bytes.substr(start, pos - start);
  return pos;
}

long parse_long(const std::string& token, const fs::path& path) {
  long value = 0;
  const auto res =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw FormatError(path.string() + ": bad PGM header field '" + token +
                      "'");
  }
  return value;
}

const std::string kDensityMagic = "DGRD";

}  // namespace

void validate_sample(const Sample& sample) {
  if (sample.id.empty()) {
    throw ValidationError("sample with empty id");
  }
  if (sample.id.find('/') != std::string::npos ||
      sample.id.find('\\') != std::string::npos) {
    throw ValidationError("sample id '" + sample.id +
                          "' contains a path separator");
  }
  if (sample.image.rows() < 1 || sample.image.cols() < 1) {
    throw ValidationError("sample '" + sample.id + "' has an empty image");
  }
  if (sample.image.minCoeff() < 0.0 || sample.image.maxCoeff() > 1.0) {
    throw ValidationError("sample '" + sample.id +
                          "' has intensities outside [0, 1]");
  }
  if (!dots_in_bounds(sample.dots, sample.image.rows(), sample.image.cols())) {
    throw ValidationError("sample '" + sample.id +
                          "' has a dot outside the image bounds");
  }
  if (sample.density.has_value()) {
    if (sample.density->rows() != sample.image.rows() ||
        sample.density->cols() != sample.image.cols()) {
      throw ValidationError("sample '" + sample.id +
                            "' density dimensions do not match the image");
    }
    if (sample.density->minCoeff() < 0.0) {
      throw ValidationError("sample '" + sample.id +
                            "' has negative density values");
    }
  }
}

void validate_dataset(const Dataset& dataset) {
  if (!(dataset.sigma > 0.0)) {
    throw ValidationError("dataset sigma must be positive");
  }
  std::unordered_set<std::string> seen;
  for (const Sample& s : dataset.samples) {
    validate_sample(s);
    if (!seen.insert(s.id).second) {
      throw ValidationError("duplicate sample id '" + s.id + "'");
    }
  }
}

ImageGrid read_pgm(const fs::path& path) {
  const std::string bytes = read_file(path);
  std::string token;
  std::size_t pos = next_header_token(bytes, 0, path, token);
  if (token != "P5") {
    throw FormatError(path.string() + ": expected binary PGM magic P5, got '" +
                      token + "'");
  }
  pos = next_header_token(bytes, pos, path, token);
  const long width = parse_long(token, path);
  pos = next_header_token(bytes, pos, path, token);
  const long height = parse_long(token, path);
  pos = next_header_token(bytes, pos, path, token);
  const long maxval = parse_long(token, path);
  if (width < 1 || height < 1) {
    throw FormatError(path.string() + ": non-positive PGM dimensions");
  }
  if (maxval != 255) {
    throw FormatError(path.string() + ": only 8-bit PGM (maxval 255) is " +
                      "supported, got maxval " + std::to_string(maxval));
  }
  pos += 1;  // single whitespace byte after maxval
  const std::size_t need = static_cast<std::size_t>(width) *
                           static_cast<std::size_t>(height);
  if (pos > bytes.size() || bytes.size() - pos < need) {
    throw FormatError(path.string() + ": truncated PGM pixel data");
  }
  ImageGrid image(height, width);
  for (long r = 0; r < height; ++r) {
    for (long c = 0; c < width; ++c) {
      const auto raw = static_cast<unsigned char>(bytes[pos++]);
      image(r, c) = static_cast<double>(raw) / 255.0;
    }
  }
  return image;
}

void write_pgm(const ImageGrid& image, const fs::path& path) {
  if (image.rows() < 1 || image.cols() < 1) {
    throw std::invalid_argument("cannot write an empty image");
  }
  if (image.minCoeff() < 0.0 || image.maxCoeff() > 1.0) {
    throw ValidationError("image intensities outside [0, 1]: " +
                          path.string());
  }
  std::string bytes = "P5\n" + std::to_string(image.cols()) + " " +
                      std::to_string(image.rows()) + "\n255\n";
  bytes.reserve(bytes.size() + static_cast<std::size_t>(image.size()));
  for (Eigen::Index r = 0; r < image.rows(); ++r) {
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      bytes.push_back(static_cast<char>(
          static_cast<unsigned char>(std::lround(image(r, c) * 255.0))));
    }
  }
  write_file(path, bytes);
}

DensityGrid read_density_blob(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16 || bytes.substr(0, 4) != kDensityMagic) {
    throw FormatError(path.string() + ": not a density blob");
  }
  const std::uint32_t rows = read_u32le(bytes, 4);
  const std::uint32_t cols = read_u32le(bytes, 8);
  if (rows < 1 || cols < 1) {
    throw FormatError(path.string() + ": non-positive density dimensions");
  }
  const std::size_t need =
      16 + static_cast<std::size_t>(rows) * cols * sizeof(double);
  if (bytes.size() != need) {
    throw FormatError(path.string() + ": density blob size mismatch, " +
                      "expected " + std::to_string(need) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  DensityGrid density(rows, cols);
  std::size_t pos = 16;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      density(r, c) = read_f64le(bytes, pos);
      pos += sizeof(double);
    }
  }
  return density;
}

void write_density_blob(const DensityGrid& density, const fs::path& path) {
  if (density.rows() < 1 || density.cols() < 1) {
    throw std::invalid_argument("cannot write an empty density grid");
  }
  std::string bytes;
  bytes.reserve(16 + static_cast<std::size_t>(density.size()) * 8);
  bytes += kDensityMagic;
  append_u32le(bytes, static_cast<std::uint32_t>(density.rows()));
  append_u32le(bytes, static_cast<std::uint32_t>(density.cols()));
  append_u32le(bytes, 0);
  for (Eigen::Index r = 0; r < density.rows(); ++r) {
    for (Eigen::Index c = 0; c < density.cols(); ++c) {
      append_f64le(bytes, density(r, c));
    }
  }
  write_file(path, bytes);
}

DotAnnotations read_dots(const fs::path& path) {
  const std::string bytes = read_file(path);
  DotAnnotations dots;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) end = bytes.size();
    std::string line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    Dot dot;
    const char* begin = line.data();
    const char* stop = line.data() + line.size();
    auto res = std::from_chars(begin, stop, dot.x);
    if (res.ec != std::errc() || res.ptr == stop || *res.ptr != ' ') {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'x y'");
    }
    res = std::from_chars(res.ptr + 1, stop, dot.y);
    if (res.ec != std::errc() || res.ptr != stop) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'x y'");
    }
    dots.push_back(dot);
  }
  return dots;
}

void write_dots(const DotAnnotations& dots, const fs::path& path) {
  std::string bytes;
  for (const Dot& d : dots) {
    bytes += format_double(d.x);
    bytes += ' ';
    bytes += format_double(d.y);
    bytes += '\n';
  }
  write_file(path, bytes);
}

Dataset load_dataset(const fs::path& manifest_path) {
  const std::string text = read_file(manifest_path);
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  if (!manifest.is_object() || !manifest.contains("sigma") ||
      !manifest.contains("samples") || !manifest["samples"].is_array()) {
    throw FormatError(manifest_path.string() +
                      ": manifest must contain sigma and a samples array");
  }
  const fs::path base = manifest_path.parent_path();
  Dataset ds;
  try {
    ds.sigma = manifest["sigma"].get<double>();
    for (const json& entry : manifest["samples"]) {
      Sample s;
      s.id = entry.at("id").get<std::string>();
      s.image = read_pgm(base / entry.at("image").get<std::string>());
      s.dots = read_dots(base / entry.at("dots").get<std::string>());
      if (entry.contains("density") && !entry["density"].is_null()) {
        s.density = read_density_blob(base / entry["density"].get<std::string>());
      }
      ds.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  validate_dataset(ds);
  return ds;
}

fs::path save_dataset(const Dataset& dataset, const fs::path& directory) {
  validate_dataset(dataset);
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) {
    throw IoError("cannot create directory " + directory.string() + ": " +
                  ec.message());
  }
  json manifest;
  manifest["sigma"] = dataset.sigma;
  manifest["samples"] = json::array();
  for (const Sample& s : dataset.samples) {
    const std::string image_name = s.id + ".pgm";
    const std::string dots_name = s.id + ".txt";
    write_pgm(s.image, directory / image_name);
    write_dots(s.dots, directory / dots_name);
    json entry;
    entry["id"] = s.id;
    entry["image"] = image_name;
    entry["dots"] = dots_name;
    if (s.density.has_value()) {
      const std::string density_name = s.id + ".dgrd";
      write_density_blob(*s.density, directory / density_name);
      entry["density"] = density_name;
    } else {
      entry["density"] = nullptr;
    }
    manifest["samples"].push_back(std::move(entry));
  }
  const fs::path manifest_path = directory / "manifest.json";
  write_file(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

}  // namespace clip
