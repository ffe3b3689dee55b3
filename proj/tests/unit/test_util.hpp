#pragma once

#include "clip/rng.hpp"
#include "clip/types.hpp"

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

namespace clip::testing {

// Unique scratch directory, removed (with contents) at scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("clip-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline Grid random_grid(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                        double scale = 1.0) {
  Grid g(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      g(r, c) = scale * uniform_unit(rng);
    }
  }
  return g;
}

inline DotAnnotations random_dots(Rng& rng, int count, Eigen::Index height,
                                  Eigen::Index width) {
  DotAnnotations dots;
  dots.reserve(count);
  for (int i = 0; i < count; ++i) {
    dots.push_back({uniform_unit(rng) * static_cast<double>(width),
                    uniform_unit(rng) * static_cast<double>(height)});
  }
  return dots;
}

}  // namespace clip::testing
