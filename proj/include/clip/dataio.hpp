#pragma once

#include "clip/types.hpp"

#include <filesystem>

namespace clip {

// On-disk layout: a manifest.json listing one entry per sample, with the
// image as an 8-bit binary PGM, dot annotations as "x y" text lines, and an
// optional cached density grid as a raw little-endian float64 blob.
//
// PGM stores round(v * 255) per pixel, so only intensities already on the
// 8-bit grid (k / 255) survive a save/load cycle unchanged. Everything the
// toolkit generates is quantized accordingly before saving.

ImageGrid read_pgm(const std::filesystem::path& path);
void write_pgm(const ImageGrid& image, const std::filesystem::path& path);

// Blob layout: magic "DGRD", then uint32 rows, uint32 cols, uint32 reserved
// (16-byte header), then rows*cols float64 values in row-major order, all
// little-endian.
DensityGrid read_density_blob(const std::filesystem::path& path);
void write_density_blob(const DensityGrid& density,
                        const std::filesystem::path& path);

DotAnnotations read_dots(const std::filesystem::path& path);
void write_dots(const DotAnnotations& dots,
                const std::filesystem::path& path);

// Reads the manifest and every file it references, then validates the result.
// Never mutates anything on disk.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes <id>.pgm / <id>.txt / <id>.dgrd per sample plus manifest.json into
// directory (created if missing) and returns the manifest path.
std::filesystem::path save_dataset(const Dataset& dataset,
                                   const std::filesystem::path& directory);

}  // namespace clip
