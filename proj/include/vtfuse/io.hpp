#pragma once

// File formats: PFM depth/variance rasters, PGM masks, PPM color images,
// ASCII PLY touch and splat clouds, camera and sparse-depth text files.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vtfuse/align.hpp"
#include "vtfuse/gpis.hpp"
#include "vtfuse/image.hpp"
#include "vtfuse/splat.hpp"

namespace vtf::io {

/// Writes via a sibling temp file and rename so readers never see partial data.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

// "Pf" grayscale, little-endian (scale -1.0), rows stored bottom-up.
std::string encode_pfm(const ImageD& img);
ImageD decode_pfm(std::string_view bytes);
void write_pfm(const std::filesystem::path& path, const ImageD& img);
ImageD read_pfm(const std::filesystem::path& path);

// Binary P5 / P6, 8-bit.
void write_pgm(const std::filesystem::path& path, const Mask& img);
Mask read_pgm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ImageRgb& img);
ImageRgb read_ppm(const std::filesystem::path& path);

// ASCII PLY, properties x y z nx ny nz. The sensor pose rides in a
// "comment sensor_pose" header line (12 numbers, row-major 3x4).
void write_touch_ply(const std::filesystem::path& path, const TouchReading& touch);
/// Reads one file; a merged multi-touch file yields a single reading.
TouchReading read_touch_ply(const std::filesystem::path& path);
/// Every *.ply in a directory, in lexicographic filename order.
std::vector<TouchReading> read_touch_dir(const std::filesystem::path& dir);

// ASCII PLY, properties x y z r g b opacity radius (opacity is the mapped alpha).
void write_splat_ply(const std::filesystem::path& path, const SplatCloud& cloud);
SplatCloud read_splat_ply(const std::filesystem::path& path);

struct NamedCamera {
  std::string name;
  CameraModel camera;
};

// cameras.txt:
//   view <name> <width> <height> <fx> <fy> <cx> <cy>
//   followed by four rows of the 4x4 world-from-camera matrix.
std::string encode_cameras(const std::vector<NamedCamera>& cams);
std::vector<NamedCamera> decode_cameras(std::string_view text);
void write_cameras(const std::filesystem::path& path, const std::vector<NamedCamera>& cams);
std::vector<NamedCamera> read_cameras(const std::filesystem::path& path);

// Sparse depth: one "u v depth" row per sample.
void write_sparse(const std::filesystem::path& path, const SparseDepth& sparse);
SparseDepth read_sparse(const std::filesystem::path& path);

/// Round-trippable decimal formatting for text artifacts.
std::string fmt_double(double v);

}  // namespace vtf::io
