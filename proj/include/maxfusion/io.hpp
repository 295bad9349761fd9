#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "maxfusion/tensor.hpp"

namespace maxfusion {

// MXFT layout, little-endian throughout:
//   "MXFT" | version u32 | dtype u32 (0 = f32) | ndim u32 (3) | C H W u32 | C*H*W f32
inline constexpr std::uint32_t kMxftVersion = 1;
inline constexpr std::uint32_t kMxftDtypeF32 = 0;
inline constexpr std::size_t kMxftHeaderBytes = 28;

std::size_t write_tensor(const FeatureMapf& map, std::ostream& out);
FeatureMapf read_tensor(std::istream& in);

void write_tensor_file(const FeatureMapf& map, const std::filesystem::path& path);
FeatureMapf read_tensor_file(const std::filesystem::path& path);

/// C = 1 views used when exporting maps as MXFT.
FeatureMapf to_feature_map(const SpatialMap& map);
FeatureMapf to_feature_map(const Field& field);
/// Stores the numeric tag: -1 averaged, b for Winner(b).
FeatureMapf to_feature_map(const SelectionMask& mask);

/// Binary (P5) graymap.
void write_pgm(std::ostream& out, Index height, Index width, const std::vector<std::uint8_t>& pixels);
void write_pgm_file(const std::filesystem::path& path, Index height, Index width,
                    const std::vector<std::uint8_t>& pixels);

/// Min-max normalizes to [0, 255]; a constant field maps to all zeros.
std::vector<std::uint8_t> to_gray(const Field& field);
/// Averaged = 0, Winner(b) = 64 + 64 b clipped to 255.
std::vector<std::uint8_t> to_gray(const SelectionMask& mask);

void write_pgm_file(const std::filesystem::path& path, const Field& field);
void write_pgm_file(const std::filesystem::path& path, const SelectionMask& mask);

}  // namespace maxfusion
