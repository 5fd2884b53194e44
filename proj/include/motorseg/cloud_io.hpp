#pragma once

// Binary point cloud files: magic "MPC1", little-endian u32 count, then per
// point f32 x, f32 y, f32 z, u8 label.

#include "motorseg/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace motorseg {

std::vector<char> encode_mpc(const PointCloud& cloud);
/// Throws ParseError with the failing byte offset.
PointCloud decode_mpc(const std::vector<char>& bytes);

/// Points are stored as f32; labels are required (zero-filled when absent).
void write_mpc(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_mpc(const std::filesystem::path& path);

}  // namespace motorseg
