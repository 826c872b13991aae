#pragma once

#include <string>

#include "crackfield/imaging.hpp"

namespace crackfield {

// CFVOL1 container: 64-byte header (magic "CFVOL1", dims as three u32 LE,
// voxel sizes as three f64 LE in µm, channel tag byte, zero padding), then
// nx*ny*nz u16 LE intensities, x-fastest. Round trips are bitwise exact.
VoxelVolume read_raw_volume(const std::string& path);
void write_raw_volume(const VoxelVolume& volume, const std::string& path);

} // namespace crackfield
