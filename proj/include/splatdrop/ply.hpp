#pragma once

#include <string>

#include "splatdrop/gaussian_model.hpp"

namespace splatdrop {

// Binary little-endian PLY using the field layout common to Gaussian splatting
// viewers: x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3.
// Values are written as 32-bit floats.
void ply_write(const GaussianCloud& cloud, const std::string& path);
std::string ply_encode(const GaussianCloud& cloud);

// Throws InputError listing any missing property or on truncated data.
GaussianCloud ply_read(const std::string& path, double scene_extent = 1.0);
GaussianCloud ply_decode(const std::string& bytes, double scene_extent = 1.0);

}  // namespace splatdrop
