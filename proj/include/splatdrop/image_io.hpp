#pragma once

#include <Eigen/Dense>
#include <string>

#include "splatdrop/types.hpp"

namespace splatdrop {

// 8-bit PNG to [0,1] RGB. Alpha, when present, is composited over `background`.
Image load_image(const std::string& path,
                 const Eigen::Vector3d& background = Eigen::Vector3d::Zero());

// Writes 1- or 3-channel images as 8-bit PNG after clamping to [0,1].
void save_image(const std::string& path, const Image& image);

// Single-channel depth map. Accepts little-endian PFM ("Pf") or a 16-bit
// grayscale PNG with a sidecar "<path>.scale" holding the metric value of
// 65535. When expected dimensions are positive they are enforced.
Image load_depth(const std::string& path, int expected_width = 0, int expected_height = 0);

void save_pfm(const std::string& path, const Image& depth);
void save_depth_png16(const std::string& path, const Image& depth, double scale);

}  // namespace splatdrop
