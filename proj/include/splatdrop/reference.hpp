#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "splatdrop/rasterizer.hpp"

// Serial, untiled compositor kept as a test oracle and benchmark baseline.
// Every pixel sorts all primitives by (depth, index) and composites them with
// no early termination.
namespace splatdrop::reference {

struct WeightedContributor {
  std::uint32_t source;
  double weight;
};

struct ReferenceRender {
  Image color;
  Image depth;
  Image final_transmittance;
  // Blend weights per pixel, row-major.
  std::vector<std::vector<WeightedContributor>> weights;
};

ReferenceRender render(const GaussianCloud& cloud, const Camera& cam,
                       std::span<const std::uint8_t> keep, const Eigen::Vector3d& background,
                       int sh_degree = -1);

}  // namespace splatdrop::reference
