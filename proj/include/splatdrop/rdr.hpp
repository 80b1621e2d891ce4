#pragma once

#include <cstdint>
#include <vector>

#include "splatdrop/metrics.hpp"
#include "splatdrop/rasterizer.hpp"

namespace splatdrop {

// Per-primitive keep bits for one sub-model render. Regenerating from
// (seed, iteration, rate, size) reproduces the bits.
struct DropoutMask {
  std::vector<std::uint8_t> bits;  // 1 = kept
  double rate = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;

  std::size_t size() const { return bits.size(); }
  std::size_t kept() const;
};

struct RdrConfig {
  bool enabled = true;
  double rate = 0.4;
  double lambda = 0.2;

  void validate() const;
};

// Keeps each primitive iff z > p with z ~ U(0, 1). Throws std::invalid_argument
// for p outside [0, 1].
DropoutMask sample_mask(std::size_t n, double rate, std::uint64_t seed, std::uint64_t iteration,
                        Stream stream = Stream::Dropout);

// mean |C - C_sub| + (1 - SSIM(C, C_sub)); the gradient is with respect to
// C_sub only, the full render acting as a constant target.
LossValue rdr_loss(const Image& full, const Image& sub);

// Masked render with unmodified opacities (no 1/(1-p) rescaling).
RenderOutput sub_model_render(const GaussianCloud& cloud, const Camera& cam,
                              const DropoutMask& mask, const RenderOptions& options = {});

// Pixel-wise mean of k independent sub-model renders. Throws
// std::invalid_argument for k == 0.
Image ensemble_render(const GaussianCloud& cloud, const Camera& cam, std::size_t k, double rate,
                      std::uint64_t seed, const RenderOptions& options = {});

}  // namespace splatdrop
