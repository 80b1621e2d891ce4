#include "splatdrop/rdr.hpp"

#include <cmath>
#include <stdexcept>

namespace splatdrop {

std::size_t DropoutMask::kept() const {
  std::size_t n = 0;
  for (auto b : bits) n += b ? 1 : 0;
  return n;
}

void RdrConfig::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw InputError("rdr.rate must lie in [0, 1]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("rdr.lambda must be >= 0");
}

DropoutMask sample_mask(std::size_t n, double rate, std::uint64_t seed, std::uint64_t iteration,
                        Stream stream) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1]");
  }
  DropoutMask mask;
  mask.rate = rate;
  mask.seed = seed;
  mask.iteration = iteration;
  mask.bits.resize(n);
  CounterRng rng(seed, stream, iteration);
  for (std::size_t i = 0; i < n; ++i) mask.bits[i] = rng.uniform() > rate ? 1 : 0;
  return mask;
}

LossValue rdr_loss(const Image& full, const Image& sub) {
  require_same_shape(full, sub, "rdr_loss");
  LossValue out;
  out.value = l1(full, sub) + (1.0 - ssim(full, sub));
  out.gradient = ssim_gradient(full, sub, -1.0);
  const double n = static_cast<double>(std::max<std::size_t>(1, sub.data.size()));
  for (std::size_t i = 0; i < sub.data.size(); ++i) {
    const double d = sub.data[i] - full.data[i];
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    out.gradient.data[i] += sign / n;
  }
  return out;
}

RenderOutput sub_model_render(const GaussianCloud& cloud, const Camera& cam,
                              const DropoutMask& mask, const RenderOptions& options) {
  if (mask.size() != cloud.size()) {
    throw std::invalid_argument("dropout mask length differs from the cloud size");
  }
  return render(cloud, cam, mask.bits, options);
}

Image ensemble_render(const GaussianCloud& cloud, const Camera& cam, std::size_t k, double rate,
                      std::uint64_t seed, const RenderOptions& options) {
  if (k == 0) throw std::invalid_argument("ensemble size must be positive");
  RenderOptions opts = options;
  opts.keep_record = false;
  Image acc;
  for (std::size_t j = 0; j < k; ++j) {
    const DropoutMask mask = sample_mask(cloud.size(), rate, seed, j, Stream::Ensemble);
    const RenderOutput out = render(cloud, cam, mask.bits, opts);
    if (j == 0) {
      acc = out.color;
    } else {
      for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += out.color.data[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(k);
  for (double& v : acc.data) v *= inv;
  return acc;
}

}  // namespace splatdrop
