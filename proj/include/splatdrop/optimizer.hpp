#pragma once

#include <array>
#include <cstdint>

#include "splatdrop/gaussian_model.hpp"

namespace splatdrop {

struct AdamState {
  ParamBlock m;
  ParamBlock v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;

  static AdamState for_cloud(const GaussianCloud& cloud);
  // Re-index the moments after a structural edit; new rows start at zero.
  void remap(std::span<const std::int64_t> source_rows);
  bool operator==(const AdamState&) const = default;
};

using GroupRates = std::array<double, kParamGroups>;

// One bias-corrected Adam update of every group, then quaternion
// renormalisation. Throws std::invalid_argument on shape mismatch.
void adam_step(GaussianCloud& cloud, const ParamBlock& grads, AdamState& state,
               const GroupRates& lr);

}  // namespace splatdrop
