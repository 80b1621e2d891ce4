#include "splatdrop/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace splatdrop {

AdamState AdamState::for_cloud(const GaussianCloud& cloud) {
  AdamState s;
  s.m = ParamBlock::zeros(cloud.size(), cloud.sh_degree());
  s.v = ParamBlock::zeros(cloud.size(), cloud.sh_degree());
  return s;
}

void AdamState::remap(std::span<const std::int64_t> source_rows) {
  m = m.gather(source_rows);
  v = v.gather(source_rows);
}

void adam_step(GaussianCloud& cloud, const ParamBlock& grads, AdamState& state,
               const GroupRates& lr) {
  const std::size_t n = cloud.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n ||
      grads.sh_degree != cloud.sh_degree() || state.m.sh_degree != cloud.sh_degree()) {
    throw std::invalid_argument("adam_step: gradient or state shape differs from the cloud");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2, eps = state.eps;
  for (Param p : kAllParams) {
    std::vector<double>& x = cloud.params[p];
    std::vector<double>& m = state.m[p];
    std::vector<double>& v = state.v[p];
    const std::vector<double>& g = grads[p];
    const double rate = lr[static_cast<int>(p)];
    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      x[i] -= rate * mh / (std::sqrt(vh) + eps);
    }
  }
  cloud.normalize_rotations();
}

}  // namespace splatdrop
