#pragma once

#include <cstdint>

namespace splatdrop {

// Independent random streams. Each draw site keys its generator by
// (seed, stream, counter) so sequences are replayable without carried state.
enum class Stream : std::uint64_t {
  Init = 1,
  ViewOrder = 2,
  Dropout = 3,
  Split = 4,
  Ess = 5,
  Ensemble = 6,
  Synthetic = 7,
  Test = 8,
};

// Counter-based generator: output n is a bijective hash of (key, n).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Stream stream, std::uint64_t counter = 0);

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t key_;
  std::uint64_t index_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace splatdrop
