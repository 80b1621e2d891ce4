#include "splatdrop/rng.hpp"

#include <cmath>
#include <numbers>

namespace splatdrop {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, Stream stream, std::uint64_t counter)
    : key_(mix64(mix64(seed) ^ mix64(static_cast<std::uint64_t>(stream) * 0xd1b54a32d192ed03ULL) ^
                 mix64(counter + 0x632be59bd9b4e019ULL))) {}

std::uint64_t CounterRng::next_u64() {
  return mix64(key_ ^ mix64(index_++));
}

double CounterRng::uniform() {
  // 53 random bits, shifted by half an ulp so 0 and 1 are never produced.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

}  // namespace splatdrop
