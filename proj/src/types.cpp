#include "splatdrop/types.hpp"

#include <algorithm>

namespace splatdrop {

Precision parse_precision(const std::string& name) {
  if (name == "float32" || name == "f32") return Precision::Float32;
  if (name == "float64" || name == "f64") return Precision::Float64;
  throw InputError("unknown precision '" + name + "' (expected float32 or float64)");
}

std::string to_string(Precision p) { return p == Precision::Float32 ? "float32" : "float64"; }

Image::Image(int w, int h, int c, double fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, fill) {}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": image shape mismatch (" +
                                std::to_string(a.width) + "x" + std::to_string(a.height) + "x" +
                                std::to_string(a.channels) + " vs " + std::to_string(b.width) +
                                "x" + std::to_string(b.height) + "x" +
                                std::to_string(b.channels) + ")");
  }
}

Image clamped01(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace splatdrop
