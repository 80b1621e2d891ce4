#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatdrop {

// Raised for malformed inputs: files, configs, datasets. The CLI maps it to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when training cannot continue (e.g. every primitive was pruned).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Precision { Float32, Float64 };

Precision parse_precision(const std::string& name);
std::string to_string(Precision p);

// Interleaved H x W x C image of doubles, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0);

  double& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool empty() const { return data.empty(); }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// Throws std::invalid_argument naming `what` when shapes differ.
void require_same_shape(const Image& a, const Image& b, const char* what);

// Copy with every value clamped to [0, 1].
Image clamped01(const Image& img);

}  // namespace splatdrop
