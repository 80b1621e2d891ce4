#include "splatdrop/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace splatdrop {

namespace {

// Errors surface as exceptions; keep libpng from also printing them.
void png_quiet_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }
void png_quiet_warning(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw InputError("cannot open '" + path + "'");
  return f;
}

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;  // row-major, big-endian samples for 16-bit
};

// `keep16` leaves 16-bit samples intact; otherwise everything is reduced to
// 8-bit RGB(A).
RawPng read_png(const std::string& path, bool keep16) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw InputError("'" + path + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_quiet_error, png_quiet_warning);
  if (!png) throw std::runtime_error("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  RawPng out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("corrupt or truncated PNG '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (keep16) {
    if (color != PNG_COLOR_TYPE_GRAY || depth != 16) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw InputError("'" + path + "' must be a 16-bit grayscale PNG");
    }
  } else {
    png_set_expand(png);
    if (depth == 16) png_set_scale_16(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_gray_to_rgb(png);
    }
  }
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::string& path, int width, int height, int channels, int bit_depth,
               const std::vector<std::uint8_t>& bytes) {
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_quiet_error, png_quiet_warning);
  if (!png) throw std::runtime_error("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed writing PNG '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(bytes.data() + stride * y);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

float read_float(const unsigned char* p, bool little) {
  std::uint32_t u = 0;
  if (little) {
    u = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  } else {
    u = p[3] | (p[2] << 8) | (p[1] << 16) | (static_cast<std::uint32_t>(p[0]) << 24);
  }
  return std::bit_cast<float>(u);
}

void check_dims(const std::string& path, int w, int h, int ew, int eh) {
  if ((ew > 0 && w != ew) || (eh > 0 && h != eh)) {
    std::ostringstream msg;
    msg << "depth map '" << path << "' is " << w << "x" << h << ", expected " << ew << "x" << eh;
    throw InputError(msg.str());
  }
}

}  // namespace

Image load_image(const std::string& path, const Eigen::Vector3d& background) {
  const RawPng raw = read_png(path, false);
  Image img(raw.width, raw.height, 3);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const std::uint8_t* p =
          raw.bytes.data() + (static_cast<std::size_t>(y) * raw.width + x) * raw.channels;
      const double a = raw.channels == 4 ? p[3] / 255.0 : 1.0;
      for (int c = 0; c < 3; ++c) {
        img.at(x, y, c) = a * (p[c] / 255.0) + (1.0 - a) * background[c];
      }
    }
  }
  return img;
}

void save_image(const std::string& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw std::invalid_argument("save_image supports 1 or 3 channels");
  }
  std::vector<std::uint8_t> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::isfinite(image.data[i]) ? std::clamp(image.data[i], 0.0, 1.0) : 0.0;
    bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  write_png(path, image.width, image.height, image.channels, 8, bytes);
}

Image load_depth(const std::string& path, int expected_width, int expected_height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in && magic[0] == 'P' && magic[1] == 'f') {
    int w = 0, h = 0;
    double scale = 0.0;
    in >> w >> h >> scale;
    if (!in || w <= 0 || h <= 0 || scale == 0.0) throw InputError("malformed PFM header in '" + path + "'");
    in.get();  // single whitespace byte before the raster
    check_dims(path, w, h, expected_width, expected_height);
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
      throw InputError("truncated PFM raster in '" + path + "'");
    }
    const bool little = scale < 0.0;
    Image depth(w, h, 1);
    for (int row = 0; row < h; ++row) {
      for (int x = 0; x < w; ++x) {
        // PFM stores rows bottom to top.
        depth.at(x, h - 1 - row) = read_float(buf.data() + (static_cast<std::size_t>(row) * w + x) * 4, little);
      }
    }
    return depth;
  }
  in.close();
  const RawPng raw = read_png(path, true);
  check_dims(path, raw.width, raw.height, expected_width, expected_height);
  std::ifstream side(path + ".scale");
  double scale = 0.0;
  if (!(side >> scale) || !(scale > 0.0)) {
    throw InputError("missing or invalid scale sidecar '" + path + ".scale'");
  }
  Image depth(raw.width, raw.height, 1);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    const unsigned v = (raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1];
    depth.data[i] = scale * v / 65535.0;
  }
  return depth;
}

void save_pfm(const std::string& path, const Image& depth) {
  if (depth.channels != 1) throw std::invalid_argument("save_pfm expects one channel");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << "Pf\n" << depth.width << " " << depth.height << "\n-1.0\n";
  for (int row = 0; row < depth.height; ++row) {
    for (int x = 0; x < depth.width; ++x) {
      const std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(depth.at(x, depth.height - 1 - row)));
      const unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                                  static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
      out.write(reinterpret_cast<const char*>(b), 4);
    }
  }
}

void save_depth_png16(const std::string& path, const Image& depth, double scale) {
  if (depth.channels != 1) throw std::invalid_argument("save_depth_png16 expects one channel");
  if (!(scale > 0.0)) throw std::invalid_argument("depth scale must be positive");
  std::vector<std::uint8_t> bytes(depth.data.size() * 2);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    const double v = std::clamp(depth.data[i] / scale, 0.0, 1.0);
    const unsigned q = static_cast<unsigned>(std::lround(v * 65535.0));
    bytes[2 * i] = static_cast<std::uint8_t>(q >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
  }
  write_png(path, depth.width, depth.height, 1, 16, bytes);
  std::ofstream side(path + ".scale");
  side.precision(17);
  side << scale << "\n";
}

}  // namespace splatdrop
