#include "splatdrop/ply.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <vector>

#include "splatdrop/types.hpp"

namespace splatdrop {

namespace {

std::vector<std::string> property_names(int sh_degree) {
  std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  const int rest = 3 * (sh_coeff_count(sh_degree) - 1);
  for (int i = 0; i < rest; ++i) names.push_back("f_rest_" + std::to_string(i));
  names.push_back("opacity");
  for (int i = 0; i < 3; ++i) names.push_back("scale_" + std::to_string(i));
  for (int i = 0; i < 4; ++i) names.push_back("rot_" + std::to_string(i));
  return names;
}

int type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "float" || t == "int32" || t == "uint32" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

void put_float(std::string& out, double v) {
  const std::uint32_t u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  const char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                     static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
  out.append(b, 4);
}

double get_value(const unsigned char* p, const std::string& type) {
  auto u32 = [&] {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  };
  if (type == "float" || type == "float32") return std::bit_cast<float>(u32());
  if (type == "double" || type == "float64") {
    std::uint64_t u = 0;
    for (int k = 7; k >= 0; --k) u = (u << 8) | p[k];
    return std::bit_cast<double>(u);
  }
  throw InputError("unsupported PLY property type '" + type + "' for a Gaussian field");
}

}  // namespace

std::string ply_encode(const GaussianCloud& cloud) {
  const int deg = cloud.sh_degree();
  const int rest_coeffs = sh_coeff_count(deg) - 1;
  const auto names = property_names(deg);
  std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                    std::to_string(cloud.size()) + "\n";
  for (const auto& n : names) out += "property float " + n + "\n";
  out += "end_header\n";
  out.reserve(out.size() + cloud.size() * names.size() * 4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double* m = cloud.params.row(Param::Mean, i);
    for (int k = 0; k < 3; ++k) put_float(out, m[k]);
    for (int k = 0; k < 3; ++k) put_float(out, 0.0);
    const double* dc = cloud.params.row(Param::ShDc, i);
    for (int k = 0; k < 3; ++k) put_float(out, dc[k]);
    const double* rest = cloud.params.row(Param::ShRest, i);
    for (int c = 0; c < 3; ++c) {
      for (int k = 0; k < rest_coeffs; ++k) put_float(out, rest[k * 3 + c]);
    }
    put_float(out, cloud.params[Param::OpacityLogit][i]);
    const double* s = cloud.params.row(Param::LogScale, i);
    for (int k = 0; k < 3; ++k) put_float(out, s[k]);
    const double* q = cloud.params.row(Param::Rotation, i);
    for (int k = 0; k < 4; ++k) put_float(out, q[k]);
  }
  return out;
}

void ply_write(const GaussianCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  const std::string bytes = ply_encode(cloud);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing '" + path + "'");
}

GaussianCloud ply_decode(const std::string& bytes, double scene_extent) {
  const std::string end_marker = "end_header\n";
  const std::size_t header_end = bytes.find(end_marker);
  if (bytes.rfind("ply\n", 0) != 0 || header_end == std::string::npos) {
    throw InputError("not a PLY file (missing magic or end_header)");
  }
  std::istringstream header(bytes.substr(0, header_end));
  std::string line;
  std::size_t count = 0;
  bool in_vertex = false, seen_vertex = false, binary_le = false;
  struct Prop {
    std::string name, type;
    std::size_t offset;
  };
  std::vector<Prop> props;
  std::size_t stride = 0;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (word == "element") {
      std::string name;
      ls >> name;
      if (seen_vertex) throw InputError("PLY elements after 'vertex' are not supported");
      in_vertex = name == "vertex";
      if (!in_vertex) throw InputError("PLY element '" + name + "' precedes 'vertex'");
      seen_vertex = true;
      if (!(ls >> count)) throw InputError("malformed PLY vertex count");
    } else if (word == "property") {
      if (!in_vertex) continue;
      std::string type, name;
      ls >> type >> name;
      if (type == "list") throw InputError("PLY list properties are not supported");
      const int sz = type_size(type);
      if (sz == 0) throw InputError("unknown PLY property type '" + type + "'");
      props.push_back({name, type, stride});
      stride += sz;
    }
  }
  if (!binary_le) throw InputError("only binary_little_endian PLY is supported");
  if (!seen_vertex) throw InputError("PLY has no vertex element");

  std::map<std::string, const Prop*> by_name;
  for (const auto& p : props) by_name[p.name] = &p;
  int rest = 0;
  while (by_name.count("f_rest_" + std::to_string(rest))) ++rest;
  int degree = -1;
  for (int d = 0; d <= 3; ++d) {
    if (3 * (sh_coeff_count(d) - 1) == rest) degree = d;
  }
  if (degree < 0) throw InputError("PLY has " + std::to_string(rest) + " f_rest fields, not a valid SH degree");
  std::vector<std::string> missing;
  for (const auto& n : property_names(degree)) {
    if (n[0] == 'n' && n.size() == 2) continue;  // normals are optional
    if (!by_name.count(n)) missing.push_back(n);
  }
  if (!missing.empty()) {
    std::string msg = "PLY is missing properties:";
    for (const auto& m : missing) msg += " " + m;
    throw InputError(msg);
  }
  const std::size_t data_begin = header_end + end_marker.size();
  if (bytes.size() - data_begin < count * stride) throw InputError("truncated PLY vertex data");

  GaussianCloud cloud(count, degree, scene_extent);
  const int rest_coeffs = sh_coeff_count(degree) - 1;
  const auto* base = reinterpret_cast<const unsigned char*>(bytes.data() + data_begin);
  auto field = [&](std::size_t i, const std::string& name) {
    const Prop* p = by_name.at(name);
    return get_value(base + i * stride + p->offset, p->type);
  };
  for (std::size_t i = 0; i < count; ++i) {
    double* m = cloud.params.row(Param::Mean, i);
    m[0] = field(i, "x");
    m[1] = field(i, "y");
    m[2] = field(i, "z");
    double* dc = cloud.params.row(Param::ShDc, i);
    for (int k = 0; k < 3; ++k) dc[k] = field(i, "f_dc_" + std::to_string(k));
    double* r = cloud.params.row(Param::ShRest, i);
    for (int c = 0; c < 3; ++c) {
      for (int k = 0; k < rest_coeffs; ++k) {
        r[k * 3 + c] = field(i, "f_rest_" + std::to_string(c * rest_coeffs + k));
      }
    }
    cloud.params[Param::OpacityLogit][i] = field(i, "opacity");
    double* s = cloud.params.row(Param::LogScale, i);
    for (int k = 0; k < 3; ++k) s[k] = field(i, "scale_" + std::to_string(k));
    double* q = cloud.params.row(Param::Rotation, i);
    for (int k = 0; k < 4; ++k) q[k] = field(i, "rot_" + std::to_string(k));
  }
  return cloud;
}

GaussianCloud ply_read(const std::string& path, double scene_extent) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ply_decode(bytes, scene_extent);
}

}  // namespace splatdrop
