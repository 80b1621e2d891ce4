#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "splatdrop/rng.hpp"

namespace splatdrop {

// Parameter groups of a primitive. Each group is stored as one flat array
// with a fixed number of values per primitive.
enum class Param : int { Mean = 0, LogScale, Rotation, OpacityLogit, ShDc, ShRest };
inline constexpr int kParamGroups = 6;
inline constexpr std::array<Param, kParamGroups> kAllParams = {
    Param::Mean, Param::LogScale, Param::Rotation, Param::OpacityLogit, Param::ShDc, Param::ShRest};

const char* param_name(Param p);

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

// Struct-of-arrays table of per-primitive values. Used for the cloud itself,
// its gradients and the optimizer moments so structural edits apply uniformly.
struct ParamBlock {
  int sh_degree = 0;
  std::array<std::vector<double>, kParamGroups> groups;

  static ParamBlock zeros(std::size_t n, int sh_degree);

  int width(Param p) const;
  std::size_t size() const { return groups[0].size() / 3; }

  std::vector<double>& operator[](Param p) { return groups[static_cast<int>(p)]; }
  const std::vector<double>& operator[](Param p) const { return groups[static_cast<int>(p)]; }

  double* row(Param p, std::size_t i) { return (*this)[p].data() + i * width(p); }
  const double* row(Param p, std::size_t i) const { return (*this)[p].data() + i * width(p); }

  // New block whose row k copies row rows[k]; a negative index yields a zero row.
  ParamBlock gather(std::span<const std::int64_t> rows) const;
  void set_zero();
  bool operator==(const ParamBlock& o) const = default;
};

// Trainable scene: a set of anisotropic Gaussians plus the scene extent used
// to scale learning rates and size thresholds.
struct GaussianCloud {
  ParamBlock params;
  double scene_extent = 1.0;

  GaussianCloud() = default;
  GaussianCloud(std::size_t n, int sh_degree, double extent = 1.0);

  std::size_t size() const { return params.size(); }
  bool empty() const { return size() == 0; }
  int sh_degree() const { return params.sh_degree; }

  Eigen::Vector3d mean(std::size_t i) const { return Eigen::Vector3d(params.row(Param::Mean, i)); }
  Eigen::Vector3d log_scale(std::size_t i) const {
    return Eigen::Vector3d(params.row(Param::LogScale, i));
  }
  // (w, x, y, z)
  Eigen::Vector4d rotation(std::size_t i) const {
    return Eigen::Vector4d(params.row(Param::Rotation, i));
  }
  double opacity_logit(std::size_t i) const { return params[Param::OpacityLogit][i]; }
  double opacity(std::size_t i) const;
  Eigen::Vector3d scale(std::size_t i) const { return log_scale(i).array().exp(); }
  double max_scale(std::size_t i) const { return scale(i).maxCoeff(); }

  void set_mean(std::size_t i, const Eigen::Vector3d& v);
  void set_log_scale(std::size_t i, const Eigen::Vector3d& v);
  void set_rotation(std::size_t i, const Eigen::Vector4d& q);
  void set_opacity_logit(std::size_t i, double v) { params[Param::OpacityLogit][i] = v; }
  // Degree-0 coefficients chosen so the decoded colour equals rgb.
  void set_base_color(std::size_t i, const Eigen::Vector3d& rgb);

  void normalize_rotations();
  bool operator==(const GaussianCloud& o) const = default;
};

// Result of a structural edit. source_rows maps every row of the new cloud
// to its row in the old one (-1 for newly created rows).
struct StructuralEdit {
  GaussianCloud cloud;
  std::vector<std::int64_t> source_rows;
};

double sigmoid(double x);
double logit(double p);

// R(q) for a unit quaternion (w, x, y, z).
Eigen::Matrix3d quaternion_to_matrix(const Eigen::Vector4d& q);

// Sigma = R diag(exp(2 log_scale)) R^T. The quaternion is normalized first.
Eigen::Matrix3d covariance3d(const Eigen::Vector3d& log_scale, const Eigen::Vector4d& rotation);

struct AxisAlignedBox {
  Eigen::Vector3d min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d max = Eigen::Vector3d::Constant(1.0);
  Eigen::Vector3d center() const { return 0.5 * (min + max); }
};

// Uniform means in the box, opacity 0.1, isotropic scale from the mean
// distance to the three nearest neighbours, random degree-0 colours.
GaussianCloud init_random_cloud(const AxisAlignedBox& box, std::size_t n, int sh_degree,
                                double scene_extent, std::uint64_t seed);

inline constexpr double kSplitScaleDivisor = 1.6;

// Two children sampled from the parent's density with scales divided by 1.6.
// Writes the children into rows child_a and child_b of `out`.
void split_primitive(const GaussianCloud& in, std::size_t index, CounterRng& rng,
                     GaussianCloud& out, std::size_t child_a, std::size_t child_b);

GaussianCloud prune(const GaussianCloud& cloud, const std::vector<bool>& keep);
StructuralEdit prune_edit(const GaussianCloud& cloud, const std::vector<bool>& keep);

// Replaces every masked primitive with two split children (appended after the
// surviving primitives, in mask order).
StructuralEdit split_masked(const GaussianCloud& cloud, const std::vector<bool>& mask,
                            CounterRng& rng);

// Appends a copy of every masked primitive.
StructuralEdit clone_masked(const GaussianCloud& cloud, const std::vector<bool>& mask);

}  // namespace splatdrop
