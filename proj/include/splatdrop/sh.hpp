#pragma once

#include <Eigen/Dense>
#include <array>

namespace splatdrop {

inline constexpr double kShC0 = 0.28209479177387814;

// Real spherical-harmonic basis up to degree 3 evaluated at a unit direction.
// Unused entries above the requested degree are left zero.
std::array<double, 16> sh_basis(int degree, const Eigen::Vector3d& dir);

// d basis_k / d dir, one row per basis function.
std::array<Eigen::Vector3d, 16> sh_basis_gradient(int degree, const Eigen::Vector3d& dir);

// Decoded colour before clamping: sum_k basis_k * coeff_k + 0.5.
// dc holds 3 values, rest holds (K-1)*3 values in coefficient-major order.
Eigen::Vector3d eval_color(int degree, const double* dc, const double* rest,
                           const Eigen::Vector3d& dir);

}  // namespace splatdrop
