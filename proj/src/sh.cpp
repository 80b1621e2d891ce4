#include "splatdrop/sh.hpp"

namespace splatdrop {

namespace {
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                          -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                          0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};
}  // namespace

std::array<double, 16> sh_basis(int degree, const Eigen::Vector3d& dir) {
  std::array<double, 16> b{};
  b[0] = kShC0;
  if (degree < 1) return b;
  const double x = dir.x(), y = dir.y(), z = dir.z();
  b[1] = -kC1 * y;
  b[2] = kC1 * z;
  b[3] = -kC1 * x;
  if (degree < 2) return b;
  const double xx = x * x, yy = y * y, zz = z * z;
  b[4] = kC2[0] * x * y;
  b[5] = kC2[1] * y * z;
  b[6] = kC2[2] * (2 * zz - xx - yy);
  b[7] = kC2[3] * x * z;
  b[8] = kC2[4] * (xx - yy);
  if (degree < 3) return b;
  b[9] = kC3[0] * y * (3 * xx - yy);
  b[10] = kC3[1] * x * y * z;
  b[11] = kC3[2] * y * (4 * zz - xx - yy);
  b[12] = kC3[3] * z * (2 * zz - 3 * xx - 3 * yy);
  b[13] = kC3[4] * x * (4 * zz - xx - yy);
  b[14] = kC3[5] * z * (xx - yy);
  b[15] = kC3[6] * x * (xx - 3 * yy);
  return b;
}

std::array<Eigen::Vector3d, 16> sh_basis_gradient(int degree, const Eigen::Vector3d& dir) {
  std::array<Eigen::Vector3d, 16> g;
  for (auto& v : g) v.setZero();
  if (degree < 1) return g;
  const double x = dir.x(), y = dir.y(), z = dir.z();
  g[1] = {0, -kC1, 0};
  g[2] = {0, 0, kC1};
  g[3] = {-kC1, 0, 0};
  if (degree < 2) return g;
  const double xx = x * x, yy = y * y, zz = z * z;
  g[4] = kC2[0] * Eigen::Vector3d(y, x, 0);
  g[5] = kC2[1] * Eigen::Vector3d(0, z, y);
  g[6] = kC2[2] * Eigen::Vector3d(-2 * x, -2 * y, 4 * z);
  g[7] = kC2[3] * Eigen::Vector3d(z, 0, x);
  g[8] = kC2[4] * Eigen::Vector3d(2 * x, -2 * y, 0);
  if (degree < 3) return g;
  g[9] = kC3[0] * Eigen::Vector3d(6 * x * y, 3 * xx - 3 * yy, 0);
  g[10] = kC3[1] * Eigen::Vector3d(y * z, x * z, x * y);
  g[11] = kC3[2] * Eigen::Vector3d(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z);
  g[12] = kC3[3] * Eigen::Vector3d(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy);
  g[13] = kC3[4] * Eigen::Vector3d(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z);
  g[14] = kC3[5] * Eigen::Vector3d(2 * x * z, -2 * y * z, xx - yy);
  g[15] = kC3[6] * Eigen::Vector3d(3 * xx - 3 * yy, -6 * x * y, 0);
  return g;
}

Eigen::Vector3d eval_color(int degree, const double* dc, const double* rest,
                           const Eigen::Vector3d& dir) {
  const auto b = sh_basis(degree, dir);
  Eigen::Vector3d c(0.5, 0.5, 0.5);
  for (int ch = 0; ch < 3; ++ch) c[ch] += b[0] * dc[ch];
  const int k = (degree + 1) * (degree + 1);
  for (int j = 1; j < k; ++j) {
    for (int ch = 0; ch < 3; ++ch) c[ch] += b[j] * rest[(j - 1) * 3 + ch];
  }
  return c;
}

}  // namespace splatdrop
