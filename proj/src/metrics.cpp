#include "splatdrop/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace splatdrop {

namespace {

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int k = 0; k < kSsimWindow; ++k) {
    const double d = k - kSsimWindow / 2;
    w[k] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[k];
  }
  for (double& v : w) v /= sum;
  return w;
}

const std::array<double, kSsimWindow>& window() {
  static const auto w = gaussian_window();
  return w;
}

Image multiply(const Image& a, const Image& b) {
  Image out(a.width, a.height, a.channels);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

struct SsimStats {
  Image mu_x, mu_y, sxx, syy, sxy;
};

SsimStats ssim_stats(const Image& x, const Image& y) {
  return {detail::blur_replicate(x), detail::blur_replicate(y),
          detail::blur_replicate(multiply(x, x)), detail::blur_replicate(multiply(y, y)),
          detail::blur_replicate(multiply(x, y))};
}

}  // namespace

namespace detail {

Image blur_replicate(const Image& img) {
  const auto& w = window();
  const int r = kSsimWindow / 2;
  const int W = img.width, H = img.height, C = img.channels;
  Image tmp(W, H, C), out(W, H, C);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int k = -r; k <= r; ++k) s += w[k + r] * img.at(std::clamp(x + k, 0, W - 1), y, c);
        tmp.at(x, y, c) = s;
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (int k = -r; k <= r; ++k) s += w[k + r] * tmp.at(x, std::clamp(y + k, 0, H - 1), c);
        out.at(x, y, c) = s;
      }
    }
  }
  return out;
}

Image blur_replicate_adjoint(const Image& img) {
  const auto& w = window();
  const int r = kSsimWindow / 2;
  const int W = img.width, H = img.height, C = img.channels;
  Image tmp(W, H, C), out(W, H, C);
  // Vertical adjoint, gathered per destination column so each output is
  // written by one worker in a fixed order.
#pragma omp parallel for schedule(static)
  for (int x = 0; x < W; ++x) {
    for (int y = 0; y < H; ++y) {
      for (int k = -r; k <= r; ++k) {
        const int yy = std::clamp(y + k, 0, H - 1);
        for (int c = 0; c < C; ++c) tmp.at(x, yy, c) += w[k + r] * img.at(x, y, c);
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int k = -r; k <= r; ++k) {
        const int xx = std::clamp(x + k, 0, W - 1);
        for (int c = 0; c < C; ++c) out.at(xx, y, c) += w[k + r] * tmp.at(x, y, c);
      }
    }
  }
  return out;
}

}  // namespace detail

double l1(const Image& x, const Image& y) {
  require_same_shape(x, y, "l1");
  if (x.data.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) s += std::abs(x.data[i] - y.data[i]);
  return s / static_cast<double>(x.data.size());
}

double mse(const Image& x, const Image& y) {
  require_same_shape(x, y, "mse");
  if (x.data.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x.data[i] - y.data[i];
    s += d * d;
  }
  return s / static_cast<double>(x.data.size());
}

double psnr_from_mse(double m) {
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(m));
}

double psnr(const Image& x, const Image& y) { return psnr_from_mse(mse(x, y)); }

double ssim(const Image& x, const Image& y) {
  require_same_shape(x, y, "ssim");
  if (x.data.empty()) return 1.0;
  const SsimStats s = ssim_stats(x, y);
  double total = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double mx = s.mu_x.data[i], my = s.mu_y.data[i];
    const double vx = s.sxx.data[i] - mx * mx;
    const double vy = s.syy.data[i] - my * my;
    const double cxy = s.sxy.data[i] - mx * my;
    const double a1 = 2.0 * mx * my + kSsimC1, a2 = 2.0 * cxy + kSsimC2;
    const double b1 = mx * mx + my * my + kSsimC1, b2 = vx + vy + kSsimC2;
    total += (a1 * a2) / (b1 * b2);
  }
  return total / static_cast<double>(x.data.size());
}

Image ssim_gradient(const Image& x, const Image& y, double scale) {
  require_same_shape(x, y, "ssim_gradient");
  Image grad(x.width, x.height, x.channels);
  if (x.data.empty()) return grad;
  const SsimStats s = ssim_stats(x, y);
  const double g = scale / static_cast<double>(x.data.size());
  Image coef_mu(x.width, x.height, x.channels);
  Image coef_yy(x.width, x.height, x.channels);
  Image coef_xy(x.width, x.height, x.channels);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double mx = s.mu_x.data[i], my = s.mu_y.data[i];
    const double vx = s.sxx.data[i] - mx * mx;
    const double vy = s.syy.data[i] - my * my;
    const double cxy = s.sxy.data[i] - mx * my;
    const double a1 = 2.0 * mx * my + kSsimC1, a2 = 2.0 * cxy + kSsimC2;
    const double b1 = mx * mx + my * my + kSsimC1, b2 = vx + vy + kSsimC2;
    const double v = (a1 * a2) / (b1 * b2);
    // Written so identical windows give exactly zero.
    coef_mu.data[i] = g * ((2.0 * mx * (a2 - a1) - v * 2.0 * my * (b2 - b1)) / (b1 * b2));
    coef_yy.data[i] = g * (-v / b2);
    coef_xy.data[i] = g * (2.0 * (a1 / b1) / b2);
  }
  const Image d_mu = detail::blur_replicate_adjoint(coef_mu);
  const Image d_yy = detail::blur_replicate_adjoint(coef_yy);
  const Image d_xy = detail::blur_replicate_adjoint(coef_xy);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    grad.data[i] = d_mu.data[i] + 2.0 * y.data[i] * d_yy.data[i] + x.data[i] * d_xy.data[i];
  }
  return grad;
}

double avge(double m, double s, double lpips) {
  if (s > 1.0) throw std::invalid_argument("avge: ssim must not exceed 1");
  if (m < 0.0 || lpips < 0.0) throw std::invalid_argument("avge: negative input");
  return std::cbrt(m * std::sqrt(1.0 - s) * lpips);
}

std::optional<double> avge(double m, double s, std::optional<double> lpips) {
  if (!lpips) return std::nullopt;
  return avge(m, s, *lpips);
}

LossValue gs_loss(const Image& render, const Image& target) {
  require_same_shape(render, target, "gs_loss");
  LossValue out;
  const double n = static_cast<double>(std::max<std::size_t>(1, render.data.size()));
  const double wl1 = 1.0 - kGsLossSsimWeight;
  out.value = wl1 * l1(render, target) + kGsLossSsimWeight * (1.0 - ssim(target, render));
  out.gradient = ssim_gradient(target, render, -kGsLossSsimWeight);
  for (std::size_t i = 0; i < render.data.size(); ++i) {
    const double d = render.data[i] - target.data[i];
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    out.gradient.data[i] += wl1 * sign / n;
  }
  return out;
}

double gs_loss_value(const Image& render, const Image& target) {
  return (1.0 - kGsLossSsimWeight) * l1(render, target) +
         kGsLossSsimWeight * (1.0 - ssim(target, render));
}

DepthLoss depth_loss(const Image& rendered, const Image& reference, const Image* valid) {
  require_same_shape(rendered, reference, "depth_loss");
  if (valid) require_same_shape(rendered, *valid, "depth_loss mask");
  DepthLoss out;
  out.gradient = Image(rendered.width, rendered.height, rendered.channels);
  auto ok = [&](std::size_t i) { return !valid || valid->data[i] > 0.5; };
  double n = 0.0, mr = 0.0, mf = 0.0;
  for (std::size_t i = 0; i < rendered.data.size(); ++i) {
    if (!ok(i)) continue;
    n += 1.0;
    mr += rendered.data[i];
    mf += reference.data[i];
  }
  if (n < 2.0) {
    out.degenerate = true;
    return out;
  }
  mr /= n;
  mf /= n;
  double vr = 0.0, vf = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < rendered.data.size(); ++i) {
    if (!ok(i)) continue;
    const double a = rendered.data[i] - mr, b = reference.data[i] - mf;
    vr += a * a;
    vf += b * b;
    cov += a * b;
  }
  vr /= n;
  vf /= n;
  cov /= n;
  if (!(vr > 0.0) || !(vf > 0.0)) {
    out.degenerate = true;
    return out;
  }
  const double sd = std::sqrt(vr * vf);
  const double rho = std::clamp(cov / sd, -1.0, 1.0);
  out.value = 1.0 - rho;
  for (std::size_t i = 0; i < rendered.data.size(); ++i) {
    if (!ok(i)) continue;
    const double a = rendered.data[i] - mr, b = reference.data[i] - mf;
    out.gradient.data[i] = -(b / sd - rho * a / vr) / n;
  }
  return out;
}

LossBreakdown total_loss(double l_gs, double l_depth, double l_rdr, double lambda_depth,
                         double lambda_rdr) {
  LossBreakdown b;
  b.l_gs = l_gs;
  b.l_depth = l_depth;
  b.l_rdr = l_rdr;
  b.lambda_depth = lambda_depth;
  b.lambda_rdr = lambda_rdr;
  b.total = l_gs + lambda_depth * l_depth + lambda_rdr * l_rdr;
  return b;
}

}  // namespace splatdrop
