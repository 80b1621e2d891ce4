#pragma once

#include <optional>

#include "splatdrop/types.hpp"

namespace splatdrop {

inline constexpr double kSsimC1 = 0.01 * 0.01;  // (K1 L)^2 with L = 1
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kPsnrCap = 100.0;
inline constexpr double kGsLossSsimWeight = 0.2;

double l1(const Image& x, const Image& y);
double mse(const Image& x, const Image& y);
double psnr(const Image& x, const Image& y);
double psnr_from_mse(double mse);

// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5) and edge-replicate
// padding, averaged over channels.
double ssim(const Image& x, const Image& y);

// dSSIM/dY for upstream scalar gradient `scale`.
Image ssim_gradient(const Image& x, const Image& y, double scale = 1.0);

// Average error: geometric mean of MSE, sqrt(1 - SSIM) and LPIPS.
// Throws std::invalid_argument when ssim > 1.
double avge(double mse, double ssim, double lpips);
std::optional<double> avge(double mse, double ssim, std::optional<double> lpips);

struct LossValue {
  double value = 0.0;
  Image gradient;  // d value / d first argument
};

// 0.8 L1 + 0.2 (1 - SSIM), differentiated with respect to `render`.
LossValue gs_loss(const Image& render, const Image& target);
double gs_loss_value(const Image& render, const Image& target);

struct DepthLoss {
  double value = 0.0;
  Image gradient;
  bool degenerate = false;  // too few valid pixels or zero variance
};

// 1 - Pearson correlation between rendered and reference depth over pixels with
// valid mask value > 0.5 (a null mask accepts every pixel).
DepthLoss depth_loss(const Image& rendered, const Image& reference, const Image* valid = nullptr);

struct LossBreakdown {
  double l_gs = 0.0;
  double l_depth = 0.0;
  double l_rdr = 0.0;
  double lambda_depth = 0.0;
  double lambda_rdr = 0.0;
  double total = 0.0;
};

LossBreakdown total_loss(double l_gs, double l_depth, double l_rdr, double lambda_depth,
                         double lambda_rdr);

namespace detail {
// Separable Gaussian blur with edge-replicate padding, and its adjoint.
Image blur_replicate(const Image& img);
Image blur_replicate_adjoint(const Image& img);
}  // namespace detail

}  // namespace splatdrop
