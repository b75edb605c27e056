#pragma once

#include "sp360/raster.hpp"

namespace sp360 {

/// Scalar loss and its gradient with respect to the first argument.
struct LossGrad {
  double value = 0.0;
  Raster grad;
};

/// mean |a − b| over all pixels and channels.
LossGrad l1_loss(const Raster& a, const Raster& b);

struct SsimSettings {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

/// Mean SSIM over pixels and channels; Gaussian window, zero padding.
double ssim(const Raster& a, const Raster& b, const SsimSettings& settings = {});
/// (1 − SSIM) / 2.
LossGrad dssim_loss(const Raster& a, const Raster& b, const SsimSettings& settings = {});

struct PccResult {
  double value = 1.0;
  Raster grad;  // wrt d_ras
  bool degenerate = false;
};

/// 1 − Pearson correlation of min-max normalized depths over pixels where
/// valid is non-zero. Fewer than 2 valid pixels or a constant input gives 1
/// with a zero gradient and the degenerate flag set.
PccResult pcc_depth_loss(const Raster& d_ras, const Raster& d_est, const Raster& valid);

/// Valid wherever d_est is finite and positive.
Raster positive_depth_mask(const Raster& d_est);

/// (1 − λ1)·L1 + λ1·D-SSIM.
struct PhotometricLoss {
  double l1 = 0.0;
  double dssim = 0.0;
  double value = 0.0;
  Raster grad;
};
PhotometricLoss photometric_loss(const Raster& render, const Raster& gt, double lambda1);

}  // namespace sp360
