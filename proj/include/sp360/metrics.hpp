#pragma once

#include <string>
#include <vector>

#include "sp360/losses.hpp"
#include "sp360/raster.hpp"

namespace sp360 {

constexpr double kPsnrCap = 99.0;

/// 10·log10(1/MSE); identical inputs give cap.
double psnr(const Raster& a, const Raster& b, double cap = kPsnrCap);

struct ViewScore {
  std::string view;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<ViewScore> views;
  double mean_psnr = 0.0;
  double median_psnr = 0.0;
  double mean_ssim = 0.0;
  double median_ssim = 0.0;

  std::string to_json() const;
};

/// Per-view scores plus mean/median aggregates.
EvalReport evaluate(const std::vector<std::string>& names, const std::vector<Raster>& predicted,
                    const std::vector<Raster>& ground_truth);

double median(std::vector<double> values);

}  // namespace sp360
