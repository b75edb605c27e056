#include "sp360/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sp360/error.hpp"

namespace sp360 {

double psnr(const Raster& a, const Raster& b, double cap) {
  require_same_shape(a, b, "psnr");
  if (a.empty()) return cap;
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.size());
  if (mse == 0.0) return cap;
  return std::min(cap, -10.0 * std::log10(mse));
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

EvalReport evaluate(const std::vector<std::string>& names, const std::vector<Raster>& predicted,
                    const std::vector<Raster>& ground_truth) {
  if (names.size() != predicted.size() || predicted.size() != ground_truth.size()) {
    throw Error(ErrorCode::ShapeError, "evaluate: view lists differ in length");
  }
  EvalReport report;
  std::vector<double> ps, ss;
  for (std::size_t i = 0; i < names.size(); ++i) {
    ViewScore v{names[i], psnr(predicted[i], ground_truth[i]), ssim(predicted[i], ground_truth[i])};
    ps.push_back(v.psnr);
    ss.push_back(v.ssim);
    report.views.push_back(std::move(v));
  }
  if (!ps.empty()) {
    report.mean_psnr = std::accumulate(ps.begin(), ps.end(), 0.0) / static_cast<double>(ps.size());
    report.mean_ssim = std::accumulate(ss.begin(), ss.end(), 0.0) / static_cast<double>(ss.size());
  }
  report.median_psnr = median(ps);
  report.median_ssim = median(ss);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& v : views) arr.push_back({{"view", v.view}, {"psnr", v.psnr}, {"ssim", v.ssim}});
  j["views"] = std::move(arr);
  j["mean_psnr"] = mean_psnr;
  j["median_psnr"] = median_psnr;
  j["mean_ssim"] = mean_ssim;
  j["median_ssim"] = median_ssim;
  return j.dump(2);
}

}  // namespace sp360
