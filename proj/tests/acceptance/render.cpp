#include <algorithm>
#include <cmath>
#include <random>

#include "acceptance.hpp"
#include "oracles.hpp"
#include "sp360/losses.hpp"

namespace sp360::acceptance {
namespace {

Outcome rasterizer_gradients() {
  const Stopwatch clock;
  std::mt19937_64 rng(31);
  const RenderSettings settings = test::fd_settings();
  double worst = 0.0;
  std::size_t entries = 0;
  for (int t = 0; t < 50; ++t) {
    const int gaussians = std::uniform_int_distribution<int>(1, 5)(rng);
    const test::FdScene scene = test::random_fd_scene(rng, gaussians);
    const test::FdReport r = test::finite_difference_check(scene, settings, 1e-4);
    worst = std::max(worst, r.max_relative_error);
    entries += r.entries;
  }
  const double secs = clock.seconds();
  return {worst < 1e-4 && secs < 60.0, "50 scenes, " + std::to_string(entries) +
                                           " parameters: max relative error " + fmt(worst * 1e6, 3) + "e-6; " +
                                           fmt(secs) + " s"};
}

Outcome pcc_loss() {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> scale(0.1, 10.0), shift(-5.0, 5.0);
  double lo = 2.0, hi = 0.0, affine_zero = 0.0, invariance = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int w = std::uniform_int_distribution<int>(2, 16)(rng), h = std::uniform_int_distribution<int>(2, 16)(rng);
    const Raster x = test::random_raster(rng, w, h, 1, 0.5, 5.0), y = test::random_raster(rng, w, h, 1, 0.5, 5.0);
    Raster valid(w, h, 1, 1.0);
    const double v = pcc_depth_loss(x, y, valid).value;
    lo = std::min(lo, v);
    hi = std::max(hi, v);

    auto affine = [&](const Raster& r) {
      Raster out = r;
      const double a = scale(rng), b = shift(rng);
      for (auto& e : out.data) e = a * e + b;
      return out;
    };
    affine_zero = std::max(affine_zero, std::abs(pcc_depth_loss(x, affine(x), valid).value));
    invariance = std::max({invariance, std::abs(pcc_depth_loss(affine(x), y, valid).value - v),
                           std::abs(pcc_depth_loss(x, affine(y), valid).value - v)});
  }
  const double tol = 1e-9;
  return {lo >= 0.0 && hi <= 2.0 && affine_zero <= tol && invariance <= tol,
          "1000 rasters: range [" + fmt(lo) + ", " + fmt(hi) + "], affine pair " + fmt(affine_zero * 1e9, 4) +
              "e-9, invariance " + fmt(invariance * 1e9, 4) + "e-9"};
}

}  // namespace

std::vector<Criterion> render_criteria() {
  return {{"rasterizer-gradients", rasterizer_gradients}, {"pcc-loss", pcc_loss}};
}

}  // namespace sp360::acceptance
