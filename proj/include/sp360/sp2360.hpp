#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sp360/enhancer.hpp"
#include "sp360/gaussian.hpp"
#include "sp360/losses.hpp"
#include "sp360/schedule.hpp"
#include "sp360/se3.hpp"
#include "sp360/sparse_optim.hpp"

namespace sp360 {

/// Every scale multiplied by eta; other parameters untouched.
GaussianCloud shrink_scales(const GaussianCloud& cloud, double eta);

/// Removes and returns the m pool poses closest (minimum geodesic distance)
/// to the stack; ties go to the smaller view id.
std::vector<CameraPose> next_novel_camera(std::vector<CameraPose>& pool, std::span<const CameraPose> stack,
                                          std::size_t m, const GeodesicConfig& cfg = {});

using PerceptualLoss = std::function<LossGrad(const Raster&, const Raster&)>;

struct SampleLoss {
  double l1 = 0.0;
  double perceptual = 0.0;
  double value = 0.0;
  Raster grad;
};

/// t_weight · (L1 + L_p); L_p defaults to D-SSIM.
SampleLoss sample_loss(const Raster& render, const Raster& pseudo_gt, double t_weight,
                       const PerceptualLoss& perceptual = {});

/// Linear decay of the sample-loss weight over the global iteration count.
double sample_weight(double start, double end, int iter, int total_iters);

struct LoopConfig {
  std::int64_t total_iters = 30000;
  std::size_t m = 2;
  ScheduleKind kind = ScheduleKind::Quadratic;
  GrowthModel growth = GrowthModel::Recurrence;
  double eta = 0.97;
  double sample_weight_start = 1.0;
  double sample_weight_end = 0.1;
  std::string enhancer = "identity";
  EnhanceConfig enhance;
  // Optimization settings while fusing: τ_pos = 0.0002, reset every 3000,
  // no depth or pseudo terms.
  SparseConfig train = SparseConfig::dense_preset();
  // Supervise generated views with the photometric loss of observed views.
  bool generated_as_observed = false;

  static LoopConfig iterative_preset();
  void validate() const;
};

/// Produces the pseudo ground truth for a novel pose given its current render.
using ViewSynthesizer = std::function<Raster(const CameraPose&, const RenderOutput&, std::size_t step)>;

/// Render enhancement through an Enhancer (the Sp²360 path).
ViewSynthesizer enhancer_synthesizer(Enhancer& enhancer, const EnhanceConfig& cfg, std::size_t steps);

struct LoopStep {
  std::size_t step = 0;
  std::vector<std::uint32_t> added_views;
  std::int64_t iterations = 0;
  std::size_t stack_size = 0;
  double mask_area = 0.0;  // mean fraction of pixels with alpha <= tau over the new views
  std::size_t gaussians = 0;
};

struct LoopReport {
  Schedule schedule;
  std::vector<LoopStep> steps;
  std::string to_json() const;
};

struct LoopResult {
  GaussianCloud cloud;
  LoopReport report;
};

/// Fuses the pool views into the observed scene step by step.
LoopResult run_sp2360(const Scene& scene, const GaussianCloud& initial, std::vector<CameraPose> novel_pose_pool,
                      const LoopConfig& cfg, const ViewSynthesizer& synthesize, std::uint64_t seed);

}  // namespace sp360
