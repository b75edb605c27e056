#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sp360/gaussian.hpp"
#include "sp360/optimizer.hpp"
#include "sp360/render.hpp"
#include "sp360/scene_io.hpp"

namespace sp360 {

struct SparseConfig {
  double lambda1 = 0.2;
  double lambda_depth = 0.05;
  double lambda_pseudo = 0.05;
  double tau_pos = 0.001;
  std::optional<int> opacity_reset_interval;  // nullopt: never
  double opacity_reset_cap = 0.01;
  int pseudo_start_iter = 2000;
  int total_iters = 30000;
  int densify_interval = 100;
  int densify_from_iter = 500;
  int densify_until_iter = 15000;
  double prune_opacity = 0.005;
  // Densification is skipped while the cloud holds this many Gaussians; 0 = no cap.
  std::size_t max_gaussians = 0;
  int checkpoint_interval = 1000;
  double init_opacity = 0.1;
  LearningRates lr;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  RenderSettings render;

  /// 3DGS defaults: reset every 3000, τ_pos = 0.0002, no depth terms.
  static SparseConfig dense_preset();
  /// No reset, τ_pos = 0.001, λ_depth = λ_pseudo = 0.05.
  static SparseConfig sparse_preset();

  /// Multiplies every iteration count (schedule, intervals, decay) by factor.
  SparseConfig scaled_iterations(double factor) const;
  /// Sets total_iters, pulling pseudo_start_iter down to it when needed.
  SparseConfig with_total_iters(int total) const;
  void validate() const;
};

struct LossTerms {
  double l1 = 0.0;
  double dssim = 0.0;
  double depth = 0.0;
  double pseudo = 0.0;
  double total = 0.0;
  bool operator==(const LossTerms&) const = default;
};

struct PseudoView {
  CameraPose pose;
  Raster depth_target;  // estimated depth of the nearest observed view
};

struct PseudoRender {
  const RenderOutput* render = nullptr;
  const Raster* depth_target = nullptr;
};

struct SparseLoss {
  LossTerms terms;
  Raster grad_color;
  Raster grad_depth;
  std::vector<Raster> pseudo_grad_depth;
  bool depth_skipped = false;
};

SparseLoss sparse_loss(const RenderOutput& render, const Raster& gt_image, const Raster* gt_depth,
                       std::span<const PseudoRender> pseudo, const SparseConfig& cfg, int iter);

struct DensifyResult {
  GaussianCloud cloud;
  // Source index in the input for every output Gaussian; −1 for new ones.
  std::vector<std::ptrdiff_t> origin;
  std::size_t cloned = 0;
  std::size_t split = 0;
  std::size_t pruned = 0;
};

DensifyResult densify_and_prune(const GaussianCloud& cloud, std::span<const double> grad_norms,
                                const SparseConfig& cfg, double scene_extent, std::mt19937_64& rng);

/// Every opacity becomes min(opacity, cap).
GaussianCloud reset_opacity(const GaussianCloud& cloud, double cap);

/// Isotropic Gaussians at the points: scale = mean distance to the 3 nearest
/// neighbours, identity rotation.
GaussianCloud initialize_from_points(const SparsePointCloud& points, double opacity);

/// Radius of the camera centers around their mean, times 1.1.
double scene_extent(std::span<const CameraPose> poses);

/// Optimization state shared by the sparse fit and the iterative loop.
class Trainer {
 public:
  Trainer(GaussianCloud cloud, SparseConfig cfg, double extent, std::uint64_t seed);

  RenderOutput render(const CameraPose& pose) const;
  /// Adds the gradient of one render; densify statistics are tracked when asked.
  void backward(const CameraPose& pose, const Raster& grad_color, const Raster& grad_depth, bool track_densify);
  /// Optimizer step, then densification and opacity reset on their schedule.
  void step();

  const GaussianCloud& cloud() const { return cloud_; }
  /// Replaces parameters of an equally sized cloud; optimizer moments are kept.
  void replace_parameters(GaussianCloud cloud);
  int iteration() const { return iter_; }
  std::mt19937_64& rng() { return rng_; }
  const SparseConfig& config() const { return cfg_; }

 private:
  GaussianCloud cloud_;
  SparseConfig cfg_;
  double extent_;
  Adam adam_;
  CloudGradient grad_;
  std::vector<double> grad_accum_;
  std::vector<int> grad_count_;
  std::mt19937_64 rng_;
  int iter_ = 0;
};

struct FitCheckpoint {
  int iter = 0;
  double train_psnr = 0.0;
  std::size_t gaussians = 0;
  LossTerms loss;
  bool operator==(const FitCheckpoint&) const = default;
};

struct FitReport {
  std::vector<FitCheckpoint> checkpoints;
  std::size_t depth_terms_skipped = 0;
  std::string to_json_lines() const;
  bool operator==(const FitReport&) const = default;
};

struct FitResult {
  GaussianCloud cloud;
  FitReport report;
};

/// Pseudo cameras between each view and its geodesically closest neighbour.
std::vector<PseudoView> make_pseudo_views(const Scene& scene, std::mt19937_64& rng);

FitResult fit_sparse_3dgs(const Scene& scene, const SparseConfig& cfg, std::uint64_t seed);

}  // namespace sp360
