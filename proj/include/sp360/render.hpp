#pragma once

#include <Eigen/Core>

#include <optional>
#include <vector>

#include "sp360/gaussian.hpp"
#include "sp360/raster.hpp"
#include "sp360/scene_io.hpp"

namespace sp360 {

struct RenderSettings {
  double near_plane = 0.01;
  double dilation = 0.3;           // added to the 2D covariance diagonal, pixels²
  double max_alpha = 0.99;
  double min_transmittance = 1e-4;
  // Splats whose alpha at a pixel falls below this are skipped. Also bounds
  // each splat's screen footprint for tile culling; 0 disables both.
  double min_alpha = 1.0 / 255.0;
  double depth_eps = 1e-8;
};

struct ProjectedGaussian {
  Eigen::Vector2d mean;  // pixel coordinates, pixel (x, y) centered at (x + 0.5, y + 0.5)
  Eigen::Matrix2d cov;
  double depth = 0.0;
};

/// nullopt means the Gaussian is culled (at or behind the near plane).
std::optional<ProjectedGaussian> project_gaussian(const Eigen::Vector3d& mean, const Eigen::Vector3d& scale,
                                                  const Eigen::Vector4d& rotation, const CameraPose& camera,
                                                  const RenderSettings& settings = {});

struct RenderOutput {
  Raster color;  // H×W×3
  Raster depth;  // H×W
  Raster alpha;  // H×W
};

RenderOutput render(const GaussianCloud& cloud, const CameraPose& camera, const Eigen::Vector3d& background,
                    const RenderSettings& settings = {});

struct RenderGradients {
  CloudGradient params;
  // ‖∂L/∂(projected mean)‖ in normalized device coordinates.
  std::vector<double> screen_grad_norm;
  std::vector<bool> visible;
};

/// Gradients of L = <grad_color, color> + <grad_depth, depth>.
RenderGradients render_backward(const GaussianCloud& cloud, const CameraPose& camera,
                                const Eigen::Vector3d& background, const Raster& grad_color,
                                const Raster& grad_depth, const RenderSettings& settings = {});

/// 1 where alpha <= tau (region to inpaint), else 0.
Raster opacity_mask(const Raster& alpha, double tau);

}  // namespace sp360
