#include "sp360/toy_scene.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "sp360/error.hpp"
#include "sp360/render.hpp"

namespace sp360 {

CameraPose ring_pose(const Intrinsics& k, double angle, double radius, double height, ViewId id) {
  const Eigen::Vector3d eye(radius * std::cos(angle), height, radius * std::sin(angle));
  return CameraPose::look_at(k, eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(), id);
}

ToyScene make_toy_scene(const ToySceneConfig& cfg) {
  if (cfg.gaussians < 1 || cfg.views < 1 || cfg.width < 1 || cfg.height < 1) {
    throw Error(ErrorCode::InvalidConfig, "toy scene needs at least one Gaussian, view and pixel");
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> log_scale(std::log(0.08), std::log(0.3));
  std::uniform_real_distribution<double> opacity(0.6, 0.95);
  std::uniform_real_distribution<double> color(0.1, 0.9);
  std::normal_distribution<double> normal(0.0, 1.0);

  ToyScene toy;
  for (int g = 0; g < cfg.gaussians; ++g) {
    const Eigen::Vector3d mean = cfg.extent * Eigen::Vector3d(unit(rng), unit(rng), unit(rng));
    const Eigen::Vector3d scale(std::exp(log_scale(rng)), std::exp(log_scale(rng)), std::exp(log_scale(rng)));
    Eigen::Vector4d q(normal(rng), normal(rng), normal(rng), normal(rng));
    q.normalize();
    if (q[0] < 0) q = -q;
    toy.truth.add(mean, scale, q, opacity(rng), Eigen::Vector3d(color(rng), color(rng), color(rng)));
  }

  const Intrinsics k{cfg.focal, cfg.focal, cfg.width / 2.0, cfg.height / 2.0, cfg.width, cfg.height};
  const Eigen::Vector3d black = Eigen::Vector3d::Zero();
  for (int v = 0; v < cfg.views; ++v) {
    const double angle = 2.0 * std::numbers::pi * v / cfg.views;
    const double height = cfg.ring_height * (1.0 + 0.3 * std::sin(3.0 * angle));
    const CameraPose pose = ring_pose(k, angle, cfg.ring_radius, height, ViewId{static_cast<std::uint32_t>(v + 1)});
    const RenderOutput r = render(toy.truth, pose, black);
    toy.scene.poses.push_back(pose);
    toy.scene.images.push_back(r.color);
    toy.scene.depths.emplace_back(r.depth);
    toy.scene.image_names.push_back("view_" + std::to_string(v + 1));
  }
  for (int v = 0; v < cfg.test_views; ++v) {
    const double angle = 2.0 * std::numbers::pi * (v + 0.37) / cfg.test_views;
    const CameraPose pose =
        ring_pose(k, angle, cfg.ring_radius, cfg.test_height, ViewId{static_cast<std::uint32_t>(1000 + v)});
    toy.test_poses.push_back(pose);
    toy.test_images.push_back(render(toy.truth, pose, black).color);
  }

  // Point cloud stand-in: samples drawn from each Gaussian, colors jittered.
  for (std::size_t g = 0; g < toy.truth.size(); ++g) {
    const Eigen::Matrix3d r = toy.truth.rotation(g);
    const Eigen::Vector3d s = toy.truth.scale(g);
    for (int p = 0; p < cfg.points_per_gaussian; ++p) {
      const Eigen::Vector3d local(s[0] * normal(rng), s[1] * normal(rng), s[2] * normal(rng));
      toy.scene.point_cloud.points.push_back(toy.truth.means[g] + r * local);
      const Eigen::Vector3d c = toy.truth.colors[g] + 0.05 * Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
      toy.scene.point_cloud.colors.push_back(c.cwiseMax(0.0).cwiseMin(1.0));
    }
  }
  return toy;
}

}  // namespace sp360
