#pragma once

#include <cstdint>
#include <vector>

#include "sp360/gaussian.hpp"
#include "sp360/raster.hpp"
#include "sp360/scene_io.hpp"

namespace sp360 {

/// Synthetic ground truth: a small random Gaussian cloud seen from cameras on
/// a ring looking at the origin.
struct ToySceneConfig {
  int gaussians = 20;
  int views = 30;
  int test_views = 8;
  int width = 64;
  int height = 64;
  double focal = 64.0;
  double ring_radius = 4.0;
  double ring_height = 1.0;
  double test_height = 0.5;
  double extent = 1.0;  // half-size of the box holding the means
  int points_per_gaussian = 4;
  std::uint64_t seed = 7;
};

struct ToyScene {
  GaussianCloud truth;
  Scene scene;  // all ring views, with rendered depth and a point cloud stand-in
  // Off-ring cameras used only for evaluation.
  std::vector<CameraPose> test_poses;
  std::vector<Raster> test_images;
};

ToyScene make_toy_scene(const ToySceneConfig& cfg = {});

/// Camera on a circle of the given radius and height, looking at the origin.
CameraPose ring_pose(const Intrinsics& k, double angle, double radius, double height, ViewId id);

}  // namespace sp360
