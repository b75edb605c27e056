#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sp360/raster.hpp"

namespace sp360 {

struct ViewId {
  std::uint32_t value = 0;
  friend auto operator<=>(const ViewId&, const ViewId&) = default;
};

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// fx, fy > 0 and the principal point inside the image.
  bool valid() const;
  Intrinsics scaled(double factor) const;

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// A posed view. rotation/translation map world points into the camera frame:
/// x_cam = rotation * x_world + translation.
struct CameraPose {
  Intrinsics intrinsics;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  ViewId id;

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
  Eigen::Quaterniond quaternion() const;
  /// rotationᵀ·rotation = I and det(rotation) = 1, both within tol.
  bool is_valid_rotation(double tol = 1e-9) const;

  static CameraPose look_at(const Intrinsics& intrinsics, const Eigen::Vector3d& eye,
                            const Eigen::Vector3d& target, const Eigen::Vector3d& up, ViewId id);
};

/// Rotation matrix for a (w, x, y, z) quaternion; the input is normalized first.
Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d& wxyz);

struct SparsePointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> colors;  // in [0,1]

  std::size_t size() const { return points.size(); }
};

struct Scene {
  std::vector<CameraPose> poses;
  std::vector<Raster> images;               // H×W×3 in [0,1]
  std::vector<std::optional<Raster>> depths;  // H×W, optional per view
  std::vector<std::string> image_names;
  SparsePointCloud point_cloud;

  std::size_t size() const { return poses.size(); }
  /// Throws InconsistentModel when the per-view arrays disagree.
  void validate() const;
  /// Subset of views (point cloud shared).
  Scene subset(const std::vector<std::size_t>& indices) const;
};

// COLMAP text model (cameras.txt, images.txt, points3D.txt). Only PINHOLE and
// SIMPLE_PINHOLE cameras are accepted.
struct ColmapModel {
  std::vector<CameraPose> poses;
  std::vector<std::string> image_names;
  SparsePointCloud point_cloud;
};

ColmapModel read_colmap_text(const std::filesystem::path& model_dir);
void write_colmap_text(const std::filesystem::path& model_dir, const std::vector<CameraPose>& poses,
                       const std::vector<std::string>& image_names, const SparsePointCloud& cloud);

/// Loads the COLMAP model plus one PNG per registered image from images_dir.
/// When depths_dir is given, a depth raster named "<image stem>.fras" is
/// attached to the view if it exists.
Scene load_colmap_scene(const std::filesystem::path& model_dir,
                        const std::filesystem::path& images_dir,
                        const std::optional<std::filesystem::path>& depths_dir = std::nullopt);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// test = {0, stride, 2·stride, ...}; train is the complement.
Split train_test_split(std::size_t n_views, std::size_t stride);

}  // namespace sp360
