#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "sp360/gaussian.hpp"
#include "sp360/raster.hpp"
#include "sp360/scene_io.hpp"

namespace sp360::test {

inline Eigen::Quaterniond random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

inline Intrinsics square_intrinsics(int size, double focal) {
  return Intrinsics{focal, focal, size / 2.0, size / 2.0, size, size};
}

inline CameraPose random_pose(std::mt19937_64& rng, std::uint32_t id, double spread = 3.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  CameraPose p;
  p.intrinsics = square_intrinsics(16, 16.0);
  p.rotation = random_quaternion(rng).toRotationMatrix();
  p.translation = Eigen::Vector3d(u(rng), u(rng), u(rng));
  p.id = ViewId{id};
  return p;
}

/// Camera at distance d on the −z side of the origin looking along +z.
inline CameraPose front_camera(int size, double focal, double d = 4.0, std::uint32_t id = 1) {
  CameraPose p;
  p.intrinsics = square_intrinsics(size, focal);
  p.translation = Eigen::Vector3d(0.0, 0.0, d);
  p.id = ViewId{id};
  return p;
}

inline Raster random_raster(std::mt19937_64& rng, int w, int h, int c, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Raster r(w, h, c);
  for (auto& v : r.data) v = u(rng);
  return r;
}

/// Gaussians in front of front_camera with moderate footprints.
inline GaussianCloud random_cloud(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> pos(-0.5, 0.5), ls(std::log(0.15), std::log(0.4)), op(0.3, 0.9),
      col(0.05, 0.95);
  GaussianCloud c;
  for (int i = 0; i < n; ++i) {
    const Eigen::Quaterniond q = random_quaternion(rng);
    c.add(Eigen::Vector3d(pos(rng), pos(rng), pos(rng)), Eigen::Vector3d(std::exp(ls(rng)), std::exp(ls(rng)), std::exp(ls(rng))),
          Eigen::Vector4d(q.w(), q.x(), q.y(), q.z()), op(rng), Eigen::Vector3d(col(rng), col(rng), col(rng)));
  }
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("sp360_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace sp360::test
