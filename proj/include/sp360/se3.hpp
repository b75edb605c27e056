#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sp360/scene_io.hpp"

namespace sp360 {

struct GeodesicConfig {
  double w_t = 0.1;  // translation weight
};

/// Relative rotation angle θ = arccos((tr(R1·R2ᵀ) − 1) / 2) in [0, π].
/// Throws InvalidRotation if either input is non-orthonormal beyond 1e-6.
double rodrigues_angle(const Eigen::Matrix3d& r1, const Eigen::Matrix3d& r2);

/// Rotation angle plus w_t times the translation distance.
double geodesic_distance(const CameraPose& p1, const CameraPose& p2, const GeodesicConfig& cfg = {});

/// Entry (i, j) is the distance from stack[i] to pool[j]. Throws DuplicateView
/// when the two sets share an id.
Eigen::MatrixXd distance_matrix(std::span<const CameraPose> stack, std::span<const CameraPose> pool,
                                const GeodesicConfig& cfg = {});

/// Index of the camera whose center is closest to the centroid of all centers
/// (ties to the lower index).
std::size_t default_seed_index(std::span<const CameraPose> poses);

/// Greedy stack growth: starting at seed_index, repeatedly append the pool view
/// whose minimum distance to the stack is the n-th smallest (1-based), ties to
/// the smaller view id. Requires 1 <= n <= N - M + 1.
std::vector<std::size_t> greedy_subset(std::span<const CameraPose> poses, std::size_t m,
                                       std::size_t n, std::size_t seed_index,
                                       const GeodesicConfig& cfg = {});

/// Largest pairwise geodesic distance within a set of views (0 for < 2 views).
double max_pairwise_distance(std::span<const CameraPose> poses, std::span<const std::size_t> indices,
                             const GeodesicConfig& cfg = {});

/// Stand-in for an SfM registration attempt: returns the registered point
/// count, or nullopt when the subset cannot be registered.
using RegistrationProbe = std::function<std::optional<std::size_t>(std::span<const std::size_t>)>;

RegistrationProbe always_registers();

struct SweepEntry {
  std::size_t n = 0;
  double max_pairwise = 0.0;
  std::optional<std::size_t> registration_size;  // nullopt = probe failed
};

struct SubsetResult {
  std::vector<std::size_t> indices;
  std::size_t n_star = 0;
  double max_pairwise = 0.0;
  std::vector<SweepEntry> sweep_log;

  std::string to_json() const;
};

/// Sweeps n = 1, 2, ... and keeps the subset with the largest max-pairwise
/// distance. The sweep stops at the first n whose probe fails.
SubsetResult select_view_subset(std::span<const CameraPose> poses, std::size_t m,
                                const GeodesicConfig& cfg, const RegistrationProbe& probe,
                                std::optional<std::size_t> seed_index = std::nullopt);

/// Constant-speed spherical interpolation along the shorter arc.
Eigen::Quaterniond slerp(const Eigen::Quaterniond& q1, const Eigen::Quaterniond& q2, double u);

/// Two points: linear. Three or more: uniform Catmull-Rom through every control
/// point with reflected end tangents, u spread evenly over the segments.
Eigen::Vector3d spline_translation(std::span<const Eigen::Vector3d> control, double u);

/// Pose between p1 (u=0) and p2 (u=1): slerped rotation, spline translation.
CameraPose interpolate_pseudo_view(const CameraPose& p1, const CameraPose& p2, double u, ViewId id);

/// Random rotation about a uniform axis with |angle| ~ N(0, rot_sigma²)
/// truncated at 3σ, applied in the camera frame, plus isotropic Gaussian noise
/// on the camera center. Deterministic per seed.
CameraPose perturb_camera(const CameraPose& pose, double rot_sigma, double trans_sigma,
                          std::uint64_t seed);

}  // namespace sp360
