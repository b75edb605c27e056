#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace sp360 {

/// Per-Gaussian parameter arrays in optimization space. Shared by the cloud
/// itself and by its gradient.
struct GaussianFields {
  std::vector<Eigen::Vector3d> means;
  std::vector<Eigen::Vector3d> log_scales;
  std::vector<Eigen::Vector4d> rotations;  // (w, x, y, z), normalized on use
  std::vector<double> opacity_logits;
  std::vector<Eigen::Vector3d> colors;  // RGB, spherical-harmonics degree 0

  std::size_t size() const { return means.size(); }
  bool empty() const { return means.empty(); }
  void resize(std::size_t n);
  void reserve(std::size_t n);
  /// Appends entry i of other.
  void append_from(const GaussianFields& other, std::size_t i);
  /// Keeps entries whose flag is true, preserving order.
  void keep(const std::vector<bool>& flags);
  bool all_finite() const;
};

struct GaussianCloud : GaussianFields {
  Eigen::Vector3d scale(std::size_t i) const { return log_scales[i].array().exp(); }
  double opacity(std::size_t i) const;
  Eigen::Matrix3d rotation(std::size_t i) const;

  /// Appends one Gaussian given its activated parameters.
  void add(const Eigen::Vector3d& mean, const Eigen::Vector3d& scale, const Eigen::Vector4d& rotation,
           double opacity, const Eigen::Vector3d& color);

  /// Positive scales, normalizable quaternions, opacities in (0,1), finite.
  bool satisfies_invariants() const;
};

struct CloudGradient : GaussianFields {
  static CloudGradient zeros(std::size_t n);
  void set_zero();
  double max_abs() const;
};

double sigmoid(double x);
double logit(double p);

// "GCLD", u32 LE count, then 14 float32 LE per Gaussian:
// mean(3) log-scale(3) quaternion wxyz(4) opacity-logit(1) rgb(3).
std::vector<std::uint8_t> encode_cloud(const GaussianCloud& cloud);
GaussianCloud decode_cloud(std::span<const std::uint8_t> bytes);
void save_cloud(const std::filesystem::path& path, const GaussianCloud& cloud);
GaussianCloud load_cloud(const std::filesystem::path& path);

}  // namespace sp360
