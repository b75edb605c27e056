#include "sp360/gaussian.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <string>

#include "sp360/error.hpp"
#include "sp360/raster.hpp"
#include "sp360/scene_io.hpp"

namespace sp360 {

void GaussianFields::resize(std::size_t n) {
  means.resize(n, Eigen::Vector3d::Zero());
  log_scales.resize(n, Eigen::Vector3d::Zero());
  rotations.resize(n, Eigen::Vector4d::Zero());
  opacity_logits.resize(n, 0.0);
  colors.resize(n, Eigen::Vector3d::Zero());
}

void GaussianFields::reserve(std::size_t n) {
  means.reserve(n);
  log_scales.reserve(n);
  rotations.reserve(n);
  opacity_logits.reserve(n);
  colors.reserve(n);
}

void GaussianFields::append_from(const GaussianFields& other, std::size_t i) {
  means.push_back(other.means[i]);
  log_scales.push_back(other.log_scales[i]);
  rotations.push_back(other.rotations[i]);
  opacity_logits.push_back(other.opacity_logits[i]);
  colors.push_back(other.colors[i]);
}

namespace {

template <typename T>
void keep_flags(std::vector<T>& v, const std::vector<bool>& flags) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (flags[i]) v[out++] = v[i];
  }
  v.resize(out);
}

}  // namespace

void GaussianFields::keep(const std::vector<bool>& flags) {
  keep_flags(means, flags);
  keep_flags(log_scales, flags);
  keep_flags(rotations, flags);
  keep_flags(opacity_logits, flags);
  keep_flags(colors, flags);
}

bool GaussianFields::all_finite() const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (!means[i].allFinite() || !log_scales[i].allFinite() || !rotations[i].allFinite() ||
        !std::isfinite(opacity_logits[i]) || !colors[i].allFinite()) {
      return false;
    }
  }
  return true;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

double GaussianCloud::opacity(std::size_t i) const { return sigmoid(opacity_logits[i]); }

Eigen::Matrix3d GaussianCloud::rotation(std::size_t i) const {
  return quaternion_to_rotation(rotations[i]);
}

void GaussianCloud::add(const Eigen::Vector3d& mean, const Eigen::Vector3d& scale,
                        const Eigen::Vector4d& rotation, double opacity,
                        const Eigen::Vector3d& color) {
  means.push_back(mean);
  log_scales.push_back(scale.array().log().matrix());
  rotations.push_back(rotation);
  opacity_logits.push_back(logit(opacity));
  colors.push_back(color);
}

bool GaussianCloud::satisfies_invariants() const {
  if (!all_finite()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if ((scale(i).array() <= 0.0).any()) return false;
    if (rotations[i].norm() == 0.0) return false;
    const double a = opacity(i);
    if (!(a > 0.0 && a < 1.0)) return false;
  }
  return true;
}

CloudGradient CloudGradient::zeros(std::size_t n) {
  CloudGradient g;
  g.resize(n);
  return g;
}

void CloudGradient::set_zero() {
  const std::size_t n = size();
  *this = zeros(n);
}

double CloudGradient::max_abs() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    m = std::max({m, means[i].cwiseAbs().maxCoeff(), log_scales[i].cwiseAbs().maxCoeff(),
                  rotations[i].cwiseAbs().maxCoeff(), std::abs(opacity_logits[i]),
                  colors[i].cwiseAbs().maxCoeff()});
  }
  return m;
}

namespace {

constexpr std::array<std::uint8_t, 4> kCloudMagic = {'G', 'C', 'L', 'D'};
constexpr std::size_t kFloatsPerGaussian = 14;

void put_f32(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_cloud(const GaussianCloud& cloud) {
  std::vector<std::uint8_t> out(kCloudMagic.begin(), kCloudMagic.end());
  const auto n = static_cast<std::uint32_t>(cloud.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  out.reserve(out.size() + cloud.size() * kFloatsPerGaussian * 4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k) put_f32(out, cloud.means[i][k]);
    for (int k = 0; k < 3; ++k) put_f32(out, cloud.log_scales[i][k]);
    for (int k = 0; k < 4; ++k) put_f32(out, cloud.rotations[i][k]);
    put_f32(out, cloud.opacity_logits[i]);
    for (int k = 0; k < 3; ++k) put_f32(out, cloud.colors[i][k]);
  }
  return out;
}

GaussianCloud decode_cloud(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(kCloudMagic.begin(), kCloudMagic.end(), bytes.begin())) {
    throw Error(ErrorCode::FormatError, "missing GCLD magic");
  }
  const std::uint32_t n = get_u32(bytes, 4);
  if (bytes.size() != 8 + static_cast<std::size_t>(n) * kFloatsPerGaussian * 4) {
    throw Error(ErrorCode::CorruptRaster, "GCLD payload size does not match count " + std::to_string(n));
  }
  GaussianCloud cloud;
  cloud.resize(n);
  std::size_t off = 8;
  auto next = [&] {
    const double v = std::bit_cast<float>(get_u32(bytes, off));
    off += 4;
    return v;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) cloud.means[i][k] = next();
    for (int k = 0; k < 3; ++k) cloud.log_scales[i][k] = next();
    for (int k = 0; k < 4; ++k) cloud.rotations[i][k] = next();
    cloud.opacity_logits[i] = next();
    for (int k = 0; k < 3; ++k) cloud.colors[i][k] = next();
  }
  return cloud;
}

void save_cloud(const std::filesystem::path& path, const GaussianCloud& cloud) {
  write_file_bytes(path, encode_cloud(cloud));
}

GaussianCloud load_cloud(const std::filesystem::path& path) {
  return decode_cloud(read_file_bytes(path));
}

}  // namespace sp360
