#include "sp360/se3.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "sp360/error.hpp"

namespace sp360 {

namespace {

void require_rotation(const Eigen::Matrix3d& r, const char* which) {
  const Eigen::Matrix3d err = r.transpose() * r - Eigen::Matrix3d::Identity();
  if (!r.allFinite() || err.cwiseAbs().maxCoeff() > 1e-6 || std::abs(r.determinant() - 1.0) > 1e-6) {
    throw Error(ErrorCode::InvalidRotation, std::string(which) + " is not a proper rotation");
  }
}

}  // namespace

double rodrigues_angle(const Eigen::Matrix3d& r1, const Eigen::Matrix3d& r2) {
  require_rotation(r1, "R1");
  require_rotation(r2, "R2");
  const Eigen::Matrix3d rel = r1 * r2.transpose();
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  // arccos(c) evaluated as atan2(sin, cos): acos loses ~1e-8 absolute accuracy
  // next to c = 1.
  const Eigen::Vector3d axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * axis.norm(), c);
}

double geodesic_distance(const CameraPose& p1, const CameraPose& p2, const GeodesicConfig& cfg) {
  return rodrigues_angle(p1.rotation, p2.rotation) + cfg.w_t * (p1.translation - p2.translation).norm();
}

Eigen::MatrixXd distance_matrix(std::span<const CameraPose> stack, std::span<const CameraPose> pool,
                                const GeodesicConfig& cfg) {
  std::set<ViewId> ids;
  for (const auto& p : stack) ids.insert(p.id);
  for (const auto& p : pool) {
    if (ids.contains(p.id)) {
      throw Error(ErrorCode::DuplicateView, "view " + std::to_string(p.id.value) +
                                                " is in both stack and pool");
    }
  }
  Eigen::MatrixXd d(static_cast<Eigen::Index>(stack.size()), static_cast<Eigen::Index>(pool.size()));
  for (std::size_t i = 0; i < stack.size(); ++i) {
    for (std::size_t j = 0; j < pool.size(); ++j) {
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          geodesic_distance(stack[i], pool[j], cfg);
    }
  }
  return d;
}

std::size_t default_seed_index(std::span<const CameraPose> poses) {
  if (poses.empty()) throw Error(ErrorCode::RankOutOfRange, "no poses");
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : poses) centroid += p.center();
  centroid /= static_cast<double>(poses.size());
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const double d = (poses[i].center() - centroid).norm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<std::size_t> greedy_subset(std::span<const CameraPose> poses, std::size_t m,
                                       std::size_t n, std::size_t seed_index,
                                       const GeodesicConfig& cfg) {
  const std::size_t count = poses.size();
  if (m == 0 || m > count) {
    throw Error(ErrorCode::RankOutOfRange, "subset size " + std::to_string(m) + " for " +
                                               std::to_string(count) + " views");
  }
  if (n < 1 || n > count - m + 1) {
    throw Error(ErrorCode::RankOutOfRange, "rank " + std::to_string(n) + " outside [1, " +
                                               std::to_string(count - m + 1) + "]");
  }
  if (seed_index >= count) throw Error(ErrorCode::RankOutOfRange, "seed index out of range");

  std::vector<std::size_t> stack{seed_index};
  std::vector<bool> in_stack(count, false);
  in_stack[seed_index] = true;
  // Minimum distance from every pool view to the current stack.
  std::vector<double> min_dist(count, std::numeric_limits<double>::infinity());
  auto absorb = [&](std::size_t added) {
    for (std::size_t j = 0; j < count; ++j) {
      if (!in_stack[j]) min_dist[j] = std::min(min_dist[j], geodesic_distance(poses[added], poses[j], cfg));
    }
  };
  absorb(seed_index);

  std::vector<std::size_t> pool;
  while (stack.size() < m) {
    pool.clear();
    for (std::size_t j = 0; j < count; ++j) {
      if (!in_stack[j]) pool.push_back(j);
    }
    std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
      if (min_dist[a] != min_dist[b]) return min_dist[a] < min_dist[b];
      return poses[a].id < poses[b].id;
    });
    const std::size_t pick = pool[n - 1];
    stack.push_back(pick);
    in_stack[pick] = true;
    absorb(pick);
  }
  return stack;
}

double max_pairwise_distance(std::span<const CameraPose> poses, std::span<const std::size_t> indices,
                             const GeodesicConfig& cfg) {
  // Sorted so that the same set always yields bit-identical distances.
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::sort(idx.begin(), idx.end());
  double best = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      best = std::max(best, geodesic_distance(poses[idx[a]], poses[idx[b]], cfg));
    }
  }
  return best;
}

RegistrationProbe always_registers() {
  return [](std::span<const std::size_t> indices) -> std::optional<std::size_t> {
    return indices.size();
  };
}

std::string SubsetResult::to_json() const {
  nlohmann::ordered_json j;
  j["indices"] = indices;
  j["n_star"] = n_star;
  j["max_pairwise"] = max_pairwise;
  auto log = nlohmann::ordered_json::array();
  for (const auto& e : sweep_log) {
    nlohmann::ordered_json entry;
    entry["n"] = e.n;
    entry["max_pairwise"] = e.max_pairwise;
    if (e.registration_size) {
      entry["registration_size"] = *e.registration_size;
    } else {
      entry["registration_size"] = nullptr;
      entry["failed"] = true;
    }
    log.push_back(std::move(entry));
  }
  j["sweep_log"] = std::move(log);
  return j.dump(2);
}

SubsetResult select_view_subset(std::span<const CameraPose> poses, std::size_t m,
                                const GeodesicConfig& cfg, const RegistrationProbe& probe,
                                std::optional<std::size_t> seed_index) {
  if (m == 0 || m > poses.size()) {
    throw Error(ErrorCode::RankOutOfRange, "cannot select " + std::to_string(m) + " of " +
                                               std::to_string(poses.size()) + " views");
  }
  const std::size_t seed = seed_index.value_or(default_seed_index(poses));
  const std::size_t max_rank = poses.size() - m + 1;

  SubsetResult result;
  bool have_best = false;
  for (std::size_t n = 1; n <= max_rank; ++n) {
    auto indices = greedy_subset(poses, m, n, seed, cfg);
    SweepEntry entry;
    entry.n = n;
    entry.max_pairwise = max_pairwise_distance(poses, indices, cfg);
    entry.registration_size = probe(indices);
    result.sweep_log.push_back(entry);
    if (!entry.registration_size) break;
    if (!have_best || entry.max_pairwise > result.max_pairwise) {
      have_best = true;
      result.indices = std::move(indices);
      result.n_star = n;
      result.max_pairwise = entry.max_pairwise;
    }
  }
  if (!have_best) {
    throw Error(ErrorCode::NoRegistrableSubset, "registration failed already at n = 1");
  }
  return result;
}

Eigen::Quaterniond slerp(const Eigen::Quaterniond& q1, const Eigen::Quaterniond& q2, double u) {
  if (q1.norm() == 0.0 || q2.norm() == 0.0 || !q1.coeffs().allFinite() || !q2.coeffs().allFinite()) {
    throw Error(ErrorCode::InvalidQuaternion, "slerp needs non-zero finite quaternions");
  }
  const Eigen::Vector4d a = q1.coeffs().normalized();
  Eigen::Vector4d b = q2.coeffs().normalized();
  if (a.dot(b) < 0.0) b = -b;
  // Angle between the 4-vectors; atan2 form stays accurate near 0.
  const double phi = 2.0 * std::atan2((a - b).norm(), (a + b).norm());
  Eigen::Vector4d out;
  if (phi == 0.0) {
    out = a;
  } else {
    const double s = std::sin(phi);
    out = (std::sin((1.0 - u) * phi) / s) * a + (std::sin(u * phi) / s) * b;
  }
  Eigen::Quaterniond q;
  q.coeffs() = out.normalized();
  return q;
}

Eigen::Vector3d spline_translation(std::span<const Eigen::Vector3d> control, double u) {
  const std::size_t n = control.size();
  if (n < 2) throw Error(ErrorCode::InsufficientControlPoints, "need at least 2 control points");
  u = std::clamp(u, 0.0, 1.0);
  if (n == 2) return (1.0 - u) * control[0] + u * control[1];

  const std::size_t segments = n - 1;
  const double t = u * static_cast<double>(segments);
  const std::size_t i = std::min(static_cast<std::size_t>(t), segments - 1);
  const double s = t - static_cast<double>(i);
  auto point = [&](std::ptrdiff_t k) -> Eigen::Vector3d {
    if (k < 0) return 2.0 * control[0] - control[1];
    if (k >= static_cast<std::ptrdiff_t>(n)) return 2.0 * control[n - 1] - control[n - 2];
    return control[static_cast<std::size_t>(k)];
  };
  const auto k = static_cast<std::ptrdiff_t>(i);
  const Eigen::Vector3d p0 = point(k - 1), p1 = point(k), p2 = point(k + 1), p3 = point(k + 2);
  const double s2 = s * s, s3 = s2 * s;
  return 0.5 * ((2.0 * p1) + (p2 - p0) * s + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s2 +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * s3);
}

CameraPose interpolate_pseudo_view(const CameraPose& p1, const CameraPose& p2, double u, ViewId id) {
  if (!(p1.intrinsics == p2.intrinsics)) {
    throw Error(ErrorCode::IntrinsicsMismatch, "pseudo views need shared intrinsics");
  }
  CameraPose out;
  out.intrinsics = p1.intrinsics;
  out.rotation = slerp(p1.quaternion(), p2.quaternion(), u).toRotationMatrix();
  const std::array<Eigen::Vector3d, 2> control{p1.translation, p2.translation};
  out.translation = spline_translation(control, u);
  out.id = id;
  return out;
}

CameraPose perturb_camera(const CameraPose& pose, double rot_sigma, double trans_sigma,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::Vector3d axis(normal(rng), normal(rng), normal(rng));
  if (axis.norm() == 0.0) axis = Eigen::Vector3d::UnitZ();
  axis.normalize();
  double angle = 0.0;
  if (rot_sigma > 0.0) {
    do {
      angle = rot_sigma * normal(rng);
    } while (std::abs(angle) > 3.0 * rot_sigma);
  }
  const Eigen::Vector3d center_noise(trans_sigma * normal(rng), trans_sigma * normal(rng),
                                     trans_sigma * normal(rng));

  const Eigen::Matrix3d delta = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  CameraPose out = pose;
  out.rotation = delta * pose.rotation;
  // The camera turns about its own center, which then moves by center_noise.
  out.translation = delta * pose.translation - out.rotation * center_noise;
  return out;
}

}  // namespace sp360
