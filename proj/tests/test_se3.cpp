#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <set>

#include "sp360/error.hpp"
#include "sp360/se3.hpp"
#include "sp360/toy_scene.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace sp360 {
namespace {

using test::random_pose;
using test::random_quaternion;

double quaternion_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  return 2.0 * std::acos(std::min(1.0, std::abs(a.coeffs().dot(b.coeffs()))));
}

std::vector<CameraPose> ring(int n, double radius = 4.0) {
  std::vector<CameraPose> poses;
  const Intrinsics k = test::square_intrinsics(32, 32.0);
  for (int i = 0; i < n; ++i) {
    poses.push_back(ring_pose(k, 2.0 * std::numbers::pi * i / n, radius, 0.0, ViewId{static_cast<std::uint32_t>(i)}));
  }
  return poses;
}

TEST(Rodrigues, ClosedForms) {
  const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
  EXPECT_EQ(rodrigues_angle(id, id), 0.0);
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  EXPECT_NEAR(rodrigues_angle(id, rz), std::numbers::pi / 2, 1e-12);
  const Eigen::Matrix3d flip = Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX()).toRotationMatrix();
  EXPECT_NEAR(rodrigues_angle(id, flip), std::numbers::pi, 1e-12);
}

TEST(Rodrigues, MatchesQuaternionDot) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto q1 = random_quaternion(rng), q2 = random_quaternion(rng);
    const double theta = rodrigues_angle(q1.toRotationMatrix(), q2.toRotationMatrix());
    EXPECT_NEAR(theta, quaternion_angle(q1, q2), 1e-9);
    EXPECT_GE(theta, 0.0);
    EXPECT_LE(theta, std::numbers::pi);
  }
}

TEST(Rodrigues, RejectsNonRotation) {
  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(0, 0) = 1.1;
  try {
    rodrigues_angle(bad, Eigen::Matrix3d::Identity());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidRotation);
  }
}

TEST(Geodesic, Examples) {
  CameraPose a, b;
  EXPECT_EQ(geodesic_distance(a, a), 0.0);
  b.translation = Eigen::Vector3d(0, 0, 10);
  EXPECT_NEAR(geodesic_distance(a, b, GeodesicConfig{0.1}), 1.0, 1e-15);
}

TEST(Geodesic, DirectFormulaOracle) {
  std::mt19937_64 rng(2);
  const GeodesicConfig cfg{0.37};
  for (int i = 0; i < 500; ++i) {
    const CameraPose a = random_pose(rng, 1), b = random_pose(rng, 2);
    const double tr = (a.rotation * b.rotation.transpose()).trace();
    const double expected =
        std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0)) + cfg.w_t * (a.translation - b.translation).norm();
    // acos is ill-conditioned near 0 and π; compare against the quaternion form there.
    const double robust = quaternion_angle(Eigen::Quaterniond(a.rotation), Eigen::Quaterniond(b.rotation)) +
                          cfg.w_t * (a.translation - b.translation).norm();
    const double got = geodesic_distance(a, b, cfg);
    EXPECT_NEAR(got, robust, 1e-12);
    EXPECT_NEAR(got, expected, 1e-7);
  }
}

TEST(Geodesic, MetricAxioms) {
  std::mt19937_64 rng(3);
  const GeodesicConfig cfg{0.1};
  for (int i = 0; i < 1000; ++i) {
    const CameraPose a = random_pose(rng, 1), b = random_pose(rng, 2), c = random_pose(rng, 3);
    const double ab = geodesic_distance(a, b, cfg), ba = geodesic_distance(b, a, cfg);
    EXPECT_NEAR(ab, ba, 1e-9);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(geodesic_distance(a, a, cfg), 0.0, 1e-9);
    EXPECT_LE(geodesic_distance(a, c, cfg), ab + geodesic_distance(b, c, cfg) + 1e-9);
  }
}

TEST(DistanceMatrix, EntriesAndSymmetry) {
  std::mt19937_64 rng(4);
  std::vector<CameraPose> a, b;
  for (std::uint32_t i = 0; i < 3; ++i) a.push_back(random_pose(rng, i));
  for (std::uint32_t i = 0; i < 4; ++i) b.push_back(random_pose(rng, 10 + i));
  const Eigen::MatrixXd m = distance_matrix(a, b);
  ASSERT_EQ(m.rows(), 3);
  ASSERT_EQ(m.cols(), 4);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) EXPECT_EQ(m(i, j), geodesic_distance(a[i], b[j]));
  }
  EXPECT_LT((distance_matrix(b, a) - m.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(distance_matrix(std::span(a).first(1), std::span(b).first(1)).size(), 1);

  b[2].id = a[0].id;
  try {
    distance_matrix(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateView);
  }
}

TEST(Greedy, ExhaustiveAndRingCases) {
  const auto poses = ring(6);
  std::vector<std::size_t> all = greedy_subset(poses, 6, 1, 0);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));

  for (std::size_t n = 1; n <= 4; ++n) {
    EXPECT_EQ(greedy_subset(poses, 3, n, 0), test::greedy_trace_oracle(poses, 3, n, 0, {})) << "n=" << n;
  }
  // Skipping the three nearest candidates at each step walks every other camera.
  std::vector<std::size_t> tri = greedy_subset(poses, 3, 4, 0);
  std::sort(tri.begin(), tri.end());
  EXPECT_EQ(tri, (std::vector<std::size_t>{0, 2, 4}));
}

TEST(Greedy, LineGivesContiguousChain) {
  std::vector<CameraPose> line;
  for (std::uint32_t i = 0; i < 8; ++i) {
    CameraPose p;
    p.translation = Eigen::Vector3d(static_cast<double>(i), 0.0, 0.0);
    p.id = ViewId{i};
    line.push_back(p);
  }
  EXPECT_EQ(greedy_subset(line, 5, 1, 0), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  // 3 and 5 tie from 4; the smaller id wins, then 2 and 5 tie again.
  EXPECT_EQ(greedy_subset(line, 3, 1, 4), (std::vector<std::size_t>{4, 3, 2}));
}

TEST(Greedy, RankOutOfRange) {
  const auto poses = ring(5);
  EXPECT_THROW(greedy_subset(poses, 3, 4, 0), Error);
  EXPECT_THROW(greedy_subset(poses, 3, 0, 0), Error);
  EXPECT_NO_THROW(greedy_subset(poses, 3, 3, 0));
}

TEST(Greedy, IndependentOfPoolOrder) {
  std::mt19937_64 rng(5);
  std::vector<CameraPose> poses;
  for (std::uint32_t i = 0; i < 9; ++i) poses.push_back(random_pose(rng, 100 + i));
  const auto ref = greedy_subset(poses, 4, 2, 0);
  std::vector<std::size_t> perm{0, 3, 1, 8, 2, 7, 4, 6, 5};
  std::vector<CameraPose> shuffled;
  for (auto i : perm) shuffled.push_back(poses[i]);
  const auto got = greedy_subset(shuffled, 4, 2, 0);
  ASSERT_EQ(got.size(), ref.size());
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_EQ(shuffled[got[k]].id, poses[ref[k]].id);
}

TEST(SelectViewSubset, EqualsExhaustiveSweep) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n_views = 2 + rng() % 11;
    const std::size_t m = 1 + rng() % std::min<std::size_t>(5, n_views);
    std::vector<CameraPose> poses;
    for (std::uint32_t i = 0; i < n_views; ++i) poses.push_back(random_pose(rng, i));
    const SubsetResult r = select_view_subset(poses, m, {}, always_registers());
    const auto best_idx = test::exhaustive_sweep_oracle(poses, m, default_seed_index(poses), {});
    const double best = max_pairwise_distance(poses, best_idx);
    EXPECT_EQ(r.indices, best_idx);
    EXPECT_NEAR(r.max_pairwise, best, 1e-12);
    EXPECT_EQ(r.indices.size(), m);
    EXPECT_EQ(std::set<std::size_t>(r.indices.begin(), r.indices.end()).size(), m);
    EXPECT_EQ(r.sweep_log.size(), n_views - m + 1);
  }
}

TEST(MaxPairwiseDistance, IndependentOfOrder) {
  std::mt19937_64 rng(9);
  std::vector<CameraPose> poses;
  for (std::uint32_t i = 0; i < 6; ++i) poses.push_back(random_pose(rng, i));
  std::vector<std::size_t> idx{4, 1, 5, 0};
  const double ref = max_pairwise_distance(poses, idx);
  std::sort(idx.begin(), idx.end());
  do {
    EXPECT_EQ(max_pairwise_distance(poses, idx), ref);
  } while (std::next_permutation(idx.begin(), idx.end()));
}

TEST(SelectViewSubset, ProbeFailures) {
  const auto poses = ring(8);
  const RegistrationProbe only_first = [](std::span<const std::size_t>) -> std::optional<std::size_t> {
    static int calls = 0;
    return calls++ == 0 ? std::optional<std::size_t>(10) : std::nullopt;
  };
  const SubsetResult r = select_view_subset(poses, 3, {}, only_first, 0);
  EXPECT_EQ(r.n_star, 1u);
  EXPECT_EQ(r.indices, greedy_subset(poses, 3, 1, 0));
  EXPECT_EQ(r.sweep_log.size(), 2u);

  const RegistrationProbe never = [](std::span<const std::size_t>) -> std::optional<std::size_t> {
    return std::nullopt;
  };
  try {
    select_view_subset(poses, 3, {}, never);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoRegistrableSubset);
  }
}

TEST(SelectViewSubset, SweepIsNonMonotone) {
  // Ring with uneven heights, as in the toy scene.
  std::vector<CameraPose> poses;
  const Intrinsics k = test::square_intrinsics(32, 32.0);
  for (int i = 0; i < 24; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 24;
    poses.push_back(ring_pose(k, a, 4.0, 1.0 + 0.3 * std::sin(3 * a), ViewId{static_cast<std::uint32_t>(i)}));
  }
  const SubsetResult r = select_view_subset(poses, 9, {}, always_registers());
  bool decreased = false;
  for (std::size_t i = 1; i < r.sweep_log.size(); ++i) {
    decreased |= r.sweep_log[i].max_pairwise < r.sweep_log[i - 1].max_pairwise - 1e-12;
  }
  EXPECT_TRUE(decreased);
  EXPECT_GT(r.n_star, 1u);
}

TEST(Slerp, EndpointsAndClosedForm) {
  std::mt19937_64 rng(7);
  const auto a = random_quaternion(rng), b = random_quaternion(rng);
  EXPECT_LT(quaternion_angle(slerp(a, b, 0.0), a), 1e-9);
  EXPECT_LT(quaternion_angle(slerp(a, b, 1.0), b), 1e-9);
  const Eigen::Quaterniond z90(Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()));
  const Eigen::Quaterniond z45(Eigen::AngleAxisd(std::numbers::pi / 4, Eigen::Vector3d::UnitZ()));
  EXPECT_LT(quaternion_angle(slerp(Eigen::Quaterniond::Identity(), z90, 0.5), z45), 1e-12);
  EXPECT_THROW(slerp(Eigen::Quaterniond(0, 0, 0, 0), a, 0.5), Error);
}

TEST(Slerp, AngleProportionality) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_quaternion(rng), b = random_quaternion(rng);
    const double u = u01(rng);
    const auto s = slerp(a, b, u);
    EXPECT_NEAR(s.norm(), 1.0, 1e-12);
    EXPECT_NEAR(quaternion_angle(a, s), u * quaternion_angle(a, b), 1e-9);
  }
}

TEST(Spline, TwoPointAndEndpoints) {
  const std::vector<Eigen::Vector3d> two{{0, 0, 0}, {2, 4, 6}};
  EXPECT_LT((spline_translation(two, 0.5) - Eigen::Vector3d(1, 2, 3)).norm(), 1e-15);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  std::vector<Eigen::Vector3d> ctrl;
  for (int i = 0; i < 5; ++i) ctrl.emplace_back(n(rng), n(rng), n(rng));
  EXPECT_LT((spline_translation(ctrl, 0.0) - ctrl.front()).norm(), 1e-12);
  EXPECT_LT((spline_translation(ctrl, 1.0) - ctrl.back()).norm(), 1e-12);
  const std::vector<Eigen::Vector3d> one{{1, 1, 1}};
  try {
    spline_translation(one, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientControlPoints);
  }
}

TEST(Spline, CollinearStaysOnLine) {
  const Eigen::Vector3d origin(1, -2, 0.5), dir = Eigen::Vector3d(0.3, 0.4, -1.2).normalized();
  std::vector<Eigen::Vector3d> ctrl;
  for (int i = 0; i < 4; ++i) ctrl.push_back(origin + 1.5 * i * dir);
  for (int k = 0; k <= 100; ++k) {
    const Eigen::Vector3d p = spline_translation(ctrl, k / 100.0) - origin;
    EXPECT_LT((p - p.dot(dir) * dir).norm(), 1e-9);
  }
}

TEST(PseudoView, InterpolationProperties) {
  std::mt19937_64 rng(10);
  const CameraPose a = random_pose(rng, 1), b = random_pose(rng, 2);
  const CameraPose at0 = interpolate_pseudo_view(a, b, 0.0, ViewId{99});
  EXPECT_LT((at0.rotation - a.rotation).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((at0.translation - a.translation).norm(), 1e-15);
  EXPECT_EQ(at0.id.value, 99u);

  CameraPose c = a;
  c.translation += Eigen::Vector3d(2, 0, 0);
  const CameraPose mid = interpolate_pseudo_view(a, c, 0.5, ViewId{5});
  EXPECT_LT((mid.translation - (a.translation + Eigen::Vector3d(1, 0, 0))).norm(), 1e-12);
  EXPECT_LT((mid.rotation - a.rotation).cwiseAbs().maxCoeff(), 1e-12);

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const CameraPose p = random_pose(rng, 1), q = random_pose(rng, 2);
    EXPECT_TRUE(interpolate_pseudo_view(p, q, u01(rng), ViewId{3}).is_valid_rotation(1e-9));
  }

  CameraPose other = b;
  other.intrinsics.fx *= 2;
  try {
    interpolate_pseudo_view(a, other, 0.5, ViewId{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IntrinsicsMismatch);
  }
}

TEST(Perturb, ZeroSigmaAndDeterminism) {
  std::mt19937_64 rng(11);
  const CameraPose p = random_pose(rng, 1);
  const CameraPose same = perturb_camera(p, 0.0, 0.0, 42);
  EXPECT_EQ(same.rotation, p.rotation);
  EXPECT_EQ(same.translation, p.translation);
  const CameraPose x = perturb_camera(p, 0.1, 0.2, 7), y = perturb_camera(p, 0.1, 0.2, 7);
  EXPECT_EQ(x.rotation, y.rotation);
  EXPECT_EQ(x.translation, y.translation);
  EXPECT_TRUE(x.is_valid_rotation(1e-9));
}

TEST(Perturb, MeanAngleMonteCarlo) {
  // E|X| for X ~ N(0, σ²) truncated at 3σ.
  const double sigma = 0.05;
  const double c = 3.0;
  const double expected = sigma * std::sqrt(2.0 / std::numbers::pi) * (1.0 - std::exp(-0.5 * c * c)) /
                          std::erf(c / std::sqrt(2.0));
  std::mt19937_64 rng(12);
  const CameraPose p = random_pose(rng, 1);
  double sum = 0.0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) sum += rodrigues_angle(p.rotation, perturb_camera(p, sigma, 0.0, s).rotation);
  EXPECT_NEAR(sum / n, expected, 0.05 * expected);
}

TEST(Perturb, CenterNoiseScale) {
  std::mt19937_64 rng(13);
  const CameraPose p = random_pose(rng, 1);
  double sq = 0.0;
  const int n = 4000;
  for (int s = 0; s < n; ++s) sq += (perturb_camera(p, 0.0, 0.1, s).center() - p.center()).squaredNorm();
  EXPECT_NEAR(sq / n, 3 * 0.01, 0.003);
}

}  // namespace
}  // namespace sp360
