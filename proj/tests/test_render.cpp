#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "sp360/error.hpp"
#include "sp360/gaussian.hpp"
#include "sp360/render.hpp"
#include "test_util.hpp"

namespace sp360 {
namespace {

const Eigen::Vector4d kIdentityQ(1, 0, 0, 0);

TEST(Project, PinholeClosedForm) {
  const CameraPose cam = test::front_camera(32, 40.0, 5.0);
  const double sigma = 0.1, d = 5.0, f = 40.0;
  const auto p = project_gaussian(Eigen::Vector3d::Zero(), Eigen::Vector3d::Constant(sigma), kIdentityQ, cam);
  ASSERT_TRUE(p.has_value());
  const double expected = (f * sigma / d) * (f * sigma / d) + 0.3;
  EXPECT_NEAR(p->cov(0, 0), expected, 1e-12);
  EXPECT_NEAR(p->cov(1, 1), expected, 1e-12);
  EXPECT_NEAR(p->cov(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(p->depth, d, 1e-12);
  EXPECT_NEAR(p->mean.x(), 16.0, 1e-12);
}

TEST(Project, BehindCameraIsCulled) {
  const CameraPose cam = test::front_camera(32, 40.0, 5.0);
  EXPECT_FALSE(project_gaussian(Eigen::Vector3d(0, 0, -6), Eigen::Vector3d::Constant(0.1), kIdentityQ, cam));
}

TEST(Project, IsotropicIgnoresRotation) {
  std::mt19937_64 rng(1);
  const CameraPose cam = test::front_camera(32, 40.0, 5.0);
  const Eigen::Vector3d mean(0.3, -0.2, 0.4);
  const auto ref = project_gaussian(mean, Eigen::Vector3d::Constant(0.2), kIdentityQ, cam);
  for (int i = 0; i < 20; ++i) {
    const auto q = test::random_quaternion(rng);
    const auto p = project_gaussian(mean, Eigen::Vector3d::Constant(0.2), Eigen::Vector4d(q.w(), q.x(), q.y(), q.z()), cam);
    EXPECT_LT((p->cov - ref->cov).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Render, EmptyCloudShowsBackground) {
  const CameraPose cam = test::front_camera(8, 8.0);
  const Eigen::Vector3d bg(0.1, 0.2, 0.3);
  const RenderOutput o = render(GaussianCloud{}, cam, bg);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) EXPECT_EQ(o.color.at(x, y, c), bg[c]);
      EXPECT_EQ(o.alpha.at(x, y), 0.0);
      EXPECT_EQ(o.depth.at(x, y), 0.0);
    }
  }
}

TEST(Render, SingleGaussianIsUnimodal) {
  const CameraPose cam = test::front_camera(33, 30.0, 4.0);
  GaussianCloud c;
  // The optical axis passes through the center of pixel (16, 16).
  c.add(Eigen::Vector3d::Zero(), Eigen::Vector3d::Constant(0.3), kIdentityQ, 0.9,
        Eigen::Vector3d(1, 1, 1));
  const RenderOutput o = render(c, cam, Eigen::Vector3d::Zero());
  double best = -1;
  int bx = 0, by = 0;
  for (int y = 0; y < 33; ++y) {
    for (int x = 0; x < 33; ++x) {
      if (o.alpha.at(x, y) > best) {
        best = o.alpha.at(x, y);
        bx = x;
        by = y;
      }
    }
  }
  EXPECT_EQ(bx, 16);
  EXPECT_EQ(by, 16);
  for (int x = 17; x < 33; ++x) EXPECT_LE(o.alpha.at(x, 16), o.alpha.at(x - 1, 16));
  for (int y = 15; y >= 0; --y) EXPECT_LE(o.alpha.at(16, y), o.alpha.at(16, y + 1));
  EXPECT_NEAR(o.depth.at(16, 16), 4.0, 1e-4);
}

TEST(Render, TwoTermCompositing) {
  const CameraPose cam = test::front_camera(9, 10.0, 4.0);
  RenderSettings s;
  GaussianCloud c;
  const Eigen::Vector3d c1(0.9, 0.1, 0.2), c2(0.1, 0.8, 0.3), bg(0.2, 0.2, 0.6);
  c.add(Eigen::Vector3d(0.0, 0.0, 1.0), Eigen::Vector3d::Constant(0.2), kIdentityQ, 0.7, c2);  // farther
  c.add(Eigen::Vector3d(0.0, 0.0, 0.0), Eigen::Vector3d::Constant(0.15), kIdentityQ, 0.6, c1);
  const RenderOutput o = render(c, cam, bg, s);
  // Pixel (4,4); both means project to its center (4.5, 4.5) exactly.
  auto alpha_at_center = [&](std::size_t i) {
    const auto p = project_gaussian(c.means[i], c.scale(i), c.rotations[i], cam, s);
    const Eigen::Vector2d d = Eigen::Vector2d(4.5, 4.5) - p->mean;
    return c.opacity(i) * std::exp(-0.5 * d.dot(p->cov.inverse() * d));
  };
  const double a1 = alpha_at_center(1), a2 = alpha_at_center(0);
  for (int ch = 0; ch < 3; ++ch) {
    const double expected = c1[ch] * a1 + c2[ch] * a2 * (1 - a1) + bg[ch] * (1 - a1) * (1 - a2);
    EXPECT_NEAR(o.color.at(4, 4, ch), expected, 1e-6);
  }
  EXPECT_NEAR(o.alpha.at(4, 4), 1 - (1 - a1) * (1 - a2), 1e-12);
  EXPECT_NEAR(o.depth.at(4, 4), (4.0 * a1 + 5.0 * a2 * (1 - a1)) / (1 - (1 - a1) * (1 - a2)), 1e-9);
}

TEST(Render, Invariants) {
  std::mt19937_64 rng(2);
  const CameraPose cam = test::front_camera(24, 24.0);
  const GaussianCloud cloud = test::random_cloud(rng, 30);
  const RenderOutput o = render(cloud, cam, Eigen::Vector3d::Zero());
  for (std::size_t p = 0; p < o.alpha.size(); ++p) {
    EXPECT_GE(o.alpha.data[p], 0.0);
    EXPECT_LE(o.alpha.data[p], 1.0);
    for (int ch = 0; ch < 3; ++ch) EXPECT_LE(o.color.data[3 * p + ch], o.alpha.data[p] + 1e-6);
  }
  const RenderOutput again = render(cloud, cam, Eigen::Vector3d::Zero());
  EXPECT_EQ(again.color, o.color);
  EXPECT_EQ(again.depth, o.depth);
  EXPECT_EQ(again.alpha, o.alpha);

  GaussianCloud with_ghost = cloud;
  with_ghost.means.push_back(Eigen::Vector3d(0, 0, -0.5));
  with_ghost.log_scales.push_back(Eigen::Vector3d::Constant(-1.0));
  with_ghost.rotations.push_back(kIdentityQ);
  with_ghost.opacity_logits.push_back(-std::numeric_limits<double>::infinity());
  with_ghost.colors.push_back(Eigen::Vector3d(1, 1, 1));
  const RenderOutput ghost = render(with_ghost, cam, Eigen::Vector3d::Zero());
  for (std::size_t i = 0; i < o.color.size(); ++i) EXPECT_NEAR(ghost.color.data[i], o.color.data[i], 1e-7);
  for (std::size_t i = 0; i < o.alpha.size(); ++i) EXPECT_NEAR(ghost.alpha.data[i], o.alpha.data[i], 1e-7);
}

TEST(Backward, ZeroSeedsGiveZeroGradients) {
  std::mt19937_64 rng(3);
  const CameraPose cam = test::front_camera(16, 16.0);
  const GaussianCloud cloud = test::random_cloud(rng, 5);
  const RenderGradients g =
      render_backward(cloud, cam, Eigen::Vector3d::Zero(), Raster(16, 16, 3), Raster(16, 16, 1));
  EXPECT_EQ(g.params.max_abs(), 0.0);
}

TEST(Backward, ColorGradientOfSingleGaussian) {
  const CameraPose cam = test::front_camera(16, 16.0);
  GaussianCloud c;
  c.add(Eigen::Vector3d(0.1, -0.05, 0.0), Eigen::Vector3d(0.3, 0.2, 0.25), kIdentityQ, 0.8, Eigen::Vector3d(0.3, 0.5, 0.7));
  const RenderOutput o = render(c, cam, Eigen::Vector3d::Zero());
  const RenderGradients g =
      render_backward(c, cam, Eigen::Vector3d::Zero(), Raster(16, 16, 3, 1.0), Raster(16, 16, 1));
  // With one Gaussian, a·T summed over pixels is the accumulated alpha.
  double sum_alpha = 0.0;
  for (double a : o.alpha.data) sum_alpha += a;
  for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(g.params.colors[0][ch], sum_alpha, 1e-9);
}

TEST(Backward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const RenderSettings s = test::fd_settings();
  for (int scene = 0; scene < 8; ++scene) {
    const test::FdScene fd = test::random_fd_scene(rng, 1 + scene % 5);
    const auto rep = test::finite_difference_check(fd, s);
    EXPECT_LT(rep.max_relative_error, 1e-4) << "scene " << scene;
  }
}

TEST(Backward, ShapeMismatchThrows) {
  const CameraPose cam = test::front_camera(16, 16.0);
  try {
    render_backward(GaussianCloud{}, cam, Eigen::Vector3d::Zero(), Raster(8, 8, 3), Raster(16, 16, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeError);
  }
}

TEST(Backward, ScreenGradientStatisticIsReported) {
  std::mt19937_64 rng(5);
  const test::FdScene fd = test::random_fd_scene(rng, 3);
  const RenderGradients g = render_backward(fd.cloud, fd.camera, fd.background, fd.grad_color, fd.grad_depth);
  ASSERT_EQ(g.screen_grad_norm.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(g.visible[i]);
    EXPECT_GT(g.screen_grad_norm[i], 0.0);
  }
}

TEST(OpacityMask, Cases) {
  Raster ones(4, 4, 1, 1.0), zeros(4, 4, 1, 0.0);
  for (double v : opacity_mask(ones, 0.8).data) EXPECT_EQ(v, 0.0);
  for (double v : opacity_mask(zeros, 0.8).data) EXPECT_EQ(v, 1.0);
  Raster edge(1, 1, 1, 0.8);
  EXPECT_EQ(opacity_mask(edge, 0.8).data[0], 1.0);
  for (double tau : {0.0, 1.0, -0.1, 1.5}) {
    try {
      opacity_mask(ones, tau);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidThreshold);
    }
  }
}

TEST(OpacityMask, MonotoneInTau) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const Raster a = test::random_raster(rng, 12, 10, 1);
    double prev = -1;
    for (double tau = 0.05; tau < 1.0; tau += 0.05) {
      double count = 0;
      for (double v : opacity_mask(a, tau).data) count += v;
      EXPECT_GE(count, prev);
      prev = count;
    }
  }
}

TEST(Cloud, EncodeDecodeAndErrors) {
  std::mt19937_64 rng(7);
  GaussianCloud c = test::random_cloud(rng, 4);
  for (auto* field : {&c.means, &c.log_scales, &c.colors}) {
    for (auto& v : *field) v = v.cast<float>().cast<double>();
  }
  for (auto& q : c.rotations) q = q.cast<float>().cast<double>();
  for (auto& o : c.opacity_logits) o = static_cast<float>(o);
  const GaussianCloud back = decode_cloud(encode_cloud(c));
  EXPECT_EQ(back.means, c.means);
  EXPECT_EQ(back.rotations, c.rotations);
  EXPECT_EQ(back.opacity_logits, c.opacity_logits);
  EXPECT_EQ(back.colors, c.colors);
  EXPECT_TRUE(back.satisfies_invariants());

  auto bytes = encode_cloud(c);
  bytes[1] = 'X';
  EXPECT_THROW(decode_cloud(bytes), Error);
}

}  // namespace
}  // namespace sp360
