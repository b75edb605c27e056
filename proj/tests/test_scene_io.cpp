#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include "sp360/error.hpp"
#include "sp360/scene_io.hpp"
#include "sp360/toy_scene.hpp"
#include "test_util.hpp"

namespace sp360 {
namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

void write_model(const fs::path& dir, const std::string& cameras, const std::string& images,
                 const std::string& points) {
  fs::create_directories(dir);
  write_file(dir / "cameras.txt", cameras);
  write_file(dir / "images.txt", images);
  write_file(dir / "points3D.txt", points);
}

TEST(Colmap, IdentityImage) {
  const auto dir = test::temp_dir("colmap_identity");
  write_model(dir, "1 PINHOLE 32 24 30 31 16 12\n", "7 1 0 0 0 0 0 0 1 a.png\n\n", "");
  const ColmapModel m = read_colmap_text(dir);
  ASSERT_EQ(m.poses.size(), 1u);
  EXPECT_TRUE(m.poses[0].rotation.isApprox(Eigen::Matrix3d::Identity(), 0.0));
  EXPECT_EQ(m.poses[0].translation, Eigen::Vector3d::Zero());
  EXPECT_EQ(m.poses[0].id.value, 7u);
  EXPECT_EQ(m.poses[0].intrinsics, (Intrinsics{30, 31, 16, 12, 32, 24}));
  EXPECT_EQ(m.point_cloud.size(), 0u);
}

TEST(Colmap, SimplePinholeSharesFocal) {
  const auto dir = test::temp_dir("colmap_simple");
  write_model(dir, "# comment\n2 SIMPLE_PINHOLE 10 10 9 5 5\n", "1 1 0 0 0 0 0 0 2 x.png\n\n", "");
  const ColmapModel m = read_colmap_text(dir);
  EXPECT_EQ(m.poses[0].intrinsics.fx, 9.0);
  EXPECT_EQ(m.poses[0].intrinsics.fy, 9.0);
}

// Independent writer: text is produced here with printf, not by write_colmap_text.
TEST(Colmap, RingRoundTripAgainstWriterOracle) {
  const auto dir = test::temp_dir("colmap_ring");
  const Intrinsics k = test::square_intrinsics(64, 60.0);
  std::string cams, imgs, pts;
  std::vector<CameraPose> expected;
  char buf[512];
  std::snprintf(buf, sizeof buf, "1 PINHOLE 64 64 %.17g %.17g %.17g %.17g\n", k.fx, k.fy, k.cx, k.cy);
  cams = buf;
  for (int i = 0; i < 6; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 6.0;
    const CameraPose p = ring_pose(k, a, 4.0, 0.5, ViewId{static_cast<std::uint32_t>(i + 1)});
    const Eigen::Quaterniond q(p.rotation);
    std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g %.17g %.17g %.17g %.17g 1 img%d.png\n1.0 2.0 -1\n", i + 1,
                  q.w(), q.x(), q.y(), q.z(), p.translation.x(), p.translation.y(), p.translation.z(), i);
    imgs += buf;
    expected.push_back(p);
  }
  for (int i = 0; i < 5; ++i) {
    std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g %d %d %d 0.5 %d 0\n", i + 1, 0.1 * i, -0.2 * i, 0.3, 10 * i,
                  20, 255, (i % 6) + 1);
    pts += buf;
  }
  write_model(dir, cams, imgs, pts);
  const ColmapModel m = read_colmap_text(dir);
  ASSERT_EQ(m.poses.size(), 6u);
  for (int i = 0; i < 6; ++i) {
    EXPECT_LT((m.poses[i].rotation - expected[i].rotation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((m.poses[i].translation - expected[i].translation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(m.image_names[i], "img" + std::to_string(i) + ".png");
    EXPECT_TRUE(m.poses[i].is_valid_rotation());
  }
  ASSERT_EQ(m.point_cloud.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_LT((m.point_cloud.points[i] - Eigen::Vector3d(0.1 * i, -0.2 * i, 0.3)).norm(), 1e-12);
    EXPECT_NEAR(m.point_cloud.colors[i].x(), 10.0 * i / 255.0, 1e-12);
  }

  // And back through our own writer.
  const auto dir2 = test::temp_dir("colmap_ring2");
  write_colmap_text(dir2, m.poses, m.image_names, m.point_cloud);
  const ColmapModel again = read_colmap_text(dir2);
  for (int i = 0; i < 6; ++i) {
    EXPECT_LT((again.poses[i].rotation - m.poses[i].rotation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((again.poses[i].translation - m.poses[i].translation).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Colmap, Errors) {
  const auto dir = test::temp_dir("colmap_errors");
  try {
    read_colmap_text(dir / "missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingModelFile);
  }

  write_model(dir, "1 PINHOLE 32 24 30 31 16 12\n", "# header\n1 1 0 0 oops 0 0 0 1 a.png\n\n", "");
  try {
    read_colmap_text(dir);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }

  write_model(dir, "1 OPENCV 32 24 30 31 16 12 0 0 0 0\n", "", "");
  try {
    read_colmap_text(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedCameraModel);
  }

  write_model(dir, "1 PINHOLE 32 24 30 31 16 12\n", "1 1 0 0 0 0 0 0 9 a.png\n\n", "");
  try {
    read_colmap_text(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InconsistentModel);
  }

  write_model(dir, "1 PINHOLE 32 24 30 31 16 12\n", "1 1 0 0 0 0 0 0 1 a.png\n\n", "1 0 0 0 1 2 3 0.1 5 0\n");
  try {
    read_colmap_text(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InconsistentModel);
  }
}

TEST(Colmap, QuaternionConversionIsARotation) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Quaterniond q = test::random_quaternion(rng);
    CameraPose p;
    p.rotation = quaternion_to_rotation(Eigen::Vector4d(q.w(), q.x(), q.y(), q.z()));
    EXPECT_TRUE(p.is_valid_rotation(1e-9));
    EXPECT_LT((p.rotation - q.toRotationMatrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Colmap, LoadSceneWithImagesAndDepths) {
  const auto dir = test::temp_dir("colmap_scene");
  write_model(dir / "sparse", "1 PINHOLE 4 2 4 4 2 1\n", "1 1 0 0 0 0 0 0 1 a.png\n\n", "1 0 0 1 255 0 0 0.1\n");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "depths");
  Raster img(4, 2, 3, 0.0);
  img.at(1, 1, 2) = 1.0;
  save_raster(dir / "images" / "a.png", img);
  Raster depth(4, 2, 1, 2.5);
  save_raster(dir / "depths" / "a.fras", depth);
  const Scene s = load_colmap_scene(dir / "sparse", dir / "images", dir / "depths");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.images[0], img);
  ASSERT_TRUE(s.depths[0].has_value());
  EXPECT_EQ(*s.depths[0], depth);
}

TEST(Raster, FloatRoundTrips) {
  Raster zeros(2, 2, 1, 0.0);
  EXPECT_EQ(decode_fras(encode_fras(zeros)), zeros);
  Raster steps(2, 2, 1);
  steps.data = {0.0, 0.25, 0.5, 1.0};
  EXPECT_EQ(decode_fras(encode_fras(steps)), steps);

  std::mt19937_64 rng(3);
  Raster r = test::random_raster(rng, 64, 64, 1);
  for (auto& v : r.data) v = static_cast<float>(v);
  const auto dir = test::temp_dir("raster_rt");
  save_raster(dir / "r.fras", r);
  EXPECT_EQ(load_raster(dir / "r.fras"), r);
}

TEST(Raster, PngWithinOneLevel) {
  std::mt19937_64 rng(5);
  const Raster r = test::random_raster(rng, 9, 7, 3);
  const Raster back = decode_png(encode_png(r));
  ASSERT_TRUE(back.same_shape(r));
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_LE(std::abs(back.data[i] - r.data[i]), 1.0 / 255.0);
}

TEST(Raster, HeaderErrors) {
  auto bytes = encode_fras(Raster(3, 2, 1, 1.0));
  auto bad = bytes;
  bad[0] = 'X';
  try {
    decode_fras(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatError);
  }
  bytes.pop_back();
  try {
    decode_fras(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::CorruptRaster);
  }
}

TEST(Split, EveryEighth) {
  const Split s = train_test_split(16, 8);
  EXPECT_EQ(s.test, (std::vector<std::size_t>{0, 8}));
  EXPECT_EQ(s.train.size(), 14u);

  const Split one = train_test_split(1, 8);
  EXPECT_EQ(one.test, (std::vector<std::size_t>{0}));
  EXPECT_TRUE(one.train.empty());

  const Split s25 = train_test_split(25, 8);
  EXPECT_EQ(s25.test.size(), 4u);
  EXPECT_EQ(s25.train.size(), 21u);

  EXPECT_THROW(train_test_split(10, 1), Error);
}

TEST(Split, PartitionProperty) {
  for (std::size_t n = 1; n < 40; ++n) {
    for (std::size_t stride = 2; stride < 12; ++stride) {
      const Split s = train_test_split(n, stride);
      std::set<std::size_t> all(s.train.begin(), s.train.end());
      for (std::size_t t : s.test) {
        EXPECT_EQ(t % stride, 0u);
        EXPECT_TRUE(all.insert(t).second);
      }
      EXPECT_EQ(all.size(), n);
      EXPECT_EQ(*all.rbegin(), n - 1);
    }
  }
}

}  // namespace
}  // namespace sp360
