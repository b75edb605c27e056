#include "sp360/scene_io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "sp360/error.hpp"

namespace sp360 {

namespace fs = std::filesystem;

bool Intrinsics::valid() const {
  return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 && cx < width &&
         cy >= 0.0 && cy < height;
}

Intrinsics Intrinsics::scaled(double factor) const {
  Intrinsics k = *this;
  k.fx *= factor;
  k.fy *= factor;
  k.cx *= factor;
  k.cy *= factor;
  k.width = std::max(1, static_cast<int>(width * factor));
  k.height = std::max(1, static_cast<int>(height * factor));
  return k;
}

Eigen::Quaterniond CameraPose::quaternion() const {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

bool CameraPose::is_valid_rotation(double tol) const {
  const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

CameraPose CameraPose::look_at(const Intrinsics& intrinsics, const Eigen::Vector3d& eye,
                               const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                               ViewId id) {
  // OpenCV/COLMAP camera frame: +z forward, +y down, +x right.
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  CameraPose pose;
  pose.intrinsics = intrinsics;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = forward.transpose();
  pose.translation = -pose.rotation * eye;
  pose.id = id;
  return pose;
}

Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d& wxyz) {
  const Eigen::Vector4d q = wxyz.normalized();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),  //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

void Scene::validate() const {
  if (images.size() != poses.size()) {
    throw Error(ErrorCode::InconsistentModel, "scene has " + std::to_string(poses.size()) +
                                                  " poses but " + std::to_string(images.size()) +
                                                  " images");
  }
  if (!depths.empty() && depths.size() != poses.size()) {
    throw Error(ErrorCode::InconsistentModel, "depth list length differs from pose count");
  }
  for (std::size_t i = 0; i < depths.size(); ++i) {
    if (depths[i] && (depths[i]->width != images[i].width || depths[i]->height != images[i].height)) {
      throw Error(ErrorCode::InconsistentModel, "depth raster size differs from image " +
                                                    std::to_string(i));
    }
  }
}

Scene Scene::subset(const std::vector<std::size_t>& indices) const {
  Scene out;
  out.point_cloud = point_cloud;
  for (std::size_t i : indices) {
    out.poses.push_back(poses.at(i));
    out.images.push_back(images.at(i));
    out.depths.push_back(i < depths.size() ? depths[i] : std::nullopt);
    out.image_names.push_back(i < image_names.size() ? image_names[i] : std::string{});
  }
  return out;
}

namespace {

/// Line reader that tracks 1-based line numbers for error messages.
class LineReader {
 public:
  explicit LineReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw Error(ErrorCode::MissingModelFile, path.string());
  }

  /// Next line that is neither blank nor a comment.
  bool next_content(std::string& line) {
    while (next_raw(line)) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  }

  bool next_raw(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    return true;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(path_.filename().string(), line_no_, message);
  }

  int line_no() const { return line_no_; }

 private:
  fs::path path_;
  std::ifstream in_;
  int line_no_ = 0;
};

template <typename T>
T read_field(std::istringstream& ss, const LineReader& reader, const char* name) {
  T value{};
  if (!(ss >> value)) reader.fail(std::string("expected ") + name);
  return value;
}

std::map<int, Intrinsics> read_cameras(const fs::path& path) {
  LineReader reader(path);
  std::map<int, Intrinsics> cameras;
  std::string line;
  while (reader.next_content(line)) {
    std::istringstream ss(line);
    const int id = read_field<int>(ss, reader, "CAMERA_ID");
    const auto model = read_field<std::string>(ss, reader, "MODEL");
    Intrinsics k;
    k.width = read_field<int>(ss, reader, "WIDTH");
    k.height = read_field<int>(ss, reader, "HEIGHT");
    if (model == "PINHOLE") {
      k.fx = read_field<double>(ss, reader, "fx");
      k.fy = read_field<double>(ss, reader, "fy");
      k.cx = read_field<double>(ss, reader, "cx");
      k.cy = read_field<double>(ss, reader, "cy");
    } else if (model == "SIMPLE_PINHOLE") {
      k.fx = k.fy = read_field<double>(ss, reader, "f");
      k.cx = read_field<double>(ss, reader, "cx");
      k.cy = read_field<double>(ss, reader, "cy");
    } else {
      throw Error(ErrorCode::UnsupportedCameraModel,
                  path.filename().string() + ":" + std::to_string(reader.line_no()) + ": " + model);
    }
    if (!k.valid()) reader.fail("invalid intrinsics for camera " + std::to_string(id));
    if (!cameras.emplace(id, k).second) reader.fail("duplicate CAMERA_ID " + std::to_string(id));
  }
  return cameras;
}

struct ImageRecord {
  int image_id;
  CameraPose pose;
  std::string name;
};

std::vector<ImageRecord> read_images(const fs::path& path, const std::map<int, Intrinsics>& cameras) {
  LineReader reader(path);
  std::vector<ImageRecord> images;
  std::set<int> seen;
  std::string line;
  while (reader.next_content(line)) {
    std::istringstream ss(line);
    ImageRecord rec;
    rec.image_id = read_field<int>(ss, reader, "IMAGE_ID");
    Eigen::Vector4d q;
    for (int i = 0; i < 4; ++i) q[i] = read_field<double>(ss, reader, "quaternion");
    Eigen::Vector3d t;
    for (int i = 0; i < 3; ++i) t[i] = read_field<double>(ss, reader, "translation");
    const int camera_id = read_field<int>(ss, reader, "CAMERA_ID");
    rec.name = read_field<std::string>(ss, reader, "NAME");
    if (q.norm() == 0.0) reader.fail("zero quaternion");
    auto cam = cameras.find(camera_id);
    if (cam == cameras.end()) {
      throw Error(ErrorCode::InconsistentModel, "image " + std::to_string(rec.image_id) +
                                                    " references unknown camera " +
                                                    std::to_string(camera_id));
    }
    if (!seen.insert(rec.image_id).second) reader.fail("duplicate IMAGE_ID");
    rec.pose.intrinsics = cam->second;
    rec.pose.rotation = quaternion_to_rotation(q);
    rec.pose.translation = t;
    rec.pose.id = ViewId{static_cast<std::uint32_t>(rec.image_id)};
    images.push_back(std::move(rec));
    // POINTS2D line; may be blank and may be missing at EOF.
    reader.next_raw(line);
  }
  return images;
}

SparsePointCloud read_points(const fs::path& path, const std::set<int>& image_ids) {
  LineReader reader(path);
  SparsePointCloud cloud;
  std::string line;
  while (reader.next_content(line)) {
    std::istringstream ss(line);
    read_field<long long>(ss, reader, "POINT3D_ID");
    Eigen::Vector3d p;
    for (int i = 0; i < 3; ++i) p[i] = read_field<double>(ss, reader, "XYZ");
    Eigen::Vector3d c;
    for (int i = 0; i < 3; ++i) c[i] = read_field<int>(ss, reader, "RGB") / 255.0;
    read_field<double>(ss, reader, "ERROR");
    int image_id = 0;
    int point2d_idx = 0;
    while (ss >> image_id) {
      if (!(ss >> point2d_idx)) reader.fail("track entry without POINT2D_IDX");
      if (!image_ids.contains(image_id)) {
        throw Error(ErrorCode::InconsistentModel, "point track references unregistered image " +
                                                      std::to_string(image_id));
      }
    }
    if (!ss.eof()) reader.fail("malformed track");
    if (!p.allFinite()) reader.fail("non-finite point");
    cloud.points.push_back(p);
    cloud.colors.push_back(c);
  }
  return cloud;
}

}  // namespace

ColmapModel read_colmap_text(const fs::path& model_dir) {
  for (const char* name : {"cameras.txt", "images.txt", "points3D.txt"}) {
    if (!fs::exists(model_dir / name)) {
      throw Error(ErrorCode::MissingModelFile, (model_dir / name).string());
    }
  }
  const auto cameras = read_cameras(model_dir / "cameras.txt");
  auto images = read_images(model_dir / "images.txt", cameras);
  std::set<int> ids;
  for (const auto& rec : images) ids.insert(rec.image_id);

  ColmapModel model;
  model.point_cloud = read_points(model_dir / "points3D.txt", ids);
  std::stable_sort(images.begin(), images.end(),
                   [](const ImageRecord& a, const ImageRecord& b) { return a.name < b.name; });
  for (auto& rec : images) {
    model.poses.push_back(rec.pose);
    model.image_names.push_back(std::move(rec.name));
  }
  return model;
}

void write_colmap_text(const fs::path& model_dir, const std::vector<CameraPose>& poses,
                       const std::vector<std::string>& image_names, const SparsePointCloud& cloud) {
  if (poses.size() != image_names.size()) {
    throw Error(ErrorCode::InconsistentModel, "one image name per pose required");
  }
  fs::create_directories(model_dir);
  std::ofstream cams(model_dir / "cameras.txt");
  std::ofstream imgs(model_dir / "images.txt");
  std::ofstream pts(model_dir / "points3D.txt");
  if (!cams || !imgs || !pts) throw Error(ErrorCode::IoError, "cannot write " + model_dir.string());
  for (auto* out : {&cams, &imgs, &pts}) *out << std::setprecision(17);

  cams << "# CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
  imgs << "# IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n# POINTS2D[] as (X, Y, POINT3D_ID)\n";
  pts << "# POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto& p = poses[i];
    const auto& k = p.intrinsics;
    const int camera_id = static_cast<int>(i) + 1;
    cams << camera_id << " PINHOLE " << k.width << ' ' << k.height << ' ' << k.fx << ' ' << k.fy
         << ' ' << k.cx << ' ' << k.cy << '\n';
    const auto q = p.quaternion();
    imgs << p.id.value << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' '
         << p.translation.x() << ' ' << p.translation.y() << ' ' << p.translation.z() << ' '
         << camera_id << ' ' << image_names[i] << "\n\n";
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& x = cloud.points[i];
    const auto& c = cloud.colors[i];
    auto to8 = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255)); };
    pts << i + 1 << ' ' << x.x() << ' ' << x.y() << ' ' << x.z() << ' ' << to8(c.x()) << ' '
        << to8(c.y()) << ' ' << to8(c.z()) << " 0\n";
  }
}

Scene load_colmap_scene(const fs::path& model_dir, const fs::path& images_dir,
                        const std::optional<fs::path>& depths_dir) {
  auto model = read_colmap_text(model_dir);
  Scene scene;
  scene.point_cloud = std::move(model.point_cloud);
  for (std::size_t i = 0; i < model.poses.size(); ++i) {
    auto pose = model.poses[i];
    const auto& name = model.image_names[i];
    Raster image = load_raster(images_dir / name);
    if (image.channels == 1) {
      Raster rgb(image.width, image.height, 3);
      for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        for (int c = 0; c < 3; ++c) rgb.data[3 * p + c] = image.data[p];
      }
      image = std::move(rgb);
    }
    if (image.channels != 3) {
      throw Error(ErrorCode::FormatError, name + ": expected an RGB image");
    }
    if (image.width != pose.intrinsics.width) {
      // Images stored at a different resolution than the SfM cameras.
      pose.intrinsics = pose.intrinsics.scaled(static_cast<double>(image.width) /
                                               pose.intrinsics.width);
      pose.intrinsics.width = image.width;
      pose.intrinsics.height = image.height;
    }
    std::optional<Raster> depth;
    if (depths_dir) {
      const auto depth_path = *depths_dir / (fs::path(name).stem().string() + ".fras");
      if (fs::exists(depth_path)) depth = load_raster(depth_path);
    }
    scene.poses.push_back(pose);
    scene.images.push_back(std::move(image));
    scene.depths.push_back(std::move(depth));
    scene.image_names.push_back(name);
  }
  scene.validate();
  return scene;
}

Split train_test_split(std::size_t n_views, std::size_t stride) {
  if (stride < 2) throw Error(ErrorCode::InvalidStride, "stride must be >= 2");
  Split split;
  for (std::size_t i = 0; i < n_views; ++i) {
    (i % stride == 0 ? split.test : split.train).push_back(i);
  }
  return split;
}

}  // namespace sp360
