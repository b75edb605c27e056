#include "sp360/artifact.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <random>
#include <sstream>

#include "sp360/error.hpp"
#include "sp360/se3.hpp"

namespace sp360 {

std::vector<std::string> load_instruction_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open instruction pool " + path.string());
  std::vector<std::string> pool;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    pool.push_back(line);
  }
  if (pool.empty()) throw Error(ErrorCode::EmptyInstructionPool, path.string() + " holds no instructions");
  return pool;
}

std::string ArtifactManifest::to_json_lines() const {
  std::ostringstream out;
  for (const auto& t : triplets) {
    nlohmann::ordered_json j;
    j["clean"] = t.clean_path;
    j["artifact"] = t.artifact_path;
    j["instruction"] = t.instruction;
    j["M"] = t.m;
    j["camera_id"] = t.camera_id;
    out << j.dump() << '\n';
  }
  return out.str();
}

namespace {

constexpr std::uint32_t kDerivedCameraBase = 0x40000000u;

void write_png(const std::optional<std::filesystem::path>& root, const std::string& rel, const Raster& image) {
  if (!root) return;
  const auto path = *root / rel;
  std::filesystem::create_directories(path.parent_path());
  save_raster(path, image);
}

}  // namespace

ArtifactManifest generate_artifact_pairs(const GaussianCloud& dense, std::span<const SparseFit> sparse,
                                         std::span<const CameraPose> cameras,
                                         const std::vector<std::string>& instructions,
                                         const ArtifactOptions& options, std::uint64_t seed) {
  if (instructions.empty()) throw Error(ErrorCode::EmptyInstructionPool, "instruction pool is empty");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, instructions.size() - 1);

  std::vector<CameraPose> all;
  std::uint32_t next_id = kDerivedCameraBase;
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    all.push_back(cameras[c]);
    const CameraPose& to = cameras[(c + 1) % cameras.size()];
    const bool same_k = to.intrinsics == cameras[c].intrinsics;
    for (std::size_t j = 0; j < options.interp_count; ++j) {
      const double u = static_cast<double>(j + 1) / static_cast<double>(options.interp_count + 1);
      CameraPose base = same_k && cameras.size() > 1 ? interpolate_pseudo_view(cameras[c], to, u, ViewId{next_id})
                                                      : cameras[c];
      CameraPose p = perturb_camera(base, options.sigmas.rotation, options.sigmas.translation, rng());
      p.id = ViewId{next_id++};
      all.push_back(std::move(p));
    }
  }

  ArtifactManifest manifest;
  for (const auto& cam : all) {
    const std::string stem = std::to_string(cam.id.value);
    const std::string clean_rel = "clean/" + stem + ".png";
    write_png(options.out_dir, clean_rel, render(dense, cam, options.background, options.render).color);
    for (const auto& fit : sparse) {
      const std::string artifact_rel = "artifact/M" + std::to_string(fit.m) + "/" + stem + ".png";
      write_png(options.out_dir, artifact_rel, render(fit.cloud, cam, options.background, options.render).color);
      manifest.triplets.push_back({clean_rel, artifact_rel, instructions[pick(rng)], fit.m, cam.id.value});
    }
  }
  return manifest;
}

MaskMode parse_mask_mode(std::string_view text) {
  if (text == "union") return MaskMode::Union;
  if (text == "complement") return MaskMode::Complement;
  throw Error(ErrorCode::InvalidConfig, "unknown mask mode '" + std::string(text) + "'");
}

Raster random_rect_masks(int width, int height, std::size_t count, MaskMode mode, std::uint64_t seed) {
  if (width < 1 || height < 1) throw Error(ErrorCode::ShapeError, "mask needs a positive size");
  if (count < 1) throw Error(ErrorCode::InvalidConfig, "need at least one rectangle");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> xs(0, width - 1), ys(0, height - 1);
  const double area = static_cast<double>(width) * height;
  Raster mask(width, height, 1, 0.0);
  for (std::size_t r = 0; r < count; ++r) {
    int x0 = 0, x1 = width - 1, y0 = 0, y1 = height - 1;
    // Rejection sampling; images too small to hold a 5–40% rectangle keep the
    // last draw.
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const int ax = xs(rng), bx = xs(rng), ay = ys(rng), by = ys(rng);
      x0 = std::min(ax, bx);
      x1 = std::max(ax, bx);
      y0 = std::min(ay, by);
      y1 = std::max(ay, by);
      const double frac = static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1) / area;
      if (frac >= 0.05 && frac <= 0.40) break;
    }
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) mask.at(x, y) = 1.0;
    }
  }
  if (mode == MaskMode::Complement) {
    for (auto& v : mask.data) v = 1.0 - v;
  }
  return mask;
}

}  // namespace sp360
