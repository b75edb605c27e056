#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sp360/gaussian.hpp"
#include "sp360/raster.hpp"
#include "sp360/render.hpp"
#include "sp360/scene_io.hpp"

namespace sp360 {

/// One line per instruction; line 1 is the base instruction. Blank lines are
/// dropped. Throws EmptyInstructionPool when nothing remains.
std::vector<std::string> load_instruction_pool(const std::filesystem::path& path);

struct SparseFit {
  int m = 0;  // number of views the cloud was fitted to
  GaussianCloud cloud;
};

struct PerturbSigmas {
  double rotation = 0.02;     // radians
  double translation = 0.02;  // scene units
};

struct ArtifactTriplet {
  std::string clean_path;
  std::string artifact_path;
  std::string instruction;
  int m = 0;
  std::uint32_t camera_id = 0;
};

struct ArtifactManifest {
  std::vector<ArtifactTriplet> triplets;
  std::string to_json_lines() const;
};

struct ArtifactOptions {
  std::size_t interp_count = 0;
  PerturbSigmas sigmas;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  RenderSettings render;
  // Images are written below this directory when set; paths in the manifest
  // are relative to it.
  std::optional<std::filesystem::path> out_dir;
};

/// Every source camera contributes itself plus interp_count cameras
/// interpolated towards the next source camera and then perturbed. Each camera
/// yields one (dense render, sparse render) pair per sparse fit, paired with a
/// uniformly drawn instruction.
ArtifactManifest generate_artifact_pairs(const GaussianCloud& dense, std::span<const SparseFit> sparse,
                                         std::span<const CameraPose> cameras,
                                         const std::vector<std::string>& instructions,
                                         const ArtifactOptions& options, std::uint64_t seed);

enum class MaskMode { Union, Complement };

MaskMode parse_mask_mode(std::string_view text);

/// Union of count random rectangles (1 = masked), or its complement. Each
/// rectangle covers 5–40% of the image. Rectangles are drawn in sequence from
/// one generator, so a larger count extends the same prefix.
Raster random_rect_masks(int width, int height, std::size_t count, MaskMode mode, std::uint64_t seed);

}  // namespace sp360
