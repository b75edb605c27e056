#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "sp360/artifact.hpp"
#include "sp360/se3.hpp"
#include "sp360/sp2360.hpp"
#include "sp360/sparse_optim.hpp"

namespace sp360 {

// TOML layout (every table and key optional, unknown keys rejected):
//
//   [sparse]      preset = "sparse" | "dense", then SparseConfig fields;
//                 opacity_reset_interval is an integer or "never"
//   [sparse.lr]   learning rates
//   [loop]        LoopConfig scalars (kind, growth, m, eta, ...)
//   [loop.train]  optimization settings while fusing, same keys as [sparse]
//   [enhance]     EnhanceConfig fields
//   [selection]   w_t
//   [io]          max_resolution, test_stride
//   [artifact]    interp_count, rot_sigma, trans_sigma
struct PipelineConfig {
  SparseConfig sparse = SparseConfig::sparse_preset();
  LoopConfig loop = LoopConfig::iterative_preset();
  GeodesicConfig geodesic;
  int max_resolution = 128;
  std::size_t test_stride = 8;
  std::size_t interp_count = 0;
  PerturbSigmas sigmas;

  void validate() const;
};

/// Throws ParseError for malformed TOML and InvalidConfig for unknown keys or
/// mistyped values.
PipelineConfig parse_config(std::string_view toml_text, const std::string& source = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace sp360
