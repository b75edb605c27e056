#include "sp360/config.hpp"

#include <toml.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "sp360/error.hpp"

namespace sp360 {

namespace {

class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  bool present() const { return table_ != nullptr; }

  const toml::table* child(const std::string& key) {
    if (!table_) return nullptr;
    seen_.insert(key);
    const auto* node = table_->get(key);
    if (!node) return nullptr;
    if (!node->is_table()) fail(key, "a table");
    return node->as_table();
  }

  void get(const std::string& key, double& out) { read(key, out, "a number"); }
  void get(const std::string& key, bool& out) { read(key, out, "a boolean"); }
  void get(const std::string& key, std::string& out) { read(key, out, "a string"); }

  template <typename Int>
    requires std::is_integral_v<Int>
  void get(const std::string& key, Int& out) {
    std::int64_t v = out;
    read(key, v, "an integer");
    if (v < 0 && std::is_unsigned_v<Int>) fail(key, "non-negative");
    out = static_cast<Int>(v);
  }

  void get(const std::string& key, Eigen::Vector3d& out) {
    if (!table_) return;
    seen_.insert(key);
    const auto* node = table_->get(key);
    if (!node) return;
    const auto* arr = node->as_array();
    if (!arr || arr->size() != 3) fail(key, "an array of 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) {
      const auto v = (*arr)[i].value<double>();
      if (!v) fail(key, "an array of 3 numbers");
      out[static_cast<Eigen::Index>(i)] = *v;
    }
  }

  /// Integer or the string "never".
  void get_interval(const std::string& key, std::optional<int>& out) {
    if (!table_) return;
    seen_.insert(key);
    const auto* node = table_->get(key);
    if (!node) return;
    if (auto s = node->value<std::string>(); s && *s == "never") {
      out.reset();
    } else if (auto v = node->value<std::int64_t>()) {
      out = static_cast<int>(*v);
    } else {
      fail(key, "an integer or \"never\"");
    }
  }

  const std::string* peek_string(const std::string& key) {
    if (!table_) return nullptr;
    const auto* node = table_->get(key);
    if (!node || !node->is_string()) return nullptr;
    seen_.insert(key);
    return &node->as_string()->get();
  }

  void finish() const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      if (!seen_.contains(std::string(k.str()))) {
        throw Error(ErrorCode::InvalidConfig, "unknown key '" + std::string(k.str()) + "' in [" + name_ + "]");
      }
    }
  }

 private:
  template <typename T>
  void read(const std::string& key, T& out, const char* what) {
    if (!table_) return;
    seen_.insert(key);
    const auto* node = table_->get(key);
    if (!node) return;
    auto v = node->value<T>();
    if (!v) fail(key, what);
    out = *v;
  }

  [[noreturn]] void fail(const std::string& key, const char* what) const {
    throw Error(ErrorCode::InvalidConfig, "[" + name_ + "] " + key + " must be " + what);
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_sparse(Section& s, SparseConfig& c, const std::string& name) {
  if (const auto* preset = s.peek_string("preset")) {
    if (*preset == "sparse") {
      c = SparseConfig::sparse_preset();
    } else if (*preset == "dense") {
      c = SparseConfig::dense_preset();
    } else {
      throw Error(ErrorCode::InvalidConfig, "[" + name + "] preset must be \"sparse\" or \"dense\"");
    }
  }
  s.get("lambda1", c.lambda1);
  s.get("lambda_depth", c.lambda_depth);
  s.get("lambda_pseudo", c.lambda_pseudo);
  s.get("tau_pos", c.tau_pos);
  s.get_interval("opacity_reset_interval", c.opacity_reset_interval);
  s.get("opacity_reset_cap", c.opacity_reset_cap);
  s.get("pseudo_start_iter", c.pseudo_start_iter);
  s.get("total_iters", c.total_iters);
  s.get("densify_interval", c.densify_interval);
  s.get("densify_from_iter", c.densify_from_iter);
  s.get("densify_until_iter", c.densify_until_iter);
  s.get("prune_opacity", c.prune_opacity);
  s.get("max_gaussians", c.max_gaussians);
  s.get("checkpoint_interval", c.checkpoint_interval);
  s.get("init_opacity", c.init_opacity);
  s.get("background", c.background);

  Section lr(s.child("lr"), name + ".lr");
  lr.get("means", c.lr.means);
  lr.get("means_final", c.lr.means_final);
  lr.get("means_decay_steps", c.lr.means_decay_steps);
  lr.get("colors", c.lr.colors);
  lr.get("opacity", c.lr.opacity);
  lr.get("scales", c.lr.scales);
  lr.get("rotations", c.lr.rotations);
  lr.finish();
  s.finish();
}

}  // namespace

void PipelineConfig::validate() const {
  sparse.validate();
  loop.validate();
  if (geodesic.w_t < 0.0) throw Error(ErrorCode::InvalidConfig, "w_t must be non-negative");
  if (max_resolution < 1) throw Error(ErrorCode::InvalidConfig, "max_resolution must be positive");
  if (test_stride < 2) throw Error(ErrorCode::InvalidStride, "test_stride must be at least 2");
  if (sigmas.rotation < 0.0 || sigmas.translation < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "perturbation sigmas must be non-negative");
  }
}

PipelineConfig parse_config(std::string_view text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw ParseError(source, static_cast<int>(e.source().begin.line), std::string(e.description()));
  }
  PipelineConfig cfg;
  Section top(&root, "");

  Section sparse(top.child("sparse"), "sparse");
  read_sparse(sparse, cfg.sparse, "sparse");

  Section loop(top.child("loop"), "loop");
  std::string kind(to_string(cfg.loop.kind));
  std::string growth = cfg.loop.growth == GrowthModel::Recurrence ? "recurrence" : "polynomial";
  loop.get("total_iters", cfg.loop.total_iters);
  loop.get("m", cfg.loop.m);
  loop.get("kind", kind);
  loop.get("growth", growth);
  loop.get("eta", cfg.loop.eta);
  loop.get("sample_weight_start", cfg.loop.sample_weight_start);
  loop.get("sample_weight_end", cfg.loop.sample_weight_end);
  loop.get("enhancer", cfg.loop.enhancer);
  loop.get("generated_as_observed", cfg.loop.generated_as_observed);
  cfg.loop.kind = parse_schedule_kind(kind);
  cfg.loop.growth = parse_growth_model(growth);
  cfg.loop.train = cfg.loop.train.with_total_iters(static_cast<int>(cfg.loop.total_iters));
  Section train(loop.child("train"), "loop.train");
  read_sparse(train, cfg.loop.train, "loop.train");
  loop.finish();

  Section enhance(top.child("enhance"), "enhance");
  auto& e = cfg.loop.enhance;
  enhance.get("tau", e.tau);
  enhance.get("inpaint_prompt", e.inpaint_prompt);
  enhance.get("clean_prompt", e.clean_prompt);
  enhance.get("steps", e.steps);
  enhance.get("image_guidance", e.image_guidance);
  enhance.get("text_guidance", e.text_guidance);
  enhance.get("t_max", e.t_max);
  enhance.get("inpaint_t_min_start", e.inpaint_t_min_start);
  enhance.get("inpaint_t_min_end", e.inpaint_t_min_end);
  enhance.get("clean_t_min_start", e.clean_t_min_start);
  enhance.get("clean_t_min_end", e.clean_t_min_end);
  enhance.finish();

  Section selection(top.child("selection"), "selection");
  selection.get("w_t", cfg.geodesic.w_t);
  selection.finish();

  Section io(top.child("io"), "io");
  io.get("max_resolution", cfg.max_resolution);
  io.get("test_stride", cfg.test_stride);
  io.finish();

  Section artifact(top.child("artifact"), "artifact");
  artifact.get("interp_count", cfg.interp_count);
  artifact.get("rot_sigma", cfg.sigmas.rotation);
  artifact.get("trans_sigma", cfg.sigmas.translation);
  artifact.finish();

  top.finish();
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

}  // namespace sp360
