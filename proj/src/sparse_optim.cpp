#include "sp360/sparse_optim.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "sp360/error.hpp"
#include "sp360/losses.hpp"
#include "sp360/metrics.hpp"
#include "sp360/se3.hpp"

namespace sp360 {

SparseConfig SparseConfig::dense_preset() {
  SparseConfig c;
  c.lambda_depth = 0.0;
  c.lambda_pseudo = 0.0;
  c.tau_pos = 0.0002;
  c.opacity_reset_interval = 3000;
  return c;
}

SparseConfig SparseConfig::sparse_preset() { return SparseConfig{}; }

SparseConfig SparseConfig::scaled_iterations(double factor) const {
  SparseConfig c = *this;
  auto scale = [factor](int v) { return std::max(1, static_cast<int>(std::lround(v * factor))); };
  c.total_iters = scale(total_iters);
  c.densify_interval = scale(densify_interval);
  c.densify_from_iter = scale(densify_from_iter);
  c.densify_until_iter = scale(densify_until_iter);
  c.pseudo_start_iter = scale(pseudo_start_iter);
  c.checkpoint_interval = scale(checkpoint_interval);
  c.lr.means_decay_steps = scale(lr.means_decay_steps);
  if (opacity_reset_interval) c.opacity_reset_interval = scale(*opacity_reset_interval);
  return c;
}

SparseConfig SparseConfig::with_total_iters(int total) const {
  SparseConfig c = *this;
  c.total_iters = total;
  c.pseudo_start_iter = std::min(pseudo_start_iter, total);
  return c;
}

void SparseConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (lambda1 < 0.0 || lambda1 > 1.0) fail("lambda1 must lie in [0, 1]");
  if (lambda_depth < 0.0 || lambda_pseudo < 0.0) fail("loss weights must be non-negative");
  if (!(tau_pos > 0.0)) fail("tau_pos must be positive");
  if (total_iters < 0) fail("total_iters must be non-negative");
  if (pseudo_start_iter > total_iters) fail("pseudo_start_iter exceeds total_iters");
  if (densify_interval < 1) fail("densify_interval must be at least 1");
  if (opacity_reset_interval && *opacity_reset_interval < 1) fail("opacity_reset_interval must be positive");
  if (!(opacity_reset_cap > 0.0 && opacity_reset_cap < 1.0)) fail("opacity_reset_cap must lie in (0, 1)");
  if (!(init_opacity > 0.0 && init_opacity < 1.0)) fail("init_opacity must lie in (0, 1)");
}

SparseLoss sparse_loss(const RenderOutput& render, const Raster& gt_image, const Raster* gt_depth,
                       std::span<const PseudoRender> pseudo, const SparseConfig& cfg, int iter) {
  SparseLoss out;
  const PhotometricLoss photo = photometric_loss(render.color, gt_image, cfg.lambda1);
  out.terms.l1 = photo.l1;
  out.terms.dssim = photo.dssim;
  out.grad_color = photo.grad;
  out.grad_depth = Raster(render.depth.width, render.depth.height, 1);
  double total = photo.value;

  if (cfg.lambda_depth > 0.0) {
    if (gt_depth) {
      const PccResult pcc = pcc_depth_loss(render.depth, *gt_depth, positive_depth_mask(*gt_depth));
      out.terms.depth = pcc.value;
      total += cfg.lambda_depth * pcc.value;
      for (std::size_t p = 0; p < out.grad_depth.size(); ++p) out.grad_depth.data[p] = cfg.lambda_depth * pcc.grad.data[p];
    } else {
      out.depth_skipped = true;
    }
  }

  out.pseudo_grad_depth.resize(pseudo.size());
  if (iter >= cfg.pseudo_start_iter && cfg.lambda_pseudo > 0.0 && !pseudo.empty()) {
    const double w = cfg.lambda_pseudo / static_cast<double>(pseudo.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < pseudo.size(); ++k) {
      const auto& pr = pseudo[k];
      const PccResult pcc = pcc_depth_loss(pr.render->depth, *pr.depth_target, positive_depth_mask(*pr.depth_target));
      sum += pcc.value;
      out.pseudo_grad_depth[k] = pcc.grad;
      for (auto& g : out.pseudo_grad_depth[k].data) g *= w;
    }
    out.terms.pseudo = sum / static_cast<double>(pseudo.size());
    total += cfg.lambda_pseudo * out.terms.pseudo;
  }
  out.terms.total = total;
  return out;
}

DensifyResult densify_and_prune(const GaussianCloud& cloud, std::span<const double> grad_norms,
                                const SparseConfig& cfg, double scene_extent, std::mt19937_64& rng) {
  if (grad_norms.size() != cloud.size()) {
    throw Error(ErrorCode::ShapeError, "densify_and_prune: one gradient norm per Gaussian expected");
  }
  const std::size_t n = cloud.size();
  const double clone_limit = 0.01 * scene_extent;
  DensifyResult res;
  res.cloud = cloud;
  res.origin.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.origin[i] = static_cast<std::ptrdiff_t>(i);

  std::vector<bool> keep(n, true);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(grad_norms[i] >= cfg.tau_pos)) continue;
    const Eigen::Vector3d s = cloud.scale(i);
    if (s.maxCoeff() <= clone_limit) {
      res.cloud.append_from(cloud, i);
      res.origin.push_back(-1);
      ++res.cloned;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(grad_norms[i] >= cfg.tau_pos)) continue;
    const Eigen::Vector3d s = cloud.scale(i);
    if (s.maxCoeff() <= clone_limit) continue;
    const Eigen::Matrix3d r = cloud.rotation(i);
    for (int child = 0; child < 2; ++child) {
      const Eigen::Vector3d offset(s[0] * normal(rng), s[1] * normal(rng), s[2] * normal(rng));
      res.cloud.append_from(cloud, i);
      res.cloud.means.back() = cloud.means[i] + r * offset;
      res.cloud.log_scales.back() = cloud.log_scales[i].array() - std::log(1.6);
      res.origin.push_back(-1);
    }
    keep[i] = false;
    ++res.split;
  }

  keep.resize(res.cloud.size(), true);
  const double size_limit = 0.1 * scene_extent;
  for (std::size_t i = 0; i < res.cloud.size(); ++i) {
    if (!keep[i]) continue;
    if (res.cloud.opacity(i) < cfg.prune_opacity || res.cloud.scale(i).maxCoeff() > size_limit) {
      keep[i] = false;
      ++res.pruned;
    }
  }
  res.cloud.keep(keep);
  std::size_t out = 0;
  for (std::size_t i = 0; i < res.origin.size(); ++i) {
    if (keep[i]) res.origin[out++] = res.origin[i];
  }
  res.origin.resize(out);
  if (res.cloud.empty()) throw Error(ErrorCode::EmptyCloud, "every Gaussian was pruned");
  return res;
}

GaussianCloud reset_opacity(const GaussianCloud& cloud, double cap) {
  if (!(cap > 0.0 && cap < 1.0)) throw Error(ErrorCode::InvalidConfig, "opacity cap must lie in (0, 1)");
  GaussianCloud out = cloud;
  // Done in logit space; sigmoid is monotone, and this keeps reset∘reset exact.
  const double cap_logit = logit(cap);
  for (auto& l : out.opacity_logits) l = std::min(l, cap_logit);
  return out;
}

GaussianCloud initialize_from_points(const SparsePointCloud& points, double opacity) {
  const std::size_t s = points.size();
  if (s == 0) throw Error(ErrorCode::InitializationError, "point cloud is empty");
  GaussianCloud cloud;
  cloud.reserve(s);
  std::vector<double> d2(s);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) d2[j] = j == i ? std::numeric_limits<double>::infinity()
                                                       : (points.points[i] - points.points[j]).squaredNorm();
    const std::size_t k = std::min<std::size_t>(3, s - 1);
    double mean_dist = 0.01;
    if (k > 0) {
      std::partial_sort(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(k), d2.end());
      mean_dist = 0.0;
      for (std::size_t a = 0; a < k; ++a) mean_dist += std::sqrt(d2[a]);
      mean_dist /= static_cast<double>(k);
    }
    mean_dist = std::max(mean_dist, 1e-7);
    const Eigen::Vector3d color = i < points.colors.size() ? points.colors[i] : Eigen::Vector3d::Constant(0.5);
    cloud.add(points.points[i], Eigen::Vector3d::Constant(mean_dist), Eigen::Vector4d(1, 0, 0, 0), opacity, color);
  }
  return cloud;
}

double scene_extent(std::span<const CameraPose> poses) {
  if (poses.empty()) return 1.0;
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : poses) c += p.center();
  c /= static_cast<double>(poses.size());
  double r = 0.0;
  for (const auto& p : poses) r = std::max(r, (p.center() - c).norm());
  return r > 0.0 ? 1.1 * r : 1.0;
}

Trainer::Trainer(GaussianCloud cloud, SparseConfig cfg, double extent, std::uint64_t seed)
    : cloud_(std::move(cloud)),
      cfg_(std::move(cfg)),
      extent_(extent),
      adam_(cloud_.size()),
      grad_(CloudGradient::zeros(cloud_.size())),
      grad_accum_(cloud_.size(), 0.0),
      grad_count_(cloud_.size(), 0),
      rng_(seed) {}

RenderOutput Trainer::render(const CameraPose& pose) const {
  return sp360::render(cloud_, pose, cfg_.background, cfg_.render);
}

void Trainer::backward(const CameraPose& pose, const Raster& grad_color, const Raster& grad_depth,
                       bool track_densify) {
  const RenderGradients g = render_backward(cloud_, pose, cfg_.background, grad_color, grad_depth, cfg_.render);
  for (std::size_t i = 0; i < cloud_.size(); ++i) {
    grad_.means[i] += g.params.means[i];
    grad_.log_scales[i] += g.params.log_scales[i];
    grad_.rotations[i] += g.params.rotations[i];
    grad_.opacity_logits[i] += g.params.opacity_logits[i];
    grad_.colors[i] += g.params.colors[i];
    if (track_densify && g.visible[i]) {
      grad_accum_[i] += g.screen_grad_norm[i];
      ++grad_count_[i];
    }
  }
}

void Trainer::step() {
  adam_.step(cloud_, grad_, cfg_.lr, cfg_.lr.means_at(iter_, extent_));
  grad_.set_zero();
  ++iter_;

  const bool in_window = iter_ < cfg_.densify_until_iter;
  if (in_window && iter_ > cfg_.densify_from_iter && iter_ % cfg_.densify_interval == 0 &&
      (cfg_.max_gaussians == 0 || cloud_.size() < cfg_.max_gaussians)) {
    std::vector<double> mean_grad(cloud_.size(), 0.0);
    for (std::size_t i = 0; i < cloud_.size(); ++i) {
      if (grad_count_[i] > 0) mean_grad[i] = grad_accum_[i] / grad_count_[i];
    }
    DensifyResult res = densify_and_prune(cloud_, mean_grad, cfg_, extent_, rng_);
    cloud_ = std::move(res.cloud);
    adam_.remap(res.origin);
    grad_ = CloudGradient::zeros(cloud_.size());
    grad_accum_.assign(cloud_.size(), 0.0);
    grad_count_.assign(cloud_.size(), 0);
  }
  if (in_window && cfg_.opacity_reset_interval && iter_ % *cfg_.opacity_reset_interval == 0) {
    cloud_ = reset_opacity(cloud_, cfg_.opacity_reset_cap);
    adam_.reset_opacity_state();
  }
}

void Trainer::replace_parameters(GaussianCloud cloud) {
  if (cloud.size() != cloud_.size()) throw Error(ErrorCode::ShapeError, "replace_parameters: size changed");
  cloud_ = std::move(cloud);
}

std::string FitReport::to_json_lines() const {
  std::string out;
  for (const auto& c : checkpoints) {
    nlohmann::ordered_json j;
    j["iter"] = c.iter;
    j["train_psnr"] = c.train_psnr;
    j["gaussians"] = c.gaussians;
    j["loss"] = {{"l1", c.loss.l1}, {"dssim", c.loss.dssim}, {"depth", c.loss.depth},
                 {"pseudo", c.loss.pseudo}, {"total", c.loss.total}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<PseudoView> make_pseudo_views(const Scene& scene, std::mt19937_64& rng) {
  std::vector<PseudoView> views;
  const std::size_t n = scene.size();
  if (n < 2) return views;
  std::uniform_real_distribution<double> u_dist(0.3, 0.7);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = i;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = geodesic_distance(scene.poses[i], scene.poses[j]);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    const double u = u_dist(rng);
    const std::size_t nearest = u < 0.5 ? i : best;
    if (nearest >= scene.depths.size() || !scene.depths[nearest]) continue;
    const ViewId id{0x80000000u + static_cast<std::uint32_t>(i)};
    views.push_back({interpolate_pseudo_view(scene.poses[i], scene.poses[best], u, id), *scene.depths[nearest]});
  }
  return views;
}

namespace {

double mean_train_psnr(const Trainer& t, const Scene& scene) {
  double sum = 0.0;
  for (std::size_t v = 0; v < scene.size(); ++v) sum += psnr(t.render(scene.poses[v]).color, scene.images[v]);
  return scene.size() ? sum / static_cast<double>(scene.size()) : 0.0;
}

}  // namespace

FitResult fit_sparse_3dgs(const Scene& scene, const SparseConfig& cfg, std::uint64_t seed) {
  scene.validate();
  cfg.validate();
  if (scene.size() == 0) throw Error(ErrorCode::InitializationError, "scene has no views");
  GaussianCloud init = initialize_from_points(scene.point_cloud, cfg.init_opacity);
  Trainer trainer(std::move(init), cfg, scene_extent(scene.poses), seed);
  auto& rng = trainer.rng();
  std::uniform_int_distribution<std::size_t> pick_view(0, scene.size() - 1);

  const bool use_pseudo = cfg.lambda_pseudo > 0.0 && scene.size() >= 2;
  std::vector<PseudoView> pseudo;
  if (use_pseudo) pseudo = make_pseudo_views(scene, rng);

  FitResult result;
  for (int iter = 0; iter < cfg.total_iters; ++iter) {
    const std::size_t v = pick_view(rng);
    const RenderOutput r = trainer.render(scene.poses[v]);
    const Raster* depth = v < scene.depths.size() && scene.depths[v] ? &*scene.depths[v] : nullptr;

    std::optional<std::size_t> pv;
    RenderOutput pseudo_render;
    std::vector<PseudoRender> pseudo_inputs;
    if (use_pseudo && iter >= cfg.pseudo_start_iter && !pseudo.empty()) {
      pv = std::uniform_int_distribution<std::size_t>(0, pseudo.size() - 1)(rng);
      pseudo_render = trainer.render(pseudo[*pv].pose);
      pseudo_inputs.push_back({&pseudo_render, &pseudo[*pv].depth_target});
    }

    const SparseLoss loss = sparse_loss(r, scene.images[v], depth, pseudo_inputs, cfg, iter);
    if (loss.depth_skipped) ++result.report.depth_terms_skipped;
    trainer.backward(scene.poses[v], loss.grad_color, loss.grad_depth, true);
    if (pv && !loss.pseudo_grad_depth[0].empty()) {
      const auto& pose = pseudo[*pv].pose;
      trainer.backward(pose, Raster(pose.intrinsics.width, pose.intrinsics.height, 3), loss.pseudo_grad_depth[0],
                       false);
    }
    trainer.step();

    if (use_pseudo && trainer.iteration() % cfg.densify_interval == 0) pseudo = make_pseudo_views(scene, rng);
    if (trainer.iteration() % cfg.checkpoint_interval == 0 || trainer.iteration() == cfg.total_iters) {
      result.report.checkpoints.push_back(
          {trainer.iteration(), mean_train_psnr(trainer, scene), trainer.cloud().size(), loss.terms});
    }
  }
  result.cloud = trainer.cloud();
  return result;
}

}  // namespace sp360
