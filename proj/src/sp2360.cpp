#include "sp360/sp2360.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "sp360/error.hpp"

namespace sp360 {

GaussianCloud shrink_scales(const GaussianCloud& cloud, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::InvalidEta, "eta must lie in (0, 1], got " + std::to_string(eta));
  GaussianCloud out = cloud;
  if (eta == 1.0) return out;
  const double shift = std::log(eta);
  for (auto& s : out.log_scales) s.array() += shift;
  return out;
}

std::vector<CameraPose> next_novel_camera(std::vector<CameraPose>& pool, std::span<const CameraPose> stack,
                                          std::size_t m, const GeodesicConfig& cfg) {
  if (pool.empty()) throw Error(ErrorCode::PoolExhausted, "no novel poses left");
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(pool.size());
  for (std::size_t j = 0; j < pool.size(); ++j) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& s : stack) d = std::min(d, geodesic_distance(s, pool[j], cfg));
    ranked.emplace_back(d, j);
  }
  std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return pool[a.second].id < pool[b.second].id;
  });
  const std::size_t take = std::min(m, pool.size());
  std::vector<CameraPose> picked;
  std::vector<bool> drop(pool.size(), false);
  for (std::size_t k = 0; k < take; ++k) {
    picked.push_back(pool[ranked[k].second]);
    drop[ranked[k].second] = true;
  }
  std::vector<CameraPose> rest;
  for (std::size_t j = 0; j < pool.size(); ++j) {
    if (!drop[j]) rest.push_back(std::move(pool[j]));
  }
  pool = std::move(rest);
  return picked;
}

SampleLoss sample_loss(const Raster& render, const Raster& pseudo_gt, double t_weight,
                       const PerceptualLoss& perceptual) {
  const LossGrad l1 = l1_loss(render, pseudo_gt);
  const LossGrad lp = perceptual ? perceptual(render, pseudo_gt) : dssim_loss(render, pseudo_gt);
  require_same_shape(lp.grad, render, "sample_loss perceptual gradient");
  SampleLoss out;
  out.l1 = l1.value;
  out.perceptual = lp.value;
  out.value = t_weight * (l1.value + lp.value);
  out.grad = Raster(render.width, render.height, render.channels);
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad.data[i] = t_weight * (l1.grad.data[i] + lp.grad.data[i]);
  return out;
}

double sample_weight(double start, double end, int iter, int total_iters) {
  if (total_iters <= 1) return start;
  const double u = std::clamp(static_cast<double>(iter) / (total_iters - 1), 0.0, 1.0);
  return start + (end - start) * u;
}

LoopConfig LoopConfig::iterative_preset() {
  LoopConfig c;
  c.train = c.train.with_total_iters(static_cast<int>(c.total_iters));
  return c;
}

void LoopConfig::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorCode::InvalidEta, "eta must lie in (0, 1]");
  if (m < 1) throw Error(ErrorCode::InvalidConfig, "m must be at least 1");
  if (total_iters < 0) throw Error(ErrorCode::InvalidConfig, "total_iters must be non-negative");
  train.validate();
}

ViewSynthesizer enhancer_synthesizer(Enhancer& enhancer, const EnhanceConfig& cfg, std::size_t steps) {
  return [&enhancer, cfg, steps](const CameraPose&, const RenderOutput& render, std::size_t step) {
    return enhance_view(enhancer, render, cfg, step, steps);
  };
}

std::string LoopReport::to_json() const {
  nlohmann::ordered_json j;
  j["schedule"] = nlohmann::ordered_json::parse(schedule.to_json());
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : steps) {
    nlohmann::ordered_json e;
    e["step"] = s.step;
    e["added_views"] = s.added_views;
    e["iterations"] = s.iterations;
    e["stack_size"] = s.stack_size;
    e["mask_area"] = s.mask_area;
    e["gaussians"] = s.gaussians;
    arr.push_back(std::move(e));
  }
  j["steps"] = std::move(arr);
  return j.dump(2);
}

namespace {

struct StackView {
  CameraPose pose;
  Raster image;
  bool generated = false;
};

}  // namespace

LoopResult run_sp2360(const Scene& scene, const GaussianCloud& initial, std::vector<CameraPose> pool,
                      const LoopConfig& cfg, const ViewSynthesizer& synthesize, std::uint64_t seed) {
  scene.validate();
  cfg.validate();
  LoopResult result;
  result.cloud = initial;
  if (pool.empty()) return result;

  const Schedule schedule = solve_schedule(cfg.total_iters, pool.size(), cfg.m, cfg.kind, std::nullopt, cfg.growth);
  result.report.schedule = schedule;

  std::vector<CameraPose> all_poses = scene.poses;
  all_poses.insert(all_poses.end(), pool.begin(), pool.end());
  const SparseConfig train = cfg.train.with_total_iters(static_cast<int>(cfg.total_iters));
  Trainer trainer(initial, train, scene_extent(all_poses), seed);
  auto& rng = trainer.rng();

  std::vector<StackView> stack;
  std::vector<CameraPose> stack_poses;
  for (std::size_t v = 0; v < scene.size(); ++v) {
    stack.push_back({scene.poses[v], scene.images[v], false});
    stack_poses.push_back(scene.poses[v]);
  }

  for (std::size_t k = 0; k < schedule.counts.size(); ++k) {
    LoopStep log;
    log.step = k + 1;
    const auto picked = next_novel_camera(pool, stack_poses, cfg.m);
    double mask_sum = 0.0;
    for (const auto& pose : picked) {
      const RenderOutput r = trainer.render(pose);
      const Raster mask = opacity_mask(r.alpha, cfg.enhance.tau);
      double covered = 0.0;
      for (double v : mask.data) covered += v;
      mask_sum += covered / static_cast<double>(mask.size());
      Raster image = synthesize(pose, r, k);
      if (image.width != r.color.width || image.height != r.color.height || image.channels != 3) {
        throw Error(ErrorCode::ProtocolViolation, "synthesized view has the wrong shape");
      }
      stack.push_back({pose, std::move(image), true});
      stack_poses.push_back(pose);
      log.added_views.push_back(pose.id.value);
    }
    log.mask_area = mask_sum / static_cast<double>(picked.size());
    trainer.replace_parameters(shrink_scales(trainer.cloud(), cfg.eta));

    std::uniform_int_distribution<std::size_t> pick(0, stack.size() - 1);
    for (std::int64_t it = 0; it < schedule.counts[k]; ++it) {
      const StackView& view = stack[pick(rng)];
      const RenderOutput r = trainer.render(view.pose);
      Raster grad;
      if (view.generated && !cfg.generated_as_observed) {
        const double w = sample_weight(cfg.sample_weight_start, cfg.sample_weight_end, trainer.iteration(),
                                       static_cast<int>(cfg.total_iters));
        grad = sample_loss(r.color, view.image, w).grad;
      } else {
        grad = photometric_loss(r.color, view.image, train.lambda1).grad;
      }
      trainer.backward(view.pose, grad, Raster(r.depth.width, r.depth.height, 1), true);
      trainer.step();
    }
    log.iterations = schedule.counts[k];
    log.stack_size = stack.size();
    log.gaussians = trainer.cloud().size();
    result.report.steps.push_back(std::move(log));
  }
  result.cloud = trainer.cloud();
  return result;
}

}  // namespace sp360
