#include "sp360/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "sp360/artifact.hpp"
#include "sp360/config.hpp"
#include "sp360/error.hpp"
#include "sp360/metrics.hpp"
#include "sp360/schedule.hpp"
#include "sp360/se3.hpp"
#include "sp360/sp2360.hpp"
#include "sp360/sparse_optim.hpp"
#include "sp360/toy_scene.hpp"

namespace sp360 {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Scene directory layout: sparse/ (COLMAP text model), images/, and an
// optional depths/ holding "<image stem>.fras".
Scene load_scene_dir(const fs::path& dir, int max_resolution) {
  const fs::path depths = dir / "depths";
  Scene scene = load_colmap_scene(dir / "sparse", dir / "images",
                                  fs::is_directory(depths) ? std::optional<fs::path>(depths) : std::nullopt);
  for (std::size_t v = 0; v < scene.size(); ++v) {
    Raster& image = scene.images[v];
    const int longest = std::max(image.width, image.height);
    const int factor = (longest + max_resolution - 1) / max_resolution;
    if (factor <= 1) continue;
    image = downscale(image, factor);
    if (scene.depths[v]) scene.depths[v] = downscale(*scene.depths[v], factor);
    auto& k = scene.poses[v].intrinsics;
    k = k.scaled(1.0 / factor);
    k.width = image.width;
    k.height = image.height;
  }
  return scene;
}

PipelineConfig load_or_default(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

std::vector<std::size_t> read_subset_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    return j.at("indices").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> resolve_views(const std::vector<std::size_t>& views, const std::string& subset_file,
                                       std::size_t n) {
  std::vector<std::size_t> out = subset_file.empty() ? views : read_subset_file(subset_file);
  if (out.empty()) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
  }
  for (std::size_t i : out) {
    if (i >= n) throw Error(ErrorCode::InvalidConfig, "view index " + std::to_string(i) + " out of range");
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << text;
}

void emit(std::ostream& out, const ordered_json& summary, const std::string& out_dir) {
  const std::string text = summary.dump(2);
  if (!out_dir.empty()) write_text(fs::path(out_dir) / "summary.json", text + "\n");
  out << text << '\n';
}

std::vector<fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string view_stem(const Scene& scene, std::size_t v) {
  if (v < scene.image_names.size() && !scene.image_names[v].empty()) {
    return fs::path(scene.image_names[v]).stem().string();
  }
  return "view_" + std::to_string(scene.poses[v].id.value);
}

void write_scene_dir(const fs::path& dir, const Scene& scene) {
  fs::create_directories(dir / "sparse");
  fs::create_directories(dir / "images");
  write_colmap_text(dir / "sparse", scene.poses, scene.image_names, scene.point_cloud);
  for (std::size_t v = 0; v < scene.size(); ++v) {
    save_raster(dir / "images" / scene.image_names[v], scene.images[v]);
    if (v < scene.depths.size() && scene.depths[v]) {
      fs::create_directories(dir / "depths");
      save_raster(dir / "depths" / (view_stem(scene, v) + ".fras"), *scene.depths[v]);
    }
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse-view 360 Gaussian splatting pipeline"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::uint64_t seed = 0;
  std::string config_path;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--config", config_path, "TOML config file")->check(CLI::ExistingFile);
  };

  // select-views
  auto* sel = app.add_subcommand("select-views", "pick an M-view subset by geodesic spread");
  std::string scene_dir;
  std::size_t subset_m = 0;
  std::optional<std::size_t> seed_index;
  std::string out_path;
  sel->add_option("--scene", scene_dir, "scene directory")->required();
  sel->add_option("--M", subset_m, "subset size")->required();
  sel->add_option("--seed-index", seed_index, "first view of the greedy stack");
  sel->add_option("--out", out_path, "write the subset JSON here");
  common(sel);

  // fit-sparse
  auto* fit = app.add_subcommand("fit-sparse", "fit Sparse 3DGS to a set of views");
  std::vector<std::size_t> views;
  std::string subset_file, out_dir;
  std::optional<int> iters;
  std::string preset;
  fit->add_option("--scene", scene_dir, "scene directory")->required();
  fit->add_option("--views", views, "comma-separated view indices")->delimiter(',');
  fit->add_option("--subset", subset_file, "subset JSON from select-views")->check(CLI::ExistingFile);
  fit->add_option("--out", out_dir, "output directory")->required();
  fit->add_option("--iters", iters, "total iterations; every iteration-based interval scales along");
  fit->add_option("--preset", preset, "sparse or dense")->check(CLI::IsMember({"sparse", "dense"}));
  common(fit);

  // solve-schedule
  auto* sched = app.add_subcommand("solve-schedule", "split an iteration budget over view updates");
  std::int64_t total = 30000;
  std::size_t pool_views = 0, m = 2;
  std::string kind = "quadratic", growth = "recurrence";
  std::optional<double> n1;
  sched->add_option("--total", total, "iteration budget")->required();
  sched->add_option("--views", pool_views, "number of views to fuse")->required();
  sched->add_option("--m", m, "views per update");
  sched->add_option("--kind", kind, "constant, linear, quadratic or cosine");
  sched->add_option("--growth", growth, "recurrence or polynomial");
  sched->add_option("--n1", n1, "first count for linear/quadratic");
  common(sched);

  // iterate
  auto* iter = app.add_subcommand("iterate", "fuse novel views into a fitted cloud");
  std::string cloud_path, enhancer;
  bool oracle = false;
  std::optional<std::int64_t> loop_total;
  std::optional<std::size_t> loop_m;
  std::optional<std::string> loop_kind;
  iter->add_option("--scene", scene_dir, "scene directory")->required();
  iter->add_option("--cloud", cloud_path, "initial cloud (GCLD)")->required()->check(CLI::ExistingFile);
  iter->add_option("--views", views, "observed view indices; the rest form the pool")->delimiter(',');
  iter->add_option("--subset", subset_file, "subset JSON from select-views")->check(CLI::ExistingFile);
  iter->add_option("--out", out_dir, "output directory")->required();
  iter->add_option("--enhancer", enhancer, "identity, fill or http://host:port");
  iter->add_flag("--oracle", oracle, "use the pool views' own images as pseudo ground truth");
  iter->add_option("--total", loop_total, "override the iteration budget");
  iter->add_option("--m", loop_m, "views per update");
  iter->add_option("--kind", loop_kind, "schedule kind");
  common(iter);

  // gen-artifact-data
  auto* gen = app.add_subcommand("gen-artifact-data", "render (clean, artifact, instruction) triplets");
  std::string dense_path, instructions_path;
  std::vector<std::string> sparse_specs;
  std::optional<std::size_t> interp;
  gen->add_option("--scene", scene_dir, "scene directory providing the source cameras")->required();
  gen->add_option("--dense", dense_path, "dense-view cloud (GCLD)")->required()->check(CLI::ExistingFile);
  gen->add_option("--sparse", sparse_specs, "M=path per sparse cloud")->required();
  gen->add_option("--instructions", instructions_path, "instruction pool")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--interp", interp, "derived cameras per source camera");
  gen->add_option("--views", views, "source view indices")->delimiter(',');
  common(gen);

  // render
  auto* ren = app.add_subcommand("render", "render a cloud from scene cameras");
  bool aux = false;
  ren->add_option("--scene", scene_dir, "scene directory")->required();
  ren->add_option("--cloud", cloud_path, "cloud (GCLD)")->required()->check(CLI::ExistingFile);
  ren->add_option("--out", out_dir, "output directory")->required();
  ren->add_option("--views", views, "view indices")->delimiter(',');
  ren->add_flag("--aux", aux, "also write depth and alpha as FRAS");
  common(ren);

  // eval
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM of predicted against ground-truth images");
  std::string pred_dir, gt_dir;
  ev->add_option("--pred", pred_dir, "predicted PNG directory")->required();
  ev->add_option("--gt", gt_dir, "ground-truth PNG directory")->required();
  ev->add_option("--out", out_path, "write the report JSON here");
  common(ev);

  // export-masks
  auto* masks = app.add_subcommand("export-masks", "opacity masks of renders, or random rectangle masks");
  double tau = -1.0;
  bool random = false;
  int width = 64, height = 64;
  std::size_t count = 1;
  std::string mode = "union";
  masks->add_option("--scene", scene_dir, "scene directory (opacity masks)");
  masks->add_option("--cloud", cloud_path, "cloud (opacity masks)");
  masks->add_option("--tau", tau, "opacity threshold (default from config)");
  masks->add_flag("--random", random, "random rectangle masks instead");
  masks->add_option("--width", width, "random mask width");
  masks->add_option("--height", height, "random mask height");
  masks->add_option("--count", count, "rectangles per mask");
  masks->add_option("--mode", mode, "union or complement")->check(CLI::IsMember({"union", "complement"}));
  masks->add_option("--out", out_dir, "output directory")->required();
  common(masks);

  // make-toy-scene
  auto* toy = app.add_subcommand("make-toy-scene", "write the synthetic ring scene as a scene directory");
  ToySceneConfig toy_cfg;
  toy->add_option("--out", out_dir, "output directory")->required();
  toy->add_option("--gaussians", toy_cfg.gaussians, "ground-truth Gaussians");
  toy->add_option("--views", toy_cfg.views, "ring views");
  toy->add_option("--size", toy_cfg.width, "image width and height");
  toy->add_option("--seed", toy_cfg.seed, "scene seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    const PipelineConfig cfg = load_or_default(config_path);
    ordered_json summary;

    if (*sel) {
      const Scene scene = load_scene_dir(scene_dir, cfg.max_resolution);
      const SubsetResult r = select_view_subset(scene.poses, subset_m, cfg.geodesic, always_registers(), seed_index);
      ordered_json j = ordered_json::parse(r.to_json());
      std::vector<std::string> names;
      for (std::size_t i : r.indices) names.push_back(scene.image_names[i]);
      j["names"] = names;
      if (!out_path.empty()) write_text(out_path, j.dump(2) + "\n");
      out << j.dump(2) << '\n';
      return kExitOk;
    }

    if (*fit) {
      const Scene all = load_scene_dir(scene_dir, cfg.max_resolution);
      const auto idx = resolve_views(views, subset_file, all.size());
      SparseConfig sc = cfg.sparse;
      if (preset == "dense") sc = SparseConfig::dense_preset();
      if (preset == "sparse") sc = SparseConfig::sparse_preset();
      if (iters) {
        sc = sc.total_iters > 0 ? sc.scaled_iterations(static_cast<double>(*iters) / sc.total_iters)
                                : sc.with_total_iters(*iters);
        sc.total_iters = *iters;
      }
      const FitResult r = fit_sparse_3dgs(all.subset(idx), sc, seed);
      fs::create_directories(out_dir);
      save_cloud(fs::path(out_dir) / "cloud.gcld", r.cloud);
      write_text(fs::path(out_dir) / "fit_report.jsonl", r.report.to_json_lines());
      summary["command"] = "fit-sparse";
      summary["views"] = idx;
      summary["iterations"] = sc.total_iters;
      summary["gaussians"] = r.cloud.size();
      summary["final_train_psnr"] = r.report.checkpoints.empty() ? 0.0 : r.report.checkpoints.back().train_psnr;
      summary["depth_terms_skipped"] = r.report.depth_terms_skipped;
      summary["seed"] = seed;
      emit(out, summary, out_dir);
      return kExitOk;
    }

    if (*sched) {
      const Schedule s = solve_schedule(total, pool_views, m, parse_schedule_kind(kind), n1, parse_growth_model(growth));
      out << s.to_json() << '\n';
      return kExitOk;
    }

    if (*iter) {
      const Scene all = load_scene_dir(scene_dir, cfg.max_resolution);
      const auto idx = resolve_views(views, subset_file, all.size());
      const std::set<std::size_t> observed(idx.begin(), idx.end());
      std::vector<CameraPose> pool;
      std::map<std::uint32_t, const Raster*> pool_images;
      for (std::size_t v = 0; v < all.size(); ++v) {
        if (observed.contains(v)) continue;
        pool.push_back(all.poses[v]);
        pool_images[all.poses[v].id.value] = &all.images[v];
      }
      LoopConfig lc = cfg.loop;
      if (loop_total) {
        lc.total_iters = *loop_total;
        lc.train = lc.train.with_total_iters(static_cast<int>(*loop_total));
      }
      if (loop_m) lc.m = *loop_m;
      if (loop_kind) lc.kind = parse_schedule_kind(*loop_kind);
      if (!enhancer.empty()) lc.enhancer = enhancer;
      const std::size_t steps = pool.empty() ? 1 : schedule_steps(pool.size(), lc.m);
      std::unique_ptr<Enhancer> client;
      ViewSynthesizer synth;
      if (oracle) {
        synth = [&pool_images](const CameraPose& p, const RenderOutput&, std::size_t) {
          return *pool_images.at(p.id.value);
        };
      } else {
        client = make_enhancer(lc.enhancer);
        synth = enhancer_synthesizer(*client, lc.enhance, steps);
      }
      const LoopResult r = run_sp2360(all.subset(idx), load_cloud(cloud_path), pool, lc, synth, seed);
      fs::create_directories(out_dir);
      save_cloud(fs::path(out_dir) / "cloud.gcld", r.cloud);
      write_text(fs::path(out_dir) / "loop_report.json", r.report.to_json() + "\n");
      summary["command"] = "iterate";
      summary["observed"] = idx;
      summary["fused"] = pool.size();
      summary["steps"] = r.report.steps.size();
      summary["gaussians"] = r.cloud.size();
      summary["enhancer"] = oracle ? std::string("oracle") : lc.enhancer;
      summary["seed"] = seed;
      emit(out, summary, out_dir);
      return kExitOk;
    }

    if (*gen) {
      const Scene all = load_scene_dir(scene_dir, cfg.max_resolution);
      const auto idx = resolve_views(views, "", all.size());
      std::vector<CameraPose> cams;
      for (std::size_t i : idx) cams.push_back(all.poses[i]);
      std::vector<SparseFit> fits;
      for (const auto& spec : sparse_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--sparse expects M=path, got " + spec);
        fits.push_back({std::stoi(spec.substr(0, eq)), load_cloud(spec.substr(eq + 1))});
      }
      ArtifactOptions opt;
      opt.interp_count = interp.value_or(cfg.interp_count);
      opt.sigmas = cfg.sigmas;
      opt.background = cfg.sparse.background;
      opt.out_dir = out_dir;
      const auto manifest =
          generate_artifact_pairs(load_cloud(dense_path), fits, cams, load_instruction_pool(instructions_path), opt, seed);
      write_text(fs::path(out_dir) / "manifest.jsonl", manifest.to_json_lines());
      summary["command"] = "gen-artifact-data";
      summary["cameras"] = cams.size() * (1 + opt.interp_count);
      summary["sparse_fits"] = fits.size();
      summary["triplets"] = manifest.triplets.size();
      summary["seed"] = seed;
      emit(out, summary, out_dir);
      return kExitOk;
    }

    if (*ren) {
      const Scene all = load_scene_dir(scene_dir, cfg.max_resolution);
      const auto idx = resolve_views(views, "", all.size());
      const GaussianCloud cloud = load_cloud(cloud_path);
      fs::create_directories(out_dir);
      for (std::size_t v : idx) {
        const RenderOutput r = render(cloud, all.poses[v], cfg.sparse.background, cfg.sparse.render);
        const std::string stem = view_stem(all, v);
        save_raster(fs::path(out_dir) / (stem + ".png"), r.color);
        if (aux) {
          save_raster(fs::path(out_dir) / (stem + ".depth.fras"), r.depth);
          save_raster(fs::path(out_dir) / (stem + ".alpha.fras"), r.alpha);
        }
      }
      summary["command"] = "render";
      summary["views"] = idx.size();
      emit(out, summary, out_dir);
      return kExitOk;
    }

    if (*ev) {
      std::vector<std::string> names;
      std::vector<Raster> pred, gt;
      for (const auto& g : png_files(gt_dir)) {
        const fs::path p = fs::path(pred_dir) / g.filename();
        if (!fs::exists(p)) throw Error(ErrorCode::IoError, "no prediction for " + g.filename().string());
        names.push_back(g.filename().string());
        gt.push_back(load_raster(g));
        pred.push_back(load_raster(p));
      }
      const std::string report = evaluate(names, pred, gt).to_json();
      if (!out_path.empty()) write_text(out_path, report + "\n");
      out << report << '\n';
      return kExitOk;
    }

    if (*masks) {
      fs::create_directories(out_dir);
      std::size_t written = 0;
      if (random) {
        save_raster(fs::path(out_dir) / "mask.png", random_rect_masks(width, height, count, parse_mask_mode(mode), seed));
        written = 1;
      } else {
        if (scene_dir.empty() || cloud_path.empty()) {
          throw Error(ErrorCode::InvalidConfig, "opacity masks need --scene and --cloud (or pass --random)");
        }
        const Scene all = load_scene_dir(scene_dir, cfg.max_resolution);
        const GaussianCloud cloud = load_cloud(cloud_path);
        const double t = tau > 0.0 ? tau : cfg.loop.enhance.tau;
        for (std::size_t v = 0; v < all.size(); ++v) {
          const RenderOutput r = render(cloud, all.poses[v], Eigen::Vector3d::Zero(), cfg.sparse.render);
          save_raster(fs::path(out_dir) / (view_stem(all, v) + ".png"), opacity_mask(r.alpha, t));
          ++written;
        }
      }
      summary["command"] = "export-masks";
      summary["masks"] = written;
      emit(out, summary, out_dir);
      return kExitOk;
    }

    if (*toy) {
      toy_cfg.height = toy_cfg.width;
      toy_cfg.focal = toy_cfg.width;
      ToyScene t = make_toy_scene(toy_cfg);
      for (std::size_t v = 0; v < t.scene.size(); ++v) {
        t.scene.image_names[v] = "view_" + std::to_string(v) + ".png";
      }
      write_scene_dir(out_dir, t.scene);
      Scene test;
      test.poses = t.test_poses;
      test.images = t.test_images;
      test.depths.resize(test.poses.size());
      for (std::size_t v = 0; v < test.poses.size(); ++v) test.image_names.push_back("test_" + std::to_string(v) + ".png");
      test.point_cloud = t.scene.point_cloud;
      write_scene_dir(fs::path(out_dir) / "test", test);
      save_cloud(fs::path(out_dir) / "truth.gcld", t.truth);
      summary["command"] = "make-toy-scene";
      summary["views"] = t.scene.size();
      summary["test_views"] = test.size();
      summary["gaussians"] = t.truth.size();
      emit(out, summary, out_dir);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace sp360
