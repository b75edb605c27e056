#include "sp360/render.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sp360/error.hpp"

namespace sp360 {

namespace {

constexpr int kTile = 8;

Eigen::Matrix3d rotation_from_unit(const Eigen::Vector4d& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),  //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

// Everything the forward pass derives per Gaussian; the backward pass reuses it.
struct Splat {
  std::size_t index = 0;
  Eigen::Vector3d p_cam;
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
  double conic_a = 0, conic_b = 0, conic_c = 0;
  double opacity = 0;
  Eigen::Vector3d color;
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bounds

  Eigen::Vector4d q_unit;
  double q_norm = 1;
  Eigen::Matrix3d rot;
  Eigen::Vector3d scale;
  Eigen::Matrix3d cov3;
  Eigen::Matrix<double, 2, 3> jw;  // perspective Jacobian times world rotation
};

struct Prepared {
  std::vector<Splat> splats;  // front to back
  std::vector<std::vector<std::uint32_t>> tiles;
  int tiles_x = 0;
  int tiles_y = 0;
};

std::optional<Splat> make_splat(const GaussianCloud& cloud, std::size_t i, const CameraPose& camera,
                                const RenderSettings& s) {
  Splat sp;
  sp.index = i;
  sp.p_cam = camera.rotation * cloud.means[i] + camera.translation;
  const double z = sp.p_cam.z();
  if (!(z > s.near_plane)) return std::nullopt;

  sp.q_norm = cloud.rotations[i].norm();
  if (!(sp.q_norm > 0.0)) return std::nullopt;
  sp.q_unit = cloud.rotations[i] / sp.q_norm;
  sp.rot = rotation_from_unit(sp.q_unit);
  sp.scale = cloud.log_scales[i].array().exp();
  const Eigen::Matrix3d m = sp.rot * sp.scale.asDiagonal();
  sp.cov3 = m * m.transpose();

  const auto& k = camera.intrinsics;
  const double x = sp.p_cam.x(), y = sp.p_cam.y();
  Eigen::Matrix<double, 2, 3> j;
  j << k.fx / z, 0.0, -k.fx * x / (z * z),  //
      0.0, k.fy / z, -k.fy * y / (z * z);
  sp.jw = j * camera.rotation;
  sp.cov = sp.jw * sp.cov3 * sp.jw.transpose();
  sp.cov(0, 0) += s.dilation;
  sp.cov(1, 1) += s.dilation;
  sp.cov(0, 1) = sp.cov(1, 0) = 0.5 * (sp.cov(0, 1) + sp.cov(1, 0));

  const double det = sp.cov(0, 0) * sp.cov(1, 1) - sp.cov(0, 1) * sp.cov(0, 1);
  if (!(det > 0.0) || !std::isfinite(det)) return std::nullopt;
  sp.conic_a = sp.cov(1, 1) / det;
  sp.conic_b = -sp.cov(0, 1) / det;
  sp.conic_c = sp.cov(0, 0) / det;

  sp.mean = Eigen::Vector2d(k.fx * x / z + k.cx, k.fy * y / z + k.cy);
  sp.opacity = sigmoid(cloud.opacity_logits[i]);
  sp.color = cloud.colors[i];
  if (!sp.mean.allFinite()) return std::nullopt;
  return sp;
}

// Pixel bounds of the region where the splat can reach min_alpha.
bool footprint(Splat& sp, int width, int height, const RenderSettings& s) {
  if (s.min_alpha <= 0.0) {
    sp.x0 = 0;
    sp.y0 = 0;
    sp.x1 = width - 1;
    sp.y1 = height - 1;
    return width > 0 && height > 0;
  }
  if (sp.opacity < s.min_alpha) return false;
  const double r2 = 2.0 * std::log(sp.opacity / s.min_alpha);
  const double ex = std::sqrt(sp.cov(0, 0) * r2);
  const double ey = std::sqrt(sp.cov(1, 1) * r2);
  const double fx0 = std::ceil(sp.mean.x() - ex - 0.5), fx1 = std::floor(sp.mean.x() + ex - 0.5);
  const double fy0 = std::ceil(sp.mean.y() - ey - 0.5), fy1 = std::floor(sp.mean.y() + ey - 0.5);
  if (fx1 < 0 || fy1 < 0 || fx0 > width - 1 || fy0 > height - 1) return false;
  sp.x0 = static_cast<int>(std::max(fx0, 0.0));
  sp.y0 = static_cast<int>(std::max(fy0, 0.0));
  sp.x1 = static_cast<int>(std::min(fx1, static_cast<double>(width - 1)));
  sp.y1 = static_cast<int>(std::min(fy1, static_cast<double>(height - 1)));
  return sp.x0 <= sp.x1 && sp.y0 <= sp.y1;
}

Prepared prepare(const GaussianCloud& cloud, const CameraPose& camera, const RenderSettings& s) {
  const int w = camera.intrinsics.width, h = camera.intrinsics.height;
  Prepared prep;
  prep.splats.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto sp = make_splat(cloud, i, camera, s);
    if (sp && footprint(*sp, w, h, s)) prep.splats.push_back(std::move(*sp));
  }
  std::stable_sort(prep.splats.begin(), prep.splats.end(),
                   [](const Splat& a, const Splat& b) { return a.p_cam.z() < b.p_cam.z(); });

  prep.tiles_x = (w + kTile - 1) / kTile;
  prep.tiles_y = (h + kTile - 1) / kTile;
  prep.tiles.assign(static_cast<std::size_t>(prep.tiles_x) * prep.tiles_y, {});
  for (std::size_t n = 0; n < prep.splats.size(); ++n) {
    const auto& sp = prep.splats[n];
    for (int ty = sp.y0 / kTile; ty <= sp.y1 / kTile; ++ty) {
      for (int tx = sp.x0 / kTile; tx <= sp.x1 / kTile; ++tx) {
        prep.tiles[static_cast<std::size_t>(ty) * prep.tiles_x + tx].push_back(static_cast<std::uint32_t>(n));
      }
    }
  }
  return prep;
}

struct Contribution {
  std::uint32_t splat;
  double alpha;
  double gauss;  // exp(power)
  double transmittance;  // before this splat
  double dx, dy;  // mean - pixel center
  bool clamped;
};

// Front-to-back compositing of one pixel. Returns the final transmittance.
template <typename Visit>
double composite_pixel(const Prepared& prep, int px, int py, const RenderSettings& s, Visit&& visit) {
  const auto& list = prep.tiles[static_cast<std::size_t>(py / kTile) * prep.tiles_x + px / kTile];
  const double cx = px + 0.5, cy = py + 0.5;
  double t = 1.0;
  for (const std::uint32_t n : list) {
    const Splat& sp = prep.splats[n];
    if (px < sp.x0 || px > sp.x1 || py < sp.y0 || py > sp.y1) continue;
    const double dx = sp.mean.x() - cx, dy = sp.mean.y() - cy;
    const double power = -0.5 * (sp.conic_a * dx * dx + sp.conic_c * dy * dy) - sp.conic_b * dx * dy;
    if (power > 0.0) continue;
    const double g = std::exp(power);
    double a = sp.opacity * g;
    if (a < s.min_alpha) continue;
    const bool clamped = a > s.max_alpha;
    if (clamped) a = s.max_alpha;
    const double next_t = t * (1.0 - a);
    if (next_t < s.min_transmittance) break;
    visit(Contribution{n, a, g, t, dx, dy, clamped});
    t = next_t;
  }
  return t;
}

int require_raster_size(const CameraPose& camera) {
  const auto& k = camera.intrinsics;
  if (k.width <= 0 || k.height <= 0) throw Error(ErrorCode::ShapeError, "camera has an empty image plane");
  return k.width;
}

}  // namespace

std::optional<ProjectedGaussian> project_gaussian(const Eigen::Vector3d& mean, const Eigen::Vector3d& scale,
                                                  const Eigen::Vector4d& rotation, const CameraPose& camera,
                                                  const RenderSettings& settings) {
  GaussianCloud one;
  one.means.push_back(mean);
  one.log_scales.push_back(scale.array().log().matrix());
  one.rotations.push_back(rotation);
  one.opacity_logits.push_back(0.0);
  one.colors.push_back(Eigen::Vector3d::Zero());
  const auto sp = make_splat(one, 0, camera, settings);
  if (!sp) return std::nullopt;
  return ProjectedGaussian{sp->mean, sp->cov, sp->p_cam.z()};
}

RenderOutput render(const GaussianCloud& cloud, const CameraPose& camera, const Eigen::Vector3d& background,
                    const RenderSettings& settings) {
  const int w = require_raster_size(camera), h = camera.intrinsics.height;
  const Prepared prep = prepare(cloud, camera, settings);
  RenderOutput out{Raster(w, h, 3), Raster(w, h, 1), Raster(w, h, 1)};
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      Eigen::Vector3d c = Eigen::Vector3d::Zero();
      double depth_sum = 0.0;
      // Σ a·T equals 1 − T_final but keeps full precision at low coverage.
      double a = 0.0;
      const double t_final = composite_pixel(prep, px, py, settings, [&](const Contribution& ct) {
        const Splat& sp = prep.splats[ct.splat];
        const double wgt = ct.alpha * ct.transmittance;
        c += wgt * sp.color;
        depth_sum += wgt * sp.p_cam.z();
        a += wgt;
      });
      c += t_final * background;
      for (int ch = 0; ch < 3; ++ch) out.color.at(px, py, ch) = c[ch];
      out.alpha.at(px, py) = a;
      out.depth.at(px, py) = depth_sum / std::max(a, settings.depth_eps);
    }
  }
  return out;
}

RenderGradients render_backward(const GaussianCloud& cloud, const CameraPose& camera,
                                const Eigen::Vector3d& background, const Raster& grad_color,
                                const Raster& grad_depth, const RenderSettings& settings) {
  const int w = require_raster_size(camera), h = camera.intrinsics.height;
  if (grad_color.width != w || grad_color.height != h || grad_color.channels != 3) {
    throw Error(ErrorCode::ShapeError, "grad_color must be " + std::to_string(w) + "x" + std::to_string(h) + "x3");
  }
  if (grad_depth.width != w || grad_depth.height != h || grad_depth.channels != 1) {
    throw Error(ErrorCode::ShapeError, "grad_depth must be " + std::to_string(w) + "x" + std::to_string(h) + "x1");
  }
  const Prepared prep = prepare(cloud, camera, settings);
  const std::size_t count = prep.splats.size();

  // Gradients wrt the 2D quantities of each splat.
  std::vector<Eigen::Vector2d> g_mean(count, Eigen::Vector2d::Zero());
  std::vector<Eigen::Vector3d> g_conic(count, Eigen::Vector3d::Zero());
  std::vector<double> g_opacity(count, 0.0);
  std::vector<Eigen::Vector3d> g_color(count, Eigen::Vector3d::Zero());
  std::vector<double> g_z(count, 0.0);

  std::vector<Contribution> contribs;
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const Eigen::Vector3d gc(grad_color.at(px, py, 0), grad_color.at(px, py, 1), grad_color.at(px, py, 2));
      const double gd = grad_depth.at(px, py);
      if (gc.isZero(0.0) && gd == 0.0) continue;

      contribs.clear();
      double depth_sum = 0.0, acc = 0.0;
      const double t_final = composite_pixel(prep, px, py, settings, [&](const Contribution& ct) {
        contribs.push_back(ct);
        depth_sum += ct.alpha * ct.transmittance * prep.splats[ct.splat].p_cam.z();
        acc += ct.alpha * ct.transmittance;
      });
      double g_n = 0.0, g_acc = 0.0;
      if (acc > settings.depth_eps) {
        g_n = gd / acc;
        g_acc = -gd * depth_sum / (acc * acc);
      } else {
        g_n = gd / settings.depth_eps;
      }
      // ∂L/∂T_final; acc = 1 − T_final.
      double suffix = (gc.dot(background) - g_acc) * t_final;
      for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
        const Splat& sp = prep.splats[it->splat];
        const double wgt = it->alpha * it->transmittance;
        const double feat = gc.dot(sp.color) + g_n * sp.p_cam.z();
        g_color[it->splat] += wgt * gc;
        g_z[it->splat] += wgt * g_n;
        const double g_alpha = it->transmittance * feat - suffix / (1.0 - it->alpha);
        suffix += feat * wgt;
        if (it->clamped) continue;
        g_opacity[it->splat] += g_alpha * it->gauss;
        const double g_power = g_alpha * sp.opacity * it->gauss;
        const double dx = it->dx, dy = it->dy;
        g_mean[it->splat] += g_power * Eigen::Vector2d(-(sp.conic_a * dx + sp.conic_b * dy),
                                                       -(sp.conic_b * dx + sp.conic_c * dy));
        g_conic[it->splat] += g_power * Eigen::Vector3d(-0.5 * dx * dx, -dx * dy, -0.5 * dy * dy);
      }
    }
  }

  RenderGradients out;
  out.params = CloudGradient::zeros(cloud.size());
  out.screen_grad_norm.assign(cloud.size(), 0.0);
  out.visible.assign(cloud.size(), false);
  const auto& k = camera.intrinsics;
  for (std::size_t n = 0; n < count; ++n) {
    const Splat& sp = prep.splats[n];
    const std::size_t i = sp.index;
    out.visible[i] = true;
    out.screen_grad_norm[i] = Eigen::Vector2d(g_mean[n].x() * 0.5 * w, g_mean[n].y() * 0.5 * h).norm();
    out.params.colors[i] = g_color[n];
    out.params.opacity_logits[i] = g_opacity[n] * sp.opacity * (1.0 - sp.opacity);

    // Conic -> 2D covariance.
    Eigen::Matrix2d q;
    q << sp.conic_a, sp.conic_b, sp.conic_b, sp.conic_c;
    Eigen::Matrix2d g_q;
    g_q << g_conic[n].x(), 0.5 * g_conic[n].y(), 0.5 * g_conic[n].y(), g_conic[n].z();
    const Eigen::Matrix2d g_cov2 = -q * g_q * q;

    // 2D covariance -> 3D covariance and projection Jacobian.
    const Eigen::Matrix3d g_cov3 = sp.jw.transpose() * g_cov2 * sp.jw;
    const Eigen::Matrix<double, 2, 3> g_jw = 2.0 * g_cov2 * sp.jw * sp.cov3;
    const Eigen::Matrix<double, 2, 3> g_j = g_jw * camera.rotation.transpose();

    const double x = sp.p_cam.x(), y = sp.p_cam.y(), z = sp.p_cam.z();
    const double z2 = z * z, z3 = z2 * z;
    Eigen::Vector3d g_p(0.0, 0.0, g_z[n]);
    g_p.x() += g_mean[n].x() * k.fx / z;
    g_p.y() += g_mean[n].y() * k.fy / z;
    g_p.z() += -g_mean[n].x() * k.fx * x / z2 - g_mean[n].y() * k.fy * y / z2;
    g_p.x() += g_j(0, 2) * (-k.fx / z2);
    g_p.y() += g_j(1, 2) * (-k.fy / z2);
    g_p.z() += g_j(0, 0) * (-k.fx / z2) + g_j(0, 2) * (2.0 * k.fx * x / z3) + g_j(1, 1) * (-k.fy / z2) +
               g_j(1, 2) * (2.0 * k.fy * y / z3);
    out.params.means[i] = camera.rotation.transpose() * g_p;

    // Σ3D = M Mᵀ with M = R·diag(s).
    const Eigen::Matrix3d m = sp.rot * sp.scale.asDiagonal();
    const Eigen::Matrix3d g_m = 2.0 * g_cov3 * m;
    const Eigen::Matrix3d g_r = g_m * sp.scale.asDiagonal();
    const Eigen::Matrix3d rt_gm = sp.rot.transpose() * g_m;
    for (int a = 0; a < 3; ++a) out.params.log_scales[i][a] = rt_gm(a, a) * sp.scale[a];

    const double qw = sp.q_unit[0], qx = sp.q_unit[1], qy = sp.q_unit[2], qz = sp.q_unit[3];
    const auto& G = g_r;
    Eigen::Vector4d g_qu;
    g_qu[0] = 2.0 * (-qz * G(0, 1) + qy * G(0, 2) + qz * G(1, 0) - qx * G(1, 2) - qy * G(2, 0) + qx * G(2, 1));
    g_qu[1] = 2.0 * (qy * G(0, 1) + qz * G(0, 2) + qy * G(1, 0) - 2.0 * qx * G(1, 1) - qw * G(1, 2) +
                     qz * G(2, 0) + qw * G(2, 1) - 2.0 * qx * G(2, 2));
    g_qu[2] = 2.0 * (-2.0 * qy * G(0, 0) + qx * G(0, 1) + qw * G(0, 2) + qx * G(1, 0) + qz * G(1, 2) -
                     qw * G(2, 0) + qz * G(2, 1) - 2.0 * qy * G(2, 2));
    g_qu[3] = 2.0 * (-2.0 * qz * G(0, 0) - qw * G(0, 1) + qx * G(0, 2) + qw * G(1, 0) - 2.0 * qz * G(1, 1) +
                     qy * G(1, 2) + qx * G(2, 0) + qy * G(2, 1));
    out.params.rotations[i] = (g_qu - sp.q_unit * sp.q_unit.dot(g_qu)) / sp.q_norm;
  }
  return out;
}

Raster opacity_mask(const Raster& alpha, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw Error(ErrorCode::InvalidThreshold, "tau must lie in (0, 1), got " + std::to_string(tau));
  }
  Raster mask(alpha.width, alpha.height, 1);
  for (std::size_t p = 0; p < alpha.pixel_count(); ++p) {
    mask.data[p] = alpha.data[p * alpha.channels] <= tau ? 1.0 : 0.0;
  }
  return mask;
}

}  // namespace sp360
