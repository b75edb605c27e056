#include "sp360/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sp360/error.hpp"

namespace sp360 {

LossGrad l1_loss(const Raster& a, const Raster& b) {
  require_same_shape(a, b, "l1_loss");
  LossGrad out{0.0, Raster(a.width, a.height, a.channels)};
  if (a.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    out.value += std::abs(d);
    out.grad.data[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
  }
  out.value *= inv_n;
  return out;
}

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double center = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-((i - center) * (i - center)) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable "same" correlation of one plane with zero padding. The kernel is
// symmetric, so this is also its own adjoint.
void blur(const std::vector<double>& src, std::vector<double>& dst, std::vector<double>& tmp, int w, int h,
          const std::vector<double>& k) {
  const int taps = static_cast<int>(k.size());
  const int r = taps / 2;
  // Horizontal pass through a zero-padded row buffer.
  std::vector<double> row(static_cast<std::size_t>(w + 2 * r), 0.0);
  tmp.assign(src.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(y) * w, w, row.begin() + r);
    double* out = tmp.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = 0; d < taps; ++d) acc += k[d] * row[x + d];
      out[x] = acc;
    }
  }
  // Vertical pass, row by row so the inner loop runs over contiguous memory.
  dst.assign(src.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    double* out = dst.data() + static_cast<std::size_t>(y) * w;
    const int lo = std::max(-r, -y), hi = std::min(r, h - 1 - y);
    for (int d = lo; d <= hi; ++d) {
      const double kd = k[d + r];
      const double* in = tmp.data() + static_cast<std::size_t>(y + d) * w;
      for (int x = 0; x < w; ++x) out[x] += kd * in[x];
    }
  }
}

// Mean SSIM; when grad is non-null also writes ∂SSIM/∂a.
double ssim_impl(const Raster& a, const Raster& b, const SsimSettings& st, Raster* grad) {
  require_same_shape(a, b, "ssim");
  if (a.empty()) return 1.0;
  const int w = a.width, h = a.height, nc = a.channels;
  const auto kernel = gaussian_kernel(st.window, st.sigma);
  const std::size_t np = a.pixel_count();
  const double inv_n = 1.0 / static_cast<double>(a.size());

  std::vector<double> x(np), y(np), xx(np), yy(np), xy(np);
  std::vector<double> mx, my, exx, eyy, exy, tmp;
  std::vector<double> g1(np), g2(np), g3(np), bg1, bg2, bg3;
  double total = 0.0;
  for (int c = 0; c < nc; ++c) {
    for (std::size_t p = 0; p < np; ++p) {
      x[p] = a.data[p * nc + c];
      y[p] = b.data[p * nc + c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    blur(x, mx, tmp, w, h, kernel);
    blur(y, my, tmp, w, h, kernel);
    blur(xx, exx, tmp, w, h, kernel);
    blur(yy, eyy, tmp, w, h, kernel);
    blur(xy, exy, tmp, w, h, kernel);
    for (std::size_t p = 0; p < np; ++p) {
      const double ux = mx[p], uy = my[p];
      const double a1 = 2.0 * ux * uy + st.c1;
      const double a2 = 2.0 * (exy[p] - ux * uy) + st.c2;
      const double b1 = ux * ux + uy * uy + st.c1;
      const double b2 = (exx[p] - ux * ux) + (eyy[p] - uy * uy) + st.c2;
      const double s = (a1 * a2) / (b1 * b2);
      total += s;
      if (grad) {
        const double d = b1 * b2;
        g1[p] = inv_n * (2.0 * uy * (a2 - a1) / d + 2.0 * ux * s * (1.0 / b2 - 1.0 / b1));
        g2[p] = inv_n * (-s / b2);
        g3[p] = inv_n * (2.0 * a1 / d);
      }
    }
    if (grad) {
      blur(g1, bg1, tmp, w, h, kernel);
      blur(g2, bg2, tmp, w, h, kernel);
      blur(g3, bg3, tmp, w, h, kernel);
      for (std::size_t p = 0; p < np; ++p) {
        grad->data[p * nc + c] = bg1[p] + 2.0 * x[p] * bg2[p] + y[p] * bg3[p];
      }
    }
  }
  return total * inv_n;
}

}  // namespace

double ssim(const Raster& a, const Raster& b, const SsimSettings& settings) {
  return ssim_impl(a, b, settings, nullptr);
}

LossGrad dssim_loss(const Raster& a, const Raster& b, const SsimSettings& settings) {
  LossGrad out{0.0, Raster(a.width, a.height, a.channels)};
  const double s = ssim_impl(a, b, settings, &out.grad);
  out.value = (1.0 - s) / 2.0;
  for (auto& g : out.grad.data) g *= -0.5;
  return out;
}

PccResult pcc_depth_loss(const Raster& d_ras, const Raster& d_est, const Raster& valid) {
  require_same_shape(d_ras, d_est, "pcc_depth_loss");
  if (valid.width != d_ras.width || valid.height != d_ras.height || valid.channels != 1) {
    throw Error(ErrorCode::ShapeError, "pcc_depth_loss: valid mask shape");
  }
  PccResult out;
  out.grad = Raster(d_ras.width, d_ras.height, d_ras.channels);
  std::vector<std::size_t> idx;
  for (std::size_t p = 0; p < valid.size(); ++p) {
    if (valid.data[p] != 0.0) idx.push_back(p);
  }
  auto degenerate = [&] {
    out.value = 1.0;
    out.degenerate = true;
    return out;
  };
  if (idx.size() < 2) return degenerate();

  auto range_of = [&](const Raster& r) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto p : idx) {
      lo = std::min(lo, r.data[p]);
      hi = std::max(hi, r.data[p]);
    }
    return std::pair{lo, hi};
  };
  const auto [xlo, xhi] = range_of(d_ras);
  const auto [ylo, yhi] = range_of(d_est);
  if (!(xhi > xlo) || !(yhi > ylo)) return degenerate();

  const double n = static_cast<double>(idx.size());
  std::vector<double> xs(idx.size()), ys(idx.size());
  double xm = 0.0, ym = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    xs[k] = (d_ras.data[idx[k]] - xlo) / (xhi - xlo);
    ys[k] = (d_est.data[idx[k]] - ylo) / (yhi - ylo);
    xm += xs[k];
    ym += ys[k];
  }
  xm /= n;
  ym /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double dx = xs[k] - xm, dy = ys[k] - ym;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return degenerate();
  const double denom = std::sqrt(sxx * syy);
  const double r = std::clamp(sxy / denom, -1.0, 1.0);
  out.value = 1.0 - r;
  // The correlation is invariant to the min-max map, so its gradient wrt the
  // raw depths is the normalized-space gradient scaled by 1/range.
  const double scale = 1.0 / (xhi - xlo);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double dr = (ys[k] - ym) / denom - r * (xs[k] - xm) / sxx;
    out.grad.data[idx[k]] = -dr * scale;
  }
  return out;
}

Raster positive_depth_mask(const Raster& d_est) {
  Raster m(d_est.width, d_est.height, 1);
  for (std::size_t p = 0; p < m.size(); ++p) {
    const double v = d_est.data[p * d_est.channels];
    m.data[p] = (std::isfinite(v) && v > 0.0) ? 1.0 : 0.0;
  }
  return m;
}

PhotometricLoss photometric_loss(const Raster& render, const Raster& gt, double lambda1) {
  const LossGrad l1 = l1_loss(render, gt);
  const LossGrad ds = dssim_loss(render, gt);
  PhotometricLoss out;
  out.l1 = l1.value;
  out.dssim = ds.value;
  out.value = (1.0 - lambda1) * l1.value + lambda1 * ds.value;
  out.grad = Raster(render.width, render.height, render.channels);
  for (std::size_t i = 0; i < out.grad.size(); ++i) {
    out.grad.data[i] = (1.0 - lambda1) * l1.grad.data[i] + lambda1 * ds.grad.data[i];
  }
  return out;
}

}  // namespace sp360
