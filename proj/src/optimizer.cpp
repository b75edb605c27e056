#include "sp360/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "sp360/error.hpp"

namespace sp360 {

double LearningRates::means_at(int step, double extent) const {
  if (means <= 0.0 || means_final <= 0.0) return means * extent;
  const double t = means_decay_steps > 0 ? std::clamp(static_cast<double>(step) / means_decay_steps, 0.0, 1.0) : 1.0;
  return std::exp(std::log(means) * (1.0 - t) + std::log(means_final) * t) * extent;
}

Adam::Adam(std::size_t count, double beta1, double beta2, double eps)
    : m_(CloudGradient::zeros(count)), v_(CloudGradient::zeros(count)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

namespace {

template <typename T>
void update(T& param, T& m, T& v, const T& g, double lr, double b1, double b2, double bc1, double bc2,
            double eps) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  const T mhat = m / bc1;
  const T vhat = v / bc2;
  param -= lr * mhat.cwiseQuotient((vhat.array().sqrt() + eps).matrix());
}

void update_scalar(double& param, double& m, double& v, double g, double lr, double b1, double b2, double bc1,
                   double bc2, double eps) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g * g;
  param -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
}

}  // namespace

void Adam::step(GaussianCloud& cloud, const CloudGradient& grad, const LearningRates& lr, double means_lr) {
  if (grad.size() != cloud.size() || m_.size() != cloud.size()) {
    throw Error(ErrorCode::ShapeError, "optimizer state does not match cloud size");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    update(cloud.means[i], m_.means[i], v_.means[i], grad.means[i], means_lr, beta1_, beta2_, bc1, bc2, eps_);
    update(cloud.log_scales[i], m_.log_scales[i], v_.log_scales[i], grad.log_scales[i], lr.scales, beta1_, beta2_,
           bc1, bc2, eps_);
    update(cloud.rotations[i], m_.rotations[i], v_.rotations[i], grad.rotations[i], lr.rotations, beta1_, beta2_,
           bc1, bc2, eps_);
    update_scalar(cloud.opacity_logits[i], m_.opacity_logits[i], v_.opacity_logits[i], grad.opacity_logits[i],
                  lr.opacity, beta1_, beta2_, bc1, bc2, eps_);
    update(cloud.colors[i], m_.colors[i], v_.colors[i], grad.colors[i], lr.colors, beta1_, beta2_, bc1, bc2, eps_);
  }
}

void Adam::remap(const std::vector<std::ptrdiff_t>& origin) {
  CloudGradient m, v;
  m.reserve(origin.size());
  v.reserve(origin.size());
  const CloudGradient zero = CloudGradient::zeros(1);
  for (const auto o : origin) {
    if (o >= 0) {
      m.append_from(m_, static_cast<std::size_t>(o));
      v.append_from(v_, static_cast<std::size_t>(o));
    } else {
      m.append_from(zero, 0);
      v.append_from(zero, 0);
    }
  }
  m_ = std::move(m);
  v_ = std::move(v);
}

void Adam::reset_opacity_state() {
  std::fill(m_.opacity_logits.begin(), m_.opacity_logits.end(), 0.0);
  std::fill(v_.opacity_logits.begin(), v_.opacity_logits.end(), 0.0);
}

}  // namespace sp360
