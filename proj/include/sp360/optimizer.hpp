#pragma once

#include <cstdint>
#include <vector>

#include "sp360/gaussian.hpp"

namespace sp360 {

struct LearningRates {
  // Means rates are multiplied by the scene extent; they decay exponentially
  // from means to means_final over means_decay_steps.
  double means = 1.6e-4;
  double means_final = 1.6e-6;
  int means_decay_steps = 30000;
  double colors = 2.5e-3;
  double opacity = 5e-2;
  double scales = 5e-3;
  double rotations = 1e-3;

  double means_at(int step, double extent) const;
};

/// Adam with one moment slot per parameter and a shared step counter.
class Adam {
 public:
  explicit Adam(std::size_t count = 0, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-15);

  /// One update using the given gradient; means_lr is already extent-scaled.
  void step(GaussianCloud& cloud, const CloudGradient& grad, const LearningRates& lr, double means_lr);

  /// Rebuilds moment storage after densification: slot i takes the moments
  /// of origin[i], or zeros when origin[i] < 0.
  void remap(const std::vector<std::ptrdiff_t>& origin);

  /// Zeros the opacity moments (done after an opacity reset).
  void reset_opacity_state();

  std::size_t size() const { return m_.size(); }
  std::int64_t steps() const { return t_; }

 private:
  CloudGradient m_;
  CloudGradient v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace sp360
