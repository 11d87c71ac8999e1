#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "drift/autograd.hpp"

namespace drift {

struct AdamWConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.0f;
  /// Global gradient-norm clip; <= 0 disables.
  float clip_norm = 1.0f;
};

/// Decoupled-weight-decay Adam over an explicit parameter list. Parameters
/// not registered here are never updated.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void add(Parameter& p) {
    slots_.push_back({&p, Mat::Zero(p.value.rows(), p.value.cols()), Mat::Zero(p.value.rows(), p.value.cols())});
  }

  std::size_t size() const noexcept { return slots_.size(); }
  bool contains(const Parameter& p) const {
    return std::any_of(slots_.begin(), slots_.end(), [&](const Slot& s) { return s.p == &p; });
  }

  double grad_norm() const {
    double sq = 0.0;
    for (const auto& s : slots_)
      if (s.p->grad.size()) sq += static_cast<double>(s.p->grad.squaredNorm());
    return std::sqrt(sq);
  }

  /// One update with the given learning rate; gradients are scaled by
  /// `grad_scale` first (1/accumulation count).
  void step(float lr, float grad_scale = 1.0f) {
    ++t_;
    float clip = 1.0f;
    if (cfg_.clip_norm > 0.0f) {
      const double n = grad_norm() * grad_scale;
      if (n > cfg_.clip_norm) clip = static_cast<float>(cfg_.clip_norm / n);
    }
    const float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
    for (auto& s : slots_) {
      if (s.p->grad.size() == 0) continue;
      const float g_scale = grad_scale * clip;
      s.m = cfg_.beta1 * s.m + (1.0f - cfg_.beta1) * g_scale * s.p->grad;
      s.v = cfg_.beta2 * s.v + (1.0f - cfg_.beta2) * (g_scale * s.p->grad).cwiseAbs2();
      if (cfg_.weight_decay > 0.0f) s.p->value *= (1.0f - lr * cfg_.weight_decay);
      s.p->value.array() -= lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + cfg_.eps);
    }
  }

  void zero_grad() {
    for (auto& s : slots_) s.p->zero_grad();
  }

  std::int64_t steps_taken() const noexcept { return t_; }

 private:
  struct Slot {
    Parameter* p;
    Mat m, v;
  };
  AdamWConfig cfg_;
  std::vector<Slot> slots_;
  std::int64_t t_ = 0;
};

/// Linear warmup over the first `warmup_frac` of steps, then constant.
struct WarmupSchedule {
  float peak_lr = 1e-4f;
  std::int64_t total_steps = 1;
  float warmup_frac = 0.03f;

  std::int64_t warmup_steps() const {
    return static_cast<std::int64_t>(std::ceil(warmup_frac * static_cast<float>(total_steps)));
  }
  float lr(std::int64_t step) const {
    const auto w = warmup_steps();
    if (w <= 0 || step >= w) return peak_lr;
    return peak_lr * static_cast<float>(step + 1) / static_cast<float>(w);
  }
};

}  // namespace drift
