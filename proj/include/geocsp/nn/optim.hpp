#pragma once

#include <cstdint>
#include <vector>

#include "geocsp/nn/tape.hpp"

namespace geocsp::nn {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
};

/// AdamW with decoupled weight decay: w <- w - lr*wd*w, then the bias-corrected
/// Adam update.
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::vector<Parameter*> params, AdamWConfig cfg);

  /// Applies one update at learning rate `lr` using the accumulated grads.
  /// Throws ErrorKind::TrainingAbort on a non-finite gradient, leaving all
  /// parameters untouched.
  void step(double lr);

  std::int64_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  std::vector<Parameter*> params_;
  AdamWConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t t_ = 0;
};

/// Scales all grads so their joint L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
double clip_global_norm(const std::vector<Parameter*>& params, double max_norm);

void zero_grads(const std::vector<Parameter*>& params);

/// Exponential moving average of parameter values.
class Ema {
 public:
  Ema() = default;
  Ema(const std::vector<Parameter*>& params, double decay);

  /// shadow <- decay*shadow + (1-decay)*param.
  void update(const std::vector<Parameter*>& params);
  const std::vector<Matrix>& shadow() const { return shadow_; }
  std::vector<Matrix>& shadow() { return shadow_; }
  double decay() const { return decay_; }

 private:
  std::vector<Matrix> shadow_;
  double decay_ = 0.99;
};

struct CosineCycleConfig {
  double base_lr = 1e-3;
  double cycle_epochs = 15.0;
  double peak_decay = 0.9;
  double min_factor = 0.1;
};

/// Cosine annealing inside cycles of fixed length; each cycle's peak is the
/// previous one times `peak_decay` and its floor is `min_factor` times its peak.
double cosine_cycle_lr(double epoch, const CosineCycleConfig& cfg = {});

}  // namespace geocsp::nn
