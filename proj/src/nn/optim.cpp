#include "geocsp/nn/optim.hpp"

#include <cmath>
#include <numbers>

#include "geocsp/error.hpp"

namespace geocsp::nn {

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step(double lr) {
  for (const Parameter* p : params_) {
    if (!p->grad.allFinite()) fail(ErrorKind::TrainingAbort, "non-finite gradient in parameter " + p->name);
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    p.value *= 1.0 - lr * cfg_.weight_decay;
    m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * p.grad;
    v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + cfg_.eps);
  }
}

double clip_global_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (Parameter* p : params) p->grad *= scale;
  }
  return norm;
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

Ema::Ema(const std::vector<Parameter*>& params, double decay) : decay_(decay) {
  if (!(decay >= 0.0 && decay < 1.0)) fail(ErrorKind::Config, "EMA decay must lie in [0, 1)");
  for (const Parameter* p : params) shadow_.push_back(p->value);
}

void Ema::update(const std::vector<Parameter*>& params) {
  if (params.size() != shadow_.size()) fail(ErrorKind::Dimension, "EMA parameter list changed size");
  for (std::size_t k = 0; k < params.size(); ++k) {
    shadow_[k] = decay_ * shadow_[k] + (1.0 - decay_) * params[k]->value;
  }
}

double cosine_cycle_lr(double epoch, const CosineCycleConfig& cfg) {
  if (epoch < 0.0) fail(ErrorKind::Config, "epoch must be non-negative");
  const double cycle = std::floor(epoch / cfg.cycle_epochs);
  const double t = epoch - cycle * cfg.cycle_epochs;
  const double peak = cfg.base_lr * std::pow(cfg.peak_decay, cycle);
  const double low = cfg.min_factor * peak;
  return low + (peak - low) * 0.5 * (1.0 + std::cos(std::numbers::pi * t / cfg.cycle_epochs));
}

}  // namespace geocsp::nn
