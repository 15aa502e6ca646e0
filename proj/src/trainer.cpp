#include "geocsp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "geocsp/error.hpp"

namespace geocsp {

void IterationDistribution::validate() const {
  if (center < 1 || spread < 0 || center - spread < 0) fail(ErrorKind::Config, "iteration range must stay non-negative");
  if (!(p_center > 0.0 && p_center <= 1.0)) fail(ErrorKind::Config, "p_center must lie in (0, 1]");
  if (p_center * (2.0 * spread + 1.0) < 1.0) {
    fail(ErrorKind::Config, "p_center is below the uniform probability over the range");
  }
}

double IterationDistribution::ratio() const {
  validate();
  if (spread == 0 || p_center == 1.0) return 0.0;
  const double target = 1.0 / p_center;
  auto mass = [&](double r) {
    double s = 1.0, term = 1.0;
    for (int j = 1; j <= spread; ++j) {
      term *= r;
      s += 2.0 * term;
    }
    return s;
  };
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> IterationDistribution::probabilities() const {
  const double r = ratio();
  std::vector<double> p(2 * spread + 1);
  double total = 0.0;
  for (int k = -spread; k <= spread; ++k) {
    p[k + spread] = std::pow(r, std::abs(k));
    total += p[k + spread];
  }
  for (double& x : p) x /= total;
  return p;
}

int sample_iterations(const IterationDistribution& dist, Rng& rng) {
  const auto p = dist.probabilities();
  std::discrete_distribution<int> pick(p.begin(), p.end());
  return dist.center - dist.spread + pick(rng);
}

void TrainConfig::validate() const {
  if (epochs < 1 || batch_size < 1) fail(ErrorKind::Config, "epochs and batch_size must be positive");
  if (base_lr <= 0.0 || weight_decay < 0.0 || clip_norm <= 0.0) fail(ErrorKind::Config, "invalid optimizer settings");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) fail(ErrorKind::Config, "ema_decay must lie in [0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail(ErrorKind::Config, "dropout must lie in [0, 1)");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    fail(ErrorKind::Config, "validation_fraction must lie in (0, 1)");
  }
  if (eval_iterations < 0 || dim < 2) fail(ErrorKind::Config, "invalid eval_iterations or dim");
  if (cycle_epochs <= 0.0 || peak_decay <= 0.0 || min_lr_factor < 0.0 || min_lr_factor > 1.0) {
    fail(ErrorKind::Config, "invalid learning-rate schedule");
  }
  iterations.validate();
}

nn::CosineCycleConfig TrainConfig::schedule() const { return {base_lr, cycle_epochs, peak_decay, min_lr_factor}; }

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count, double validation_fraction,
                                                                            std::uint64_t seed) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(count)));
  std::vector<std::size_t> train(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(val));
  std::vector<std::size_t> valid(idx.end() - static_cast<std::ptrdiff_t>(val), idx.end());
  return {std::move(train), std::move(valid)};
}

double batch_loss(ModelParams& params, std::span<const Problem* const> batch, int iterations,
                  std::span<const std::uint64_t> seeds, double dropout, Rng* rng, bool backward) {
  const BipartiteGraph graph = build_graph(batch);
  if (graph.unknown_count() == 0) return 0.0;
  if (!graph.has_targets()) fail(ErrorKind::Config, "training needs labelled problems");
  nn::Tape tape;
  const BoundModel model = bind_model(tape, params);
  NetworkState state = init_state(tape, graph, params.config.dim, seeds);
  const StepOptions opts{dropout, rng};
  for (int t = 0; t < iterations; ++t) state = message_pass_iteration(tape, model, graph, state, opts);
  const nn::Var loss = tape.softmax_cross_entropy(decode_logits(tape, model, state), graph.targets);
  const double value = loss.value()(0, 0);
  if (backward) tape.backward(loss);
  return value;
}

ModelParams with_values(const ModelParams& layout, const std::vector<Matrix>& values) {
  ModelParams out = layout;
  auto params = out.parameters();
  if (params.size() != values.size()) fail(ErrorKind::Dimension, "parameter list size mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k]->value = values[k];
    params[k]->grad.resize(0, 0);
  }
  return out;
}

TrainState train(std::span<const Problem> dataset, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (dataset.size() < 2) fail(ErrorKind::Config, "training needs at least two problems");
  const int grid = dataset.front().grid_side;
  for (const Problem& p : dataset) {
    if (p.grid_side != grid) fail(ErrorKind::Config, "dataset mixes grid sizes");
  }

  auto [train_idx, val_idx] = split_indices(dataset.size(), cfg.validation_fraction, derive_seed(cfg.seed, 1));
  if (train_idx.empty() || val_idx.empty()) fail(ErrorKind::Config, "dataset too small for the validation split");
  if (cfg.max_validation > 0 && val_idx.size() > cfg.max_validation) val_idx.resize(cfg.max_validation);
  std::vector<Problem> validation;
  for (std::size_t i : val_idx) validation.push_back(dataset[i]);

  Rng init_rng(derive_seed(cfg.seed, 0));
  TrainState st;
  st.params = make_model({grid, cfg.dim, cfg.cell}, cfg.init, init_rng);
  st.report.train_size = train_idx.size();
  st.report.validation_size = validation.size();
  auto plist = st.params.parameters();
  nn::AdamW opt(plist, {cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay});
  nn::Ema ema(plist, cfg.ema_decay);
  st.ema = st.params;
  st.best_ema = st.params;

  Rng rng(derive_seed(cfg.seed, 2));
  InferenceConfig eval_cfg;
  eval_cfg.iterations = cfg.eval_iterations;
  eval_cfg.seed = derive_seed(cfg.seed, 3);
  st.report.best_val_point_accuracy = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = nn::cosine_cycle_lr(epoch, cfg.schedule());
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<const Problem*> batch;
    std::vector<std::uint64_t> seeds;
    for (std::size_t begin = 0; begin < train_idx.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(train_idx.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      seeds.clear();
      for (std::size_t i = begin; i < end; ++i) {
        batch.push_back(&dataset[train_idx[i]]);
        seeds.push_back(rng());
      }
      const int iterations = sample_iterations(cfg.iterations, rng);
      nn::zero_grads(plist);
      const double loss = batch_loss(st.params, batch, iterations, seeds, cfg.dropout, &rng, true);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::TrainingAbort, "non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                           std::to_string(batches) + " (lr " + std::to_string(lr) + ")");
      }
      nn::clip_global_norm(plist, cfg.clip_norm);
      opt.step(lr);
      ema.update(plist);
      loss_sum += loss;
      ++batches;
    }

    st.ema = with_values(st.params, ema.shadow());
    const EvalReport val = evaluate(st.ema, validation, eval_cfg);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    rec.val_point_accuracy = val.point_accuracy;
    rec.val_complete_accuracy = val.complete_accuracy;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    st.report.epochs.push_back(rec);
    if (rec.val_point_accuracy > st.report.best_val_point_accuracy) {
      st.report.best_val_point_accuracy = rec.val_point_accuracy;
      st.report.best_epoch = rec.epoch;
      st.best_ema = st.ema;
    }
    if (!st.report.epochs_to_90 && rec.val_point_accuracy >= 0.9) st.report.epochs_to_90 = rec.epoch;
    if (on_epoch) on_epoch(rec, st.ema);
    if (cfg.stop_at_accuracy > 0.0 && rec.val_point_accuracy >= cfg.stop_at_accuracy) break;
  }
  return st;
}

}  // namespace geocsp
