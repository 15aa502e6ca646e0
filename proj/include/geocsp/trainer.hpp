#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "geocsp/inference.hpp"
#include "geocsp/model.hpp"
#include "geocsp/nn/optim.hpp"

namespace geocsp {

/// Two-sided geometric distribution over [center - spread, center + spread]:
/// p(k) proportional to r^|k - center|, with r chosen so p(center) matches.
struct IterationDistribution {
  int center = 15;
  int spread = 10;
  double p_center = 0.40;

  void validate() const;
  /// Solves 1 + 2 * sum_{j=1..spread} r^j = 1 / p_center for r in (0, 1].
  double ratio() const;
  /// Probability of each k in [center - spread, center + spread].
  std::vector<double> probabilities() const;
};

int sample_iterations(const IterationDistribution& dist, Rng& rng);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double base_lr = 1e-3;
  double weight_decay = 1e-3;
  double clip_norm = 0.65;
  double ema_decay = 0.99;
  double dropout = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double cycle_epochs = 15.0;
  double peak_decay = 0.9;
  double min_lr_factor = 0.1;
  IterationDistribution iterations;
  int eval_iterations = 15;
  InitMode init = InitMode::Random;
  nn::CellKind cell = nn::CellKind::Lstm;
  int dim = 128;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  /// Stop after the first epoch whose validation point accuracy reaches this
  /// value; 0 trains for all epochs.
  double stop_at_accuracy = 0.0;
  /// Validation is run on at most this many held-out problems; 0 means all.
  std::size_t max_validation = 0;

  void validate() const;
  nn::CosineCycleConfig schedule() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  double val_point_accuracy = 0.0;
  double val_complete_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  /// First epoch whose validation point accuracy reached 90%.
  std::optional<int> epochs_to_90;
  int best_epoch = 0;
  double best_val_point_accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

struct TrainState {
  ModelParams params;
  ModelParams ema;
  ModelParams best_ema;
  TrainReport report;
};

/// Called after every epoch with the record and the current EMA weights.
using EpochCallback = std::function<void(const EpochRecord&, const ModelParams& ema)>;

/// Train/validation split: the last validation_fraction of a seeded shuffle.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count, double validation_fraction,
                                                                            std::uint64_t seed);

/// Mean cross-entropy over the unknown points of a batch after `iterations`
/// steps. Accumulates gradients into `params` when `backward` is set.
double batch_loss(ModelParams& params, std::span<const Problem* const> batch, int iterations,
                  std::span<const std::uint64_t> seeds, double dropout, Rng* rng, bool backward);

TrainState train(std::span<const Problem> dataset, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Copies shadow values into a model with the same layout.
ModelParams with_values(const ModelParams& layout, const std::vector<Matrix>& values);

}  // namespace geocsp
