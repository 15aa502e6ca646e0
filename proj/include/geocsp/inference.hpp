#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "geocsp/model.hpp"

namespace geocsp {

struct InferenceConfig {
  int iterations = 15;
  int resamples = 1;
  bool trace = false;
  std::uint64_t seed = 0;
  /// Problems per merged forward pass.
  int batch_size = 128;
};

inline constexpr int kOracleMaxIterations = 50;

/// Decoded state after one iteration.
struct TraceStep {
  int iteration = 0;
  /// Decoded grid index per unknown variable (problem order of unknowns()).
  std::vector<int> predicted;
  std::vector<bool> satisfied;
};

struct InferenceTrace {
  std::vector<VarId> unknowns;
  /// iterations + 1 entries; entry 0 decodes the initial random state.
  std::vector<TraceStep> steps;
  /// Hidden states per iteration: unknown rows x d, and constraint rows x d
  /// in input order. Entry 0 is the initial state.
  std::vector<Matrix> variable_states;
  std::vector<Matrix> constraint_states;
};

struct Prediction {
  /// Fixed points plus decoded unknowns.
  Assignment assignment;
  int satisfied = 0;
  int resample = 0;
};

/// Initial-state seed for a problem and resample; independent of batching.
std::uint64_t problem_seed(std::uint64_t seed, std::size_t problem_index, int resample);

/// Runs inference on many problems. `index_offset` is added to the position
/// of each problem when deriving its seed, so splitting a dataset into calls
/// does not change results. With resamples > 1 the run satisfying the most
/// constraints is kept (ties: lowest resample).
std::vector<Prediction> run_batch(std::span<const Problem> problems, const ModelParams& params,
                                  const InferenceConfig& cfg, std::size_t index_offset = 0);

struct RunResult {
  Prediction prediction;
  std::optional<InferenceTrace> trace;
};

/// Single-problem run; with cfg.trace the first resample is traced.
RunResult run(const Problem& problem, const ModelParams& params, const InferenceConfig& cfg,
              std::size_t problem_index = 0);

/// Decoded unknowns after every iteration 0..iterations for each problem.
/// result[i][t] lists grid indices of problem i's unknowns after t iterations.
std::vector<std::vector<std::vector<int>>> decode_all_iterations(std::span<const Problem> problems,
                                                                 const ModelParams& params, int iterations,
                                                                 std::uint64_t seed, int batch_size = 128,
                                                                 std::size_t index_offset = 0);

struct OracleResult {
  int best_iteration = 0;
  int correct = 0;
  Prediction prediction;
};

/// Scans iterations 1..max_iterations and keeps the earliest one with the most
/// correct unknowns. Needs labels.
std::vector<OracleResult> best_iteration_oracle(std::span<const Problem> problems, const ModelParams& params,
                                                std::uint64_t seed, int max_iterations = kOracleMaxIterations,
                                                int batch_size = 128);

struct TimingHistograms {
  /// counts[t] for t in 1..max_iterations (index 0 unused).
  std::vector<std::size_t> first_solve;
  std::vector<std::size_t> best_accuracy;
  std::size_t solved = 0;
  std::size_t unsolved = 0;
};

/// First iteration where every unknown is correct (solved problems) and the
/// iteration of best point accuracy (unsolved problems).
TimingHistograms timing_histograms(std::span<const Problem> problems, const ModelParams& params, std::uint64_t seed,
                                   int max_iterations = kOracleMaxIterations, int batch_size = 128);

struct EvalReport {
  std::size_t problems = 0;
  std::size_t points = 0;
  std::size_t correct_points = 0;
  std::size_t complete = 0;
  double point_accuracy = 0.0;
  double complete_accuracy = 0.0;
  std::vector<Prediction> predictions;
};

/// Scores predictions against labels.
EvalReport score(std::span<const Problem> problems, std::vector<Prediction> predictions);

EvalReport evaluate(const ModelParams& params, std::span<const Problem> problems, const InferenceConfig& cfg);

/// Number of constraints satisfied by an assignment covering all variables.
int satisfied_count(const Problem& problem, const Assignment& assignment);

}  // namespace geocsp
