#include "geocsp/inference.hpp"

#include <algorithm>

#include "geocsp/error.hpp"

namespace geocsp {

using nn::Tape;

std::uint64_t problem_seed(std::uint64_t seed, std::size_t problem_index, int resample) {
  return derive_seed(derive_seed(seed, problem_index), static_cast<std::uint64_t>(resample));
}

int satisfied_count(const Problem& problem, const Assignment& assignment) {
  int n = 0;
  for (const Constraint& c : problem.constraints) n += check_constraint(c, assignment) ? 1 : 0;
  return n;
}

namespace {

struct StepView {
  int iteration;
  const BipartiteGraph& graph;
  const NetworkState& state;
  const Matrix& logits;
};

/// Runs `iterations` message-passing steps on a merged batch without keeping
/// history, calling `on_step` after the initial state and after each step.
template <class F>
void unroll(std::span<const Problem* const> problems, const ModelParams& params, int iterations,
            std::span<const std::uint64_t> seeds, F&& on_step) {
  if (iterations < 0) fail(ErrorKind::Config, "iteration count must be non-negative");
  for (const Problem* p : problems) {
    if (p->grid_side != params.config.grid_side) {
      fail(ErrorKind::Config, "problem grid size " + std::to_string(p->grid_side) + " does not match the model (" +
                                  std::to_string(params.config.grid_side) + ")");
    }
  }
  const BipartiteGraph graph = build_graph(problems);
  Tape tape;
  const BoundModel model = bind_model(tape, params);
  const std::size_t mark = tape.size();
  NetworkState state = init_state(tape, graph, params.config.dim, seeds);
  for (int t = 0;; ++t) {
    const Matrix logits = decode_logits(tape, model, state).value();
    on_step(StepView{t, graph, state, logits});
    if (t == iterations) break;
    const NetworkState next = message_pass_iteration(tape, model, graph, state);
    Matrix vh = next.vars.h.value(), vc = next.vars.c.value();
    std::array<Matrix, 4> ch, cc;
    for (int k = 0; k < 4; ++k) {
      ch[k] = next.constraints[k].h.value();
      cc[k] = next.constraints[k].c.value();
    }
    tape.rewind(mark);
    state.vars = {tape.constant(std::move(vh)), tape.constant(std::move(vc))};
    for (int k = 0; k < 4; ++k) state.constraints[k] = {tape.constant(std::move(ch[k])), tape.constant(std::move(cc[k]))};
    state.iteration = next.iteration;
  }
}

Assignment decoded_assignment(const Problem& p, std::span<const int> predicted) {
  Assignment a = p.fixed;
  a.resize(p.variables.size());
  const auto unknowns = p.unknowns();
  for (std::size_t i = 0; i < unknowns.size(); ++i) a.set(unknowns[i], index_to_point(predicted[i], p.grid_side));
  return a;
}

std::vector<int> problem_rows(const BipartiteGraph& g, const std::vector<int>& argmax, std::size_t j) {
  return {argmax.begin() + g.unknown_offset[j], argmax.begin() + g.unknown_offset[j + 1]};
}

template <class F>
void for_each_chunk(std::size_t total, int batch_size, F&& f) {
  const std::size_t step = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t begin = 0; begin < total; begin += step) f(begin, std::min(total, begin + step));
}

std::vector<const Problem*> pointers(std::span<const Problem> problems, std::size_t begin, std::size_t end) {
  std::vector<const Problem*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(&problems[i]);
  return out;
}

}  // namespace

std::vector<Prediction> run_batch(std::span<const Problem> problems, const ModelParams& params,
                                  const InferenceConfig& cfg, std::size_t index_offset) {
  if (cfg.resamples < 1) fail(ErrorKind::Config, "resamples must be at least 1");
  std::vector<Prediction> best(problems.size());
  for_each_chunk(problems.size(), cfg.batch_size, [&](std::size_t begin, std::size_t end) {
    const auto ptrs = pointers(problems, begin, end);
    for (int r = 0; r < cfg.resamples; ++r) {
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = begin; i < end; ++i) seeds.push_back(problem_seed(cfg.seed, index_offset + i, r));
      unroll(ptrs, params, cfg.iterations, seeds, [&](const StepView& v) {
        if (v.iteration != cfg.iterations) return;
        const auto argmax = argmax_rows(v.logits);
        for (std::size_t j = 0; j < ptrs.size(); ++j) {
          const Problem& p = *ptrs[j];
          Prediction pred;
          pred.assignment = decoded_assignment(p, problem_rows(v.graph, argmax, j));
          pred.satisfied = satisfied_count(p, pred.assignment);
          pred.resample = r;
          Prediction& slot = best[begin + j];
          if (r == 0 || pred.satisfied > slot.satisfied) slot = std::move(pred);
        }
      });
    }
  });
  return best;
}

RunResult run(const Problem& problem, const ModelParams& params, const InferenceConfig& cfg, std::size_t problem_index) {
  RunResult out;
  const std::span<const Problem> one(&problem, 1);
  out.prediction = run_batch(one, params, cfg, problem_index).front();
  if (!cfg.trace) return out;

  InferenceTrace trace;
  trace.unknowns = problem.unknowns();
  const Problem* ptr = &problem;
  const std::uint64_t seed = problem_seed(cfg.seed, problem_index, 0);
  unroll(std::span<const Problem* const>(&ptr, 1), params, cfg.iterations, std::span<const std::uint64_t>(&seed, 1),
         [&](const StepView& v) {
           TraceStep step;
           step.iteration = v.iteration;
           step.predicted = argmax_rows(v.logits);
           const Assignment a = decoded_assignment(problem, step.predicted);
           for (const Constraint& c : problem.constraints) step.satisfied.push_back(check_constraint(c, a));
           trace.steps.push_back(std::move(step));
           trace.variable_states.push_back(v.state.vars.h.value());
           Matrix cons(static_cast<Eigen::Index>(problem.constraints.size()), params.config.dim);
           for (std::size_t ci = 0; ci < problem.constraints.size(); ++ci) {
             const auto ref = v.graph.constraint_rows[0][ci];
             cons.row(static_cast<Eigen::Index>(ci)) = v.state.constraints[ref.source].h.value().row(ref.row);
           }
           trace.constraint_states.push_back(std::move(cons));
         });
  out.trace = std::move(trace);
  return out;
}

std::vector<std::vector<std::vector<int>>> decode_all_iterations(std::span<const Problem> problems,
                                                                 const ModelParams& params, int iterations,
                                                                 std::uint64_t seed, int batch_size,
                                                                 std::size_t index_offset) {
  std::vector<std::vector<std::vector<int>>> out(problems.size());
  for_each_chunk(problems.size(), batch_size, [&](std::size_t begin, std::size_t end) {
    const auto ptrs = pointers(problems, begin, end);
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = begin; i < end; ++i) seeds.push_back(problem_seed(seed, index_offset + i, 0));
    unroll(ptrs, params, iterations, seeds, [&](const StepView& v) {
      const auto argmax = argmax_rows(v.logits);
      for (std::size_t j = 0; j < ptrs.size(); ++j) out[begin + j].push_back(problem_rows(v.graph, argmax, j));
    });
  });
  return out;
}

namespace {

std::vector<int> label_indices(const Problem& p) {
  if (!p.has_labels()) fail(ErrorKind::Config, "oracle evaluation needs labelled problems");
  std::vector<int> out;
  for (VarId v : p.unknowns()) out.push_back(point_to_index(p.labels.at(v), p.grid_side));
  return out;
}

int count_correct(const std::vector<int>& predicted, const std::vector<int>& truth) {
  int n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) n += predicted[i] == truth[i] ? 1 : 0;
  return n;
}

}  // namespace

std::vector<OracleResult> best_iteration_oracle(std::span<const Problem> problems, const ModelParams& params,
                                                std::uint64_t seed, int max_iterations, int batch_size) {
  if (max_iterations < 1 || max_iterations > kOracleMaxIterations) {
    fail(ErrorKind::Config, "oracle iterations must lie in [1, 50]");
  }
  const auto decoded = decode_all_iterations(problems, params, max_iterations, seed, batch_size);
  std::vector<OracleResult> out;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const auto truth = label_indices(problems[i]);
    OracleResult best;
    best.correct = -1;
    for (int t = 1; t <= max_iterations; ++t) {
      const int c = count_correct(decoded[i][t], truth);
      if (c > best.correct) {
        best.correct = c;
        best.best_iteration = t;
      }
    }
    best.prediction.assignment = decoded_assignment(problems[i], decoded[i][best.best_iteration]);
    best.prediction.satisfied = satisfied_count(problems[i], best.prediction.assignment);
    out.push_back(std::move(best));
  }
  return out;
}

TimingHistograms timing_histograms(std::span<const Problem> problems, const ModelParams& params, std::uint64_t seed,
                                   int max_iterations, int batch_size) {
  TimingHistograms h;
  h.first_solve.assign(max_iterations + 1, 0);
  h.best_accuracy.assign(max_iterations + 1, 0);
  const auto decoded = decode_all_iterations(problems, params, max_iterations, seed, batch_size);
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const auto truth = label_indices(problems[i]);
    int first = 0;
    int best_t = 1;
    int best_c = -1;
    for (int t = 1; t <= max_iterations; ++t) {
      const int c = count_correct(decoded[i][t], truth);
      if (c == static_cast<int>(truth.size()) && first == 0) first = t;
      if (c > best_c) {
        best_c = c;
        best_t = t;
      }
    }
    if (first > 0) {
      ++h.first_solve[first];
      ++h.solved;
    } else {
      ++h.best_accuracy[best_t];
      ++h.unsolved;
    }
  }
  return h;
}

EvalReport score(std::span<const Problem> problems, std::vector<Prediction> predictions) {
  if (predictions.size() != problems.size()) fail(ErrorKind::Dimension, "one prediction per problem expected");
  EvalReport r;
  r.problems = problems.size();
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const Problem& p = problems[i];
    if (!p.has_labels()) fail(ErrorKind::Config, "evaluation needs labelled problems");
    bool all = true;
    for (VarId v : p.unknowns()) {
      ++r.points;
      if (predictions[i].assignment.get(v) == p.labels.get(v)) {
        ++r.correct_points;
      } else {
        all = false;
      }
    }
    r.complete += all ? 1 : 0;
  }
  r.point_accuracy = r.points ? static_cast<double>(r.correct_points) / static_cast<double>(r.points) : 1.0;
  r.complete_accuracy = r.problems ? static_cast<double>(r.complete) / static_cast<double>(r.problems) : 1.0;
  r.predictions = std::move(predictions);
  return r;
}

EvalReport evaluate(const ModelParams& params, std::span<const Problem> problems, const InferenceConfig& cfg) {
  return score(problems, run_batch(problems, params, cfg));
}

}  // namespace geocsp
