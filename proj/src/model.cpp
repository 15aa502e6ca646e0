#include "geocsp/model.hpp"

#include <algorithm>
#include <cmath>

#include "geocsp/error.hpp"

namespace geocsp {

using nn::CellState;
using nn::RowRef;
using nn::Tape;
using nn::Var;

std::string_view to_string(InitMode mode) { return mode == InitMode::Grid ? "grid" : "random"; }

InitMode parse_init_mode(std::string_view text) {
  if (text == "grid") return InitMode::Grid;
  if (text == "random") return InitMode::Random;
  fail(ErrorKind::Config, "unknown init mode '" + std::string(text) + "' (expected random or grid)");
}

std::vector<nn::Parameter*> ModelParams::parameters() {
  std::vector<nn::Parameter*> out{&W};
  for (auto& c : constraint_cells) {
    for (nn::Parameter* p : {&c.w_ih, &c.w_hh, &c.b_ih, &c.b_hh}) out.push_back(p);
  }
  for (nn::Parameter* p : {&variable_cell.w_ih, &variable_cell.w_hh, &variable_cell.b_ih, &variable_cell.b_hh}) {
    out.push_back(p);
  }
  return out;
}

std::vector<const nn::Parameter*> ModelParams::parameters() const {
  auto mut = const_cast<ModelParams*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

Matrix grid_init(int grid_side, int dim, Rng& rng) {
  if (dim < 2) fail(ErrorKind::Config, "grid init needs at least two dimensions");
  if (grid_side < 1) fail(ErrorKind::Config, "grid side must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(dim, dim);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  const int cells = grid_side * grid_side;
  Matrix w(cells, dim);
  for (int i = 0; i < cells; ++i) {
    const GridPoint p = index_to_point(i, grid_side);
    w.row(i) = p.x * q.row(0) + p.y * q.row(1);
  }
  return w;
}

ModelParams make_model(const ModelConfig& cfg, InitMode init, Rng& rng) {
  if (cfg.grid_side < 1 || cfg.dim < 1) fail(ErrorKind::Config, "model needs a positive grid side and dimension");
  ModelParams m;
  m.config = cfg;
  const int d = cfg.dim;
  if (init == InitMode::Grid) {
    m.W = nn::Parameter("W", grid_init(cfg.grid_side, d, rng));
  } else {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
    Matrix w(cfg.cells(), d);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    m.W = nn::Parameter("W", std::move(w));
  }
  for (ConstraintKind k : kAllKinds) {
    auto& cell = m.constraint_cells[static_cast<int>(k)];
    cell = nn::make_cell(cfg.cell, 4 * d, d, std::string("U_") + kind_letter(k));
    nn::init_cell_uniform(cell, rng);
  }
  m.variable_cell = nn::make_cell(cfg.cell, d, d, "U_X");
  nn::init_cell_uniform(m.variable_cell, rng);
  return m;
}

ParamCount param_count(const ModelConfig& cfg) {
  ParamCount c;
  const auto d = static_cast<std::size_t>(cfg.dim);
  c.embedding = static_cast<std::size_t>(cfg.cells()) * d;
  for (auto& k : c.constraint_cells) k = nn::cell_param_count(cfg.cell, 4 * d, d);
  c.variable_cell = nn::cell_param_count(cfg.cell, d, d);
  c.total = c.embedding + c.variable_cell;
  for (auto k : c.constraint_cells) c.total += k;
  return c;
}

ParamCount param_count(const ModelParams& params) {
  ParamCount c;
  c.embedding = params.W.size();
  for (std::size_t k = 0; k < 4; ++k) c.constraint_cells[k] = params.constraint_cells[k].param_count();
  c.variable_cell = params.variable_cell.param_count();
  c.total = c.embedding + c.variable_cell;
  for (auto k : c.constraint_cells) c.total += k;
  return c;
}

bool BipartiteGraph::has_targets() const {
  return std::all_of(targets.begin(), targets.end(), [](int t) { return t >= 0; });
}

BipartiteGraph build_graph(std::span<const Problem* const> problems) {
  BipartiteGraph g;
  g.problem_count = problems.size();
  g.unknown_offset.push_back(0);
  if (!problems.empty()) g.grid_side = problems.front()->grid_side;

  // Per unknown row, the (kind, block row) of each incident constraint.
  std::vector<std::vector<RowRef>> incident;
  for (std::size_t j = 0; j < problems.size(); ++j) {
    const Problem& p = *problems[j];
    if (p.grid_side != g.grid_side) fail(ErrorKind::Config, "all problems in a batch must share the grid size");
    std::vector<int> row_of(p.variables.size(), -1);
    const bool labelled = p.has_labels();
    for (VarId v : p.unknowns()) {
      row_of[v] = g.unknown_count();
      g.unknown_var.push_back(v);
      g.targets.push_back(labelled && p.labels.has(v) ? point_to_index(p.labels.at(v), p.grid_side) : -1);
      incident.emplace_back();
    }
    g.unknown_offset.push_back(g.unknown_count());

    auto& rows = g.constraint_rows.emplace_back();
    for (std::size_t ci = 0; ci < p.constraints.size(); ++ci) {
      const Constraint& c = p.constraints[ci];
      const int kind = static_cast<int>(c.kind);
      auto& block = g.blocks[kind];
      const int row = block.size();
      block.problem.push_back(static_cast<int>(j));
      block.constraint.push_back(static_cast<int>(ci));
      rows.push_back({kind, row});
      const auto vars = c.vars();
      for (int s = 0; s < 4; ++s) {
        if (s >= static_cast<int>(vars.size())) {
          block.slots.push_back({-1, 0});
          continue;
        }
        const VarId v = vars[s];
        if (p.fixed.has(v)) {
          block.slots.push_back({BipartiteGraph::kSourceW, point_to_index(p.fixed.at(v), p.grid_side)});
        } else {
          block.slots.push_back({BipartiteGraph::kSourceUnknown, row_of[v]});
          auto& inc = incident[row_of[v]];
          const RowRef ref{kind, row};
          if (std::none_of(inc.begin(), inc.end(), [&](const RowRef& r) { return r.source == ref.source && r.row == ref.row; })) {
            inc.push_back(ref);
          }
        }
      }
    }
  }
  g.incidence_offset.push_back(0);
  for (const auto& inc : incident) {
    g.incidence.insert(g.incidence.end(), inc.begin(), inc.end());
    g.incidence_offset.push_back(static_cast<int>(g.incidence.size()));
  }
  return g;
}

BipartiteGraph build_graph(const Problem& problem) {
  const Problem* one = &problem;
  return build_graph(std::span<const Problem* const>(&one, 1));
}

BoundModel bind_model(Tape& tape, ModelParams& params) {
  BoundModel m;
  m.dim = params.config.dim;
  m.W = tape.param(params.W);
  for (std::size_t k = 0; k < 4; ++k) m.constraint_cells[k] = nn::bind_cell(tape, params.constraint_cells[k]);
  m.variable_cell = nn::bind_cell(tape, params.variable_cell);
  return m;
}

BoundModel bind_model(Tape& tape, const ModelParams& params) {
  BoundModel m;
  m.dim = params.config.dim;
  m.W = tape.constant(params.W.value);
  for (std::size_t k = 0; k < 4; ++k) m.constraint_cells[k] = nn::bind_cell(tape, params.constraint_cells[k]);
  m.variable_cell = nn::bind_cell(tape, params.variable_cell);
  return m;
}

NetworkState init_state(Tape& tape, const BipartiteGraph& graph, int dim, std::span<const std::uint64_t> seeds) {
  if (seeds.size() != graph.problem_count) fail(ErrorKind::Dimension, "init_state needs one seed per problem");
  Matrix vars(graph.unknown_count(), dim);
  std::array<Matrix, 4> cons;
  for (int k = 0; k < 4; ++k) cons[k].resize(graph.blocks[k].size(), dim);

  for (std::size_t j = 0; j < graph.problem_count; ++j) {
    Rng rng(seeds[j]);
    for (int r = graph.unknown_offset[j]; r < graph.unknown_offset[j + 1]; ++r) {
      for (int c = 0; c < dim; ++c) vars(r, c) = uniform_real(rng);
    }
    for (const RowRef& ref : graph.constraint_rows[j]) {
      for (int c = 0; c < dim; ++c) cons[ref.source](ref.row, c) = uniform_real(rng);
    }
  }

  NetworkState s;
  s.vars = {tape.constant(std::move(vars)), tape.constant(Matrix::Zero(graph.unknown_count(), dim))};
  for (int k = 0; k < 4; ++k) {
    const auto rows = cons[k].rows();
    s.constraints[k] = {tape.constant(std::move(cons[k])), tape.constant(Matrix::Zero(rows, dim))};
  }
  return s;
}

Var constraint_messages(Tape& tape, const BoundModel& model, const BipartiteGraph& graph, const NetworkState& state,
                        ConstraintKind kind) {
  const auto& block = graph.blocks[static_cast<int>(kind)];
  const std::array<Var, 2> sources{model.W, state.vars.h};
  return tape.gather_slots(sources, block.slots, 4, model.dim);
}

NetworkState message_pass_iteration(Tape& tape, const BoundModel& model, const BipartiteGraph& graph,
                                    const NetworkState& state, const StepOptions& opts) {
  const bool drop = opts.dropout > 0.0;
  if (drop && opts.rng == nullptr) fail(ErrorKind::Config, "dropout needs an rng");
  NetworkState next;
  next.iteration = state.iteration + 1;

  for (ConstraintKind kind : kAllKinds) {
    const int k = static_cast<int>(kind);
    if (graph.blocks[k].size() == 0) {
      next.constraints[k] = state.constraints[k];
      continue;
    }
    const Var msg = constraint_messages(tape, model, graph, state, kind);
    CellState cs = nn::cell_step(tape, model.constraint_cells[k], msg, state.constraints[k]);
    if (drop) cs.h = tape.dropout(cs.h, opts.dropout, *opts.rng);
    next.constraints[k] = cs;
  }

  if (graph.unknown_count() == 0) {
    next.vars = state.vars;
    return next;
  }
  std::array<Var, 4> sources;
  for (int k = 0; k < 4; ++k) sources[k] = next.constraints[k].h;
  const Var agg = tape.scatter_sum(sources, graph.incidence_offset, graph.incidence, model.dim);
  CellState vs = nn::cell_step(tape, model.variable_cell, agg, state.vars);
  if (drop) vs.h = tape.dropout(vs.h, opts.dropout, *opts.rng);
  next.vars = vs;
  return next;
}

Var decode_logits(Tape& tape, const BoundModel& model, const NetworkState& state) {
  return tape.matmul_nt(state.vars.h, model.W);
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    out[r] = static_cast<int>(arg);
  }
  return out;
}

}  // namespace geocsp
