#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "geocsp/nn/cells.hpp"
#include "geocsp/problem.hpp"

namespace geocsp {

using nn::Matrix;

enum class InitMode { Random, Grid };

std::string_view to_string(InitMode mode);
InitMode parse_init_mode(std::string_view text);

struct ModelConfig {
  int grid_side = 20;
  int dim = 128;
  nn::CellKind cell = nn::CellKind::Lstm;

  int cells() const { return grid_side * grid_side; }
};

/// W is the shared point embedding and classifier; one recurrent cell per
/// constraint kind reads the four slot embeddings, and a shared variable cell
/// reads the summed constraint states.
struct ModelParams {
  ModelConfig config;
  nn::Parameter W;
  std::array<nn::CellParams, 4> constraint_cells;  // indexed by ConstraintKind
  nn::CellParams variable_cell;

  /// Stable order: W, constraint cells by kind, variable cell.
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
};

/// W rows are (x, y, 0, ..., 0) rotated by a random orthogonal matrix.
Matrix grid_init(int grid_side, int dim, Rng& rng);

/// Random mode draws W from N(0, 1/dim); cells are uniform(+-1/sqrt(dim)).
ModelParams make_model(const ModelConfig& cfg, InitMode init, Rng& rng);

struct ParamCount {
  std::size_t embedding = 0;
  std::array<std::size_t, 4> constraint_cells{};
  std::size_t variable_cell = 0;
  std::size_t total = 0;
};

ParamCount param_count(const ModelConfig& cfg);
ParamCount param_count(const ModelParams& params);

/// A batch of problems merged into one block-diagonal bipartite graph.
/// Unknown variables of all problems occupy consecutive hidden-state rows.
struct BipartiteGraph {
  static constexpr int kSourceW = 0;
  static constexpr int kSourceUnknown = 1;

  struct KindBlock {
    /// Four refs per constraint into W (known point) or the unknown rows; the
    /// fourth slot of a midpoint is a zero ref.
    std::vector<nn::RowRef> slots;
    std::vector<int> problem;
    std::vector<int> constraint;  // index within its problem
    int size() const { return static_cast<int>(problem.size()); }
  };

  int grid_side = 0;
  std::size_t problem_count = 0;
  /// Unknown rows of problem j are [unknown_offset[j], unknown_offset[j+1]).
  std::vector<int> unknown_offset;
  std::vector<VarId> unknown_var;
  /// Grid index label per unknown row, -1 when the problem carries no labels.
  std::vector<int> targets;
  std::array<KindBlock, 4> blocks;
  /// Per unknown row, the constraints touching it (source = kind).
  std::vector<int> incidence_offset;
  std::vector<nn::RowRef> incidence;
  /// Per problem and constraint index, its (kind, row) in the blocks.
  std::vector<std::vector<nn::RowRef>> constraint_rows;

  int unknown_count() const { return static_cast<int>(unknown_var.size()); }
  bool has_targets() const;
};

BipartiteGraph build_graph(std::span<const Problem* const> problems);
BipartiteGraph build_graph(const Problem& problem);

/// Parameters registered on a tape for one forward pass.
struct BoundModel {
  int dim = 0;
  nn::Var W;
  std::array<nn::CellVars, 4> constraint_cells;
  nn::CellVars variable_cell;
};

BoundModel bind_model(nn::Tape& tape, ModelParams& params);
/// Inference binding: parameters enter as constants.
BoundModel bind_model(nn::Tape& tape, const ModelParams& params);

struct NetworkState {
  nn::CellState vars;
  std::array<nn::CellState, 4> constraints;
  int iteration = 0;
};

/// Hidden states of unknowns and constraints uniform in [0,1]^d, cells zero.
/// Problem j draws from Rng(seeds[j]): its unknown rows first, then its
/// constraints in input order, so results do not depend on batching.
NetworkState init_state(nn::Tape& tape, const BipartiteGraph& graph, int dim, std::span<const std::uint64_t> seeds);

struct StepOptions {
  double dropout = 0.0;
  Rng* rng = nullptr;
};

/// Updates every constraint from its concatenated slot embeddings, then every
/// unknown variable from the sum of its constraints' new hidden states.
NetworkState message_pass_iteration(nn::Tape& tape, const BoundModel& model, const BipartiteGraph& graph,
                                    const NetworkState& state, const StepOptions& opts = {});

/// Unknown rows x n^2 logits (inner products with the rows of W).
nn::Var decode_logits(nn::Tape& tape, const BoundModel& model, const NetworkState& state);

std::vector<int> argmax_rows(const Matrix& logits);

/// The concatenated slot message fed to each constraint of a kind block.
nn::Var constraint_messages(nn::Tape& tape, const BoundModel& model, const BipartiteGraph& graph,
                            const NetworkState& state, ConstraintKind kind);

}  // namespace geocsp
