#include <cmath>

#include "doctest.h"
#include "geocsp/error.hpp"
#include "geocsp/generator.hpp"
#include "geocsp/model.hpp"
#include "geocsp/nn/pca.hpp"
#include "support.hpp"

using namespace geocsp;

namespace {

ModelParams small_model(int grid, int dim, std::uint64_t seed, InitMode init = InitMode::Random,
                        nn::CellKind cell = nn::CellKind::Lstm) {
  Rng rng(seed);
  return make_model({grid, dim, cell}, init, rng);
}

std::vector<Problem> small_dataset(int count, std::uint64_t seed) {
  GeneratorConfig g = GeneratorConfig::square_translation(6);
  g.seed = seed;
  g.max_constraints = 5;
  return generate_dataset(g, count).problems;
}

Matrix final_states(const ModelParams& params, std::span<const Problem* const> batch,
                    std::span<const std::uint64_t> seeds, int iterations) {
  const BipartiteGraph graph = build_graph(batch);
  nn::Tape tape;
  const BoundModel m = bind_model(tape, params);
  NetworkState s = init_state(tape, graph, params.config.dim, seeds);
  for (int t = 0; t < iterations; ++t) s = message_pass_iteration(tape, m, graph, s);
  return decode_logits(tape, m, s).value();
}

}  // namespace

TEST_CASE("parameter counts at the reference size") {
  const ParamCount c = param_count(ModelConfig{});
  CHECK(c.embedding == 400 * 128);
  for (auto k : c.constraint_cells) CHECK(k == 328704);
  CHECK(c.variable_cell == 132096);
  CHECK(c.total == 1498112);
  const ModelParams p = small_model(20, 128, 1);
  CHECK(param_count(p).total == 1498112);
  std::size_t sum = 0;
  for (const auto* q : p.parameters()) sum += q->size();
  CHECK(sum == 1498112);
}

TEST_CASE("parameter names and order") {
  ModelParams p = small_model(4, 8, 1);
  const auto ps = p.parameters();
  REQUIRE(ps.size() == 21);
  CHECK(ps[0]->name == "W");
  CHECK(ps[1]->name == "U_M.w_ih");
  CHECK(ps[5]->name == "U_R.w_ih");
  CHECK(ps[20]->name == "U_X.b_hh");
  CHECK(ps[1]->value.cols() == 32);
  CHECK(ps[17]->value.cols() == 8);
}

TEST_CASE("random initialization scales") {
  const ModelParams p = small_model(20, 128, 3);
  const double var = p.W.value.array().square().mean();
  CHECK(var == doctest::Approx(1.0 / 128).epsilon(0.05));
  const double bound = 1.0 / std::sqrt(128.0);
  for (const auto& cell : p.constraint_cells) CHECK(cell.w_ih.value.cwiseAbs().maxCoeff() <= bound);
}

TEST_CASE("grid initialization is an isometric image of the lattice") {
  Rng rng(5);
  const Matrix W = grid_init(10, 16, rng);
  REQUIRE(W.rows() == 100);
  for (int a = 0; a < 100; a += 7) {
    for (int b = 0; b < 100; b += 11) {
      const double dx = a % 10 - b % 10, dy = a / 10 - b / 10;
      CHECK((W.row(a) - W.row(b)).norm() == doctest::Approx(std::hypot(dx, dy)));
    }
  }
  const nn::PcaResult r = nn::pca(W, 2);
  CHECK(r.explained_ratio[0] + r.explained_ratio[1] == doctest::Approx(1.0));
  CHECK(r.explained_ratio[0] == doctest::Approx(0.5));
  Rng other(6);
  CHECK(!grid_init(10, 16, other).isApprox(W));
}

TEST_CASE("initial state reads the known embeddings of the worked example") {
  const Problem p = testing::worked_example();
  ModelParams params = small_model(20, 128, 2);
  const BipartiteGraph g = build_graph(p);
  CHECK(g.unknown_count() == 5);
  CHECK(g.targets == std::vector<int>{61, 40, 21, 2, 23});
  CHECK(g.blocks[3].size() == 1);
  CHECK(g.blocks[2].size() == 2);
  nn::Tape tape;
  const BoundModel m = bind_model(tape, params);
  const std::uint64_t seed = 9;
  const NetworkState s = init_state(tape, g, 128, std::span(&seed, 1));
  CHECK(s.vars.h.rows() == 5);
  CHECK(s.vars.h.value().minCoeff() >= 0.0);
  CHECK(s.vars.h.value().maxCoeff() <= 1.0);
  CHECK(s.vars.c.value().isZero(0.0));

  const Matrix msg = constraint_messages(tape, m, g, s, ConstraintKind::Translation).value();
  REQUIRE(msg.cols() == 512);
  CHECK(msg.block(0, 0, 1, 128) == params.W.value.row(45));
  CHECK(msg.block(0, 128, 1, 128) == params.W.value.row(42));
  CHECK(msg.block(0, 256, 1, 128) == params.W.value.row(64));
  CHECK(msg.block(0, 384, 1, 128) == s.vars.h.value().row(0));

  // S(B, D, E, F): slot 2 is the unknown D (row 0), slots 3 and 4 are E and F.
  const Matrix sq = constraint_messages(tape, m, g, s, ConstraintKind::Square).value();
  CHECK(sq.block(0, 0, 1, 128) == params.W.value.row(42));
  CHECK(sq.block(0, 128, 1, 128) == s.vars.h.value().row(0));
  CHECK(sq.block(0, 256, 1, 128) == s.vars.h.value().row(1));
  CHECK(sq.block(0, 384, 1, 128) == s.vars.h.value().row(2));
}

TEST_CASE("midpoint messages end in a zero slot") {
  Problem p;
  p.grid_side = 6;
  p.variables = {"A", "B", "C"};
  p.constraints = {{ConstraintKind::Midpoint, {0, 1, 2}}};
  p.fixed = Assignment(3);
  p.fixed.set(0, {0, 0});
  p.fixed.set(1, {4, 2});
  p.labels = Assignment(3);
  p.labels.set(2, {2, 1});
  ModelParams params = small_model(6, 8, 2);
  const BipartiteGraph g = build_graph(p);
  nn::Tape tape;
  const BoundModel m = bind_model(tape, params);
  const std::uint64_t seed = 1;
  const NetworkState s = init_state(tape, g, 8, std::span(&seed, 1));
  const Matrix msg = constraint_messages(tape, m, g, s, ConstraintKind::Midpoint).value();
  CHECK(msg.cols() == 32);
  CHECK(msg.block(0, 24, 1, 8).isZero(0.0));
}

TEST_CASE("variable update sums the new states of incident constraints") {
  const Problem p = testing::worked_example();
  ModelParams params = small_model(20, 16, 4);
  const BipartiteGraph g = build_graph(p);
  nn::Tape tape;
  const BoundModel m = bind_model(tape, params);
  const std::uint64_t seed = 3;
  const NetworkState s0 = init_state(tape, g, 16, std::span(&seed, 1));
  const NetworkState s1 = message_pass_iteration(tape, m, g, s0);
  // D (row 0) touches T and the first square; F (row 2) touches both squares.
  const Matrix& tr = s1.constraints[3].h.value();
  const Matrix& sq = s1.constraints[2].h.value();
  const Matrix xd = tr.row(0) + sq.row(0);
  const Matrix xf = sq.row(0) + sq.row(1);
  const auto [hd, cd] = nn::lstm_cell(xd, s0.vars.h.value().row(0), s0.vars.c.value().row(0), params.variable_cell);
  const auto [hf, cf] = nn::lstm_cell(xf, s0.vars.h.value().row(2), s0.vars.c.value().row(2), params.variable_cell);
  CHECK((s1.vars.h.value().row(0) - hd).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((s1.vars.h.value().row(2) - hf).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(s1.iteration == 1);
}

TEST_CASE("batching does not change per-problem results") {
  const auto data = small_dataset(6, 12);
  const ModelParams params = small_model(6, 16, 7);
  std::vector<const Problem*> all;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < data.size(); ++i) {
    all.push_back(&data[i]);
    seeds.push_back(100 + i);
  }
  const Matrix joint = final_states(params, all, seeds, 4);
  int row = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Problem* one = &data[i];
    const Matrix alone = final_states(params, std::span(&one, 1), std::span(&seeds[i], 1), 4);
    CHECK((joint.middleRows(row, alone.rows()) - alone).cwiseAbs().maxCoeff() < 1e-12);
    row += static_cast<int>(alone.rows());
  }
  CHECK(row == joint.rows());
}

TEST_CASE("incidence is recorded once per constraint") {
  Problem p = testing::worked_example();
  const BipartiteGraph g = build_graph(p);
  // D: T and the first square; E: first square; F: both squares.
  CHECK(g.incidence_offset == std::vector<int>{0, 2, 3, 5, 6, 7});
  CHECK(g.constraint_rows[0].size() == 3);
  CHECK(g.constraint_rows[0][0].source == 3);
  CHECK(g.constraint_rows[0][2].source == 2);
  CHECK(g.constraint_rows[0][2].row == 1);
}

TEST_CASE("decoding picks the nearest embedding row") {
  Matrix logits(2, 4);
  logits << 0.1, 0.5, 0.2, -1.0, 3.0, 3.0, 1.0, 0.0;
  CHECK(argmax_rows(logits) == std::vector<int>{1, 0});
  ModelParams params = small_model(4, 8, 1);
  nn::Tape tape;
  const BoundModel m = bind_model(tape, params);
  NetworkState s;
  s.vars.h = tape.constant(params.W.value.middleRows(5, 3));
  const Matrix l = decode_logits(tape, m, s).value();
  CHECK(l.rows() == 3);
  CHECK(l.cols() == 16);
  CHECK(std::abs(l(1, 6) - params.W.value.row(6).squaredNorm()) < 1e-14);
}

TEST_CASE("rnn models run") {
  const auto data = small_dataset(2, 3);
  const ModelParams params = small_model(6, 8, 1, InitMode::Grid, nn::CellKind::Rnn);
  CHECK(param_count(params).variable_cell == 8 * 8 * 2 + 16);
  std::vector<const Problem*> ptrs{&data[0], &data[1]};
  const std::vector<std::uint64_t> seeds{1, 2};
  const Matrix l = final_states(params, ptrs, seeds, 3);
  CHECK(l.allFinite());
}

TEST_CASE("graph construction rejects mismatched grids") {
  auto data = small_dataset(2, 5);
  data[1].grid_side = 7;
  std::vector<const Problem*> ptrs{&data[0], &data[1]};
  CHECK_THROWS_AS(build_graph(ptrs), Error);
}
