#include "doctest.h"
#include "geocsp/error.hpp"
#include "geocsp/generator.hpp"
#include "geocsp/solver.hpp"

using namespace geocsp;

namespace {

void check_valid(const Problem& p, const GeneratorConfig& cfg) {
  REQUIRE_NOTHROW(p.validate(true));
  CHECK(p.grid_side == cfg.grid_side);
  CHECK(static_cast<int>(p.constraints.size()) >= cfg.min_constraints);
  CHECK(static_cast<int>(p.constraints.size()) <= cfg.max_constraints);
  for (const Constraint& c : p.constraints) {
    CHECK(std::find(cfg.allowed_kinds.begin(), cfg.allowed_kinds.end(), c.kind) != cfg.allowed_kinds.end());
  }
  // The solver reaches every variable from the fixed points alone, so the
  // solution is unique, and it agrees with the labels.
  const Solution s = solve(p);
  for (VarId v : p.unknowns()) {
    CHECK(s.assignment.at(v) == p.labels.at(v));
    CHECK(on_grid(s.assignment.at(v), p.grid_side));
  }
}

}  // namespace

TEST_CASE("generated problems are valid for every preset") {
  for (GeneratorConfig cfg : {GeneratorConfig::training(), GeneratorConfig::test(), GeneratorConfig::square_translation(10)}) {
    cfg.seed = 42;
    const Dataset ds = generate_dataset(cfg, 300);
    CHECK(ds.problems.size() == 300);
    for (const Problem& p : ds.problems) check_valid(p, cfg);
  }
}

TEST_CASE("generation is deterministic and independent of worker count") {
  GeneratorConfig cfg = GeneratorConfig::training();
  cfg.seed = 9;
  const Dataset a = generate_dataset(cfg, 200, 1);
  const Dataset b = generate_dataset(cfg, 200, 3);
  REQUIRE(a.problems.size() == b.problems.size());
  for (std::size_t i = 0; i < a.problems.size(); ++i) {
    CHECK(a.problems[i].constraints == b.problems[i].constraints);
    CHECK(a.problems[i].fixed == b.problems[i].fixed);
    CHECK(a.problems[i].labels == b.problems[i].labels);
  }
  cfg.seed = 10;
  const Dataset c = generate_dataset(cfg, 200, 1);
  int same = 0;
  for (std::size_t i = 0; i < c.problems.size(); ++i) same += c.problems[i].constraints == a.problems[i].constraints;
  CHECK(same < 100);
}

TEST_CASE("single-kind configurations") {
  for (ConstraintKind k : kAllKinds) {
    GeneratorConfig cfg;
    cfg.grid_side = 12;
    cfg.allowed_kinds = {k};
    cfg.type_weights = {{k, 1.0}};
    cfg.min_constraints = 1;
    cfg.max_constraints = 5;
    cfg.seed = 3;
    Rng rng(5);
    for (int i = 0; i < 30; ++i) check_valid(generate_problem(cfg, rng), cfg);
  }
}

TEST_CASE("config validation") {
  GeneratorConfig cfg = GeneratorConfig::training();
  cfg.type_weights[ConstraintKind::Square] += 0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GeneratorConfig::square_translation(10);
  cfg.type_weights[ConstraintKind::Midpoint] = 0.1;
  cfg.type_weights[ConstraintKind::Square] = 0.4;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = GeneratorConfig::training();
  cfg.min_constraints = 5;
  cfg.max_constraints = 4;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("impossible budgets raise generation failures") {
  GeneratorConfig cfg = GeneratorConfig::training();
  cfg.grid_side = 2;
  cfg.min_constraints = 16;
  cfg.max_constraints = 16;
  cfg.max_attempts = 3;
  Rng rng(1);
  try {
    generate_problem(cfg, rng);
    FAIL("expected a generation failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GenerationFailure);
  }
}

TEST_CASE("dataset statistics") {
  GeneratorConfig cfg = GeneratorConfig::training();
  cfg.seed = 1;
  const Dataset ds = generate_dataset(cfg, 500);
  const DatasetStats again = compute_stats(ds.problems);
  CHECK(again.problems == 500);
  CHECK(again.mean_constraints() == doctest::Approx(ds.stats.mean_constraints()));
  double total = 0.0;
  for (double f : again.kind_fractions()) total += f;
  CHECK(total == doctest::Approx(1.0));
}
