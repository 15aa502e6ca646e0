// Acceptance checks 1-12. Prints one PASS/FAIL line per check; exits nonzero
// if any fails. Checks 6-10 and 12 use cached desk runs (trained on demand).
#include <chrono>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "desk.hpp"
#include "geocsp/analysis.hpp"
#include "geocsp/error.hpp"
#include "geocsp/nn/optim.hpp"
#include "geocsp/solver.hpp"
#include "support.hpp"

using namespace geocsp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  Json values = Json::object();
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

std::string pct(double v) { return fmt(100.0 * v, 4) + "%"; }

struct Options {
  bool allow_training = true;
  std::size_t hard_count = 2000;
  std::size_t probe_problems = 400;
  /// Tiny stand-ins for the desk runs; exercises the harness only.
  bool quick = false;
};

desk::RunSpec scaled(desk::RunSpec s, const Options& opt) {
  if (!opt.quick) return s;
  s.name += "_quick";
  s.count = 600;
  s.train.epochs = 2;
  s.train.dim = 16;
  return s;
}

// Shared state for the checks on the main desk model.
struct Context {
  Options opt;
  std::optional<desk::RunResult> grid;
  std::optional<std::vector<Problem>> hard;

  desk::RunResult& main_run() {
    if (!grid) grid = desk::ensure(scaled(desk::st10_grid(), opt), opt.allow_training);
    return *grid;
  }
  const std::vector<Problem>& hard_split() {
    if (!hard) hard = generate_dataset(desk::st10_hard(), opt.hard_count).problems;
    return *hard;
  }
  std::vector<Problem> validation() {
    auto& r = main_run();
    const auto [tr, va] =
        split_indices(r.dataset.size(), r.spec.train.validation_fraction, derive_seed(r.spec.train.seed, 1));
    std::vector<Problem> out;
    for (auto i : va) out.push_back(r.dataset[i]);
    return out;
  }
  std::uint64_t eval_seed() { return derive_seed(main_run().spec.train.seed, 3); }
};

InferenceConfig infer(int iterations, int resamples, std::uint64_t seed) {
  InferenceConfig c;
  c.iterations = iterations;
  c.resamples = resamples;
  c.seed = seed;
  return c;
}

Outcome parameter_accounting(Context&) {
  const ParamCount c = param_count(ModelConfig{20, 128, nn::CellKind::Lstm});
  Rng rng(0);
  const ParamCount built = param_count(make_model(ModelConfig{20, 128, nn::CellKind::Lstm}, InitMode::Random, rng));
  bool ok = c.total == 1498112 && c.embedding == 51200 && c.variable_cell == 132096 && built.total == c.total;
  for (auto k : c.constraint_cells) ok = ok && k == 328704;
  Outcome o{ok, "total " + std::to_string(c.total) + ", U_c " + std::to_string(c.constraint_cells[0]) + ", U_X " +
                    std::to_string(c.variable_cell) + ", W " + std::to_string(c.embedding)};
  o.values = {{"total", c.total}, {"constraint_cell", c.constraint_cells[0]}, {"variable_cell", c.variable_cell},
              {"embedding", c.embedding}};
  return o;
}

Outcome resolution_oracle(Context&) {
  std::size_t cases = 0, mismatches = 0, none = 0;
  for (int n = 1; n <= 7; ++n) {
    testing::for_each_determined_placement(n, [&](ConstraintKind kind, unsigned mask, const std::array<GridPoint, 4>& s) {
      const auto brute = testing::brute_force(kind, s, mask, n);
      const auto fast = testing::resolved_on_grid(kind, s, mask, n);
      ++cases;
      if (!fast) ++none;
      const bool agree = fast ? (brute.size() == 1 && brute.front() == *fast) : brute.empty();
      if (!agree) ++mismatches;
    });
  }
  Outcome o{mismatches == 0, std::to_string(cases) + " placements on n<=7, " + std::to_string(none) +
                                 " without a grid solution, " + std::to_string(mismatches) + " mismatches"};
  o.values = {{"cases", cases}, {"mismatches", mismatches}};
  return o;
}

Outcome worked_example(Context&) {
  const Problem p = testing::worked_example(false);
  const Solution s = solve(p);
  const GridPoint expect[] = {{1, 3}, {0, 2}, {1, 1}, {2, 0}, {3, 1}};
  bool ok = true;
  std::string got;
  for (int i = 0; i < 5; ++i) {
    const GridPoint g = s.assignment.at(3 + i);
    ok = ok && g == expect[i];
    got += (i ? " " : "") + p.variables[3 + i] + "=[" + std::to_string(g.x) + "," + std::to_string(g.y) + "]";
  }
  return {ok, got};
}

Outcome generator_statistics(Context&) {
  GeneratorConfig g = GeneratorConfig::training();
  g.seed = 12345;
  const Dataset ds = generate_dataset(g, 10000);
  std::size_t invalid = 0;
  for (const Problem& p : ds.problems) {
    try {
      p.validate(true);
      if (!(solve(p).assignment == p.full_assignment())) ++invalid;
    } catch (const Error&) {
      ++invalid;
    }
  }
  const auto f = ds.stats.kind_fractions();
  const double target[4] = {0.267, 0.129, 0.417, 0.188};  // indexed by ConstraintKind
  bool freq_ok = true;
  std::string freq;
  for (ConstraintKind k : kAllKinds) {
    const int i = static_cast<int>(k);
    freq_ok = freq_ok && std::abs(f[i] - target[i]) <= 0.02;
    freq += std::string(1, kind_letter(k)) + " " + pct(f[i]) + " ";
  }
  const double mc = ds.stats.mean_constraints(), md = ds.stats.mean_depth();
  const bool ok = invalid == 0 && ds.problems.size() == 10000 && freq_ok && std::abs(mc - 4.0) <= 0.5 &&
                  std::abs(md - 2.9) <= 0.5;
  Outcome o{ok, std::to_string(ds.problems.size()) + " problems, " + std::to_string(invalid) + " invalid; " + freq +
                    "; mean constraints " + fmt(mc) + ", mean depth " + fmt(md)};
  o.values = {{"invalid", invalid}, {"kind_fractions", f}, {"mean_constraints", mc}, {"mean_depth", md}};
  return o;
}

// Two problems on a 4x4 grid covering all four kinds.
std::vector<Problem> fd_problems() {
  Problem p;
  p.grid_side = 4;
  for (int i = 0; i < 7; ++i) p.variables.push_back(variable_name(i));
  p.constraints = {{ConstraintKind::Square, {0, 1, 2, 3}},
                   {ConstraintKind::Midpoint, {0, 4, 1}},
                   {ConstraintKind::Reflection, {0, 2, 1, 5}},
                   {ConstraintKind::Translation, {0, 4, 3, 6}}};
  p.fixed = Assignment(7);
  p.fixed.set(0, {0, 0});
  p.fixed.set(1, {2, 0});
  p.labels = Assignment(7);
  const Solution s = solve(p);
  for (VarId v : p.unknowns()) p.labels.set(v, s.assignment.at(v));
  p.validate(true);

  Problem q;
  q.grid_side = 4;
  for (int i = 0; i < 6; ++i) q.variables.push_back(variable_name(i));
  q.constraints = {{ConstraintKind::Square, {0, 1, 2, 3}}, {ConstraintKind::Translation, {0, 1, 3, 4}},
                   {ConstraintKind::Midpoint, {0, 3, 5}}};
  q.fixed = Assignment(6);
  q.fixed.set(0, {0, 0});
  q.fixed.set(1, {1, 0});
  q.labels = Assignment(6);
  const Solution t = solve(q);
  for (VarId v : q.unknowns()) q.labels.set(v, t.assignment.at(v));
  q.validate(true);
  return {p, q};
}

Outcome gradient_check(Context&) {
  const auto problems = fd_problems();
  std::vector<const Problem*> batch;
  for (const auto& p : problems) batch.push_back(&p);
  const std::vector<std::uint64_t> seeds = {11, 12};
  Rng init(5);
  ModelParams params = make_model(ModelConfig{4, 8, nn::CellKind::Lstm}, InitMode::Random, init);
  const Rng dropout_rng(77);
  const double dropout = 0.1;
  auto loss = [&](bool backward) {
    Rng r = dropout_rng;
    return batch_loss(params, batch, 3, seeds, dropout, &r, backward);
  };
  nn::zero_grads(params.parameters());
  loss(true);
  const double h = 1e-5, floor = 1e-4;
  double worst = 0.0, worst_abs = 0.0;
  std::size_t checked = 0;
  for (nn::Parameter* prm : params.parameters()) {
    for (Eigen::Index i = 0; i < prm->value.size(); ++i) {
      double& x = prm->value.data()[i];
      const double x0 = x;
      x = x0 + h;
      const double up = loss(false);
      x = x0 - h;
      const double down = loss(false);
      x = x0;
      const double fd = (up - down) / (2 * h);
      const double an = prm->grad.data()[i];
      const double err = std::abs(fd - an);
      worst_abs = std::max(worst_abs, err);
      worst = std::max(worst, err / std::max({std::abs(fd), std::abs(an), floor}));
      ++checked;
    }
  }
  Outcome o{worst < 1e-5, std::to_string(checked) + " parameters (n=4, d=8, 3 iterations, dropout on), max relative " +
                              "error " + fmt(worst, 3) + ", max absolute error " + fmt(worst_abs, 3)};
  o.values = {{"max_relative_error", worst}, {"max_absolute_error", worst_abs}, {"parameters", checked}};
  return o;
}

Outcome desk_training(Context& ctx) {
  auto& r = ctx.main_run();
  const auto val = ctx.validation();
  const EvalReport e = evaluate(r.best_ema, val, infer(15, 1, ctx.eval_seed()));
  const bool ok = e.point_accuracy >= 0.9;
  Outcome o{ok, "10x10 S+T, " + std::to_string(r.dataset.size()) + " problems, " +
                    std::to_string(r.report.epochs.size()) + " epochs (best " + std::to_string(r.report.best_epoch) +
                    "): validation point accuracy " + pct(e.point_accuracy) + ", complete " +
                    pct(e.complete_accuracy) + " on " + std::to_string(val.size())};
  o.values = {{"val_point_accuracy", e.point_accuracy}, {"val_complete_accuracy", e.complete_accuracy},
              {"epochs", r.report.epochs.size()}, {"best_epoch", r.report.best_epoch},
              {"train_report", desk::report_to_json(r.report)}};
  return o;
}

Outcome iteration_scaling(Context& ctx) {
  auto& r = ctx.main_run();
  const auto& hard = ctx.hard_split();
  const EvalReport a = evaluate(r.best_ema, hard, infer(15, 1, ctx.eval_seed()));
  const EvalReport b = evaluate(r.best_ema, hard, infer(23, 1, ctx.eval_seed()));
  Outcome o{b.complete_accuracy >= a.complete_accuracy,
            "harder split (" + std::to_string(hard.size()) + " problems, 8-26 constraints): complete " +
                pct(a.complete_accuracy) + " at 15 iterations, " + pct(b.complete_accuracy) + " at 23; point " +
                pct(a.point_accuracy) + " -> " + pct(b.point_accuracy)};
  o.values = {{"complete_15", a.complete_accuracy}, {"complete_23", b.complete_accuracy},
              {"point_15", a.point_accuracy}, {"point_23", b.point_accuracy}};
  return o;
}

Outcome resampling(Context& ctx) {
  auto& r = ctx.main_run();
  const auto& hard = ctx.hard_split();
  const EvalReport one = evaluate(r.best_ema, hard, infer(15, 1, ctx.eval_seed()));
  const EvalReport ten = evaluate(r.best_ema, hard, infer(15, 10, ctx.eval_seed()));
  const EvalReport fixed23 = evaluate(r.best_ema, hard, infer(23, 1, ctx.eval_seed()));
  std::vector<Prediction> oracle_preds;
  for (auto& res : best_iteration_oracle(hard, r.best_ema, ctx.eval_seed())) oracle_preds.push_back(res.prediction);
  const EvalReport oracle = score(hard, std::move(oracle_preds));
  const bool ok = ten.complete_accuracy >= one.complete_accuracy &&
                  oracle.correct_points >= fixed23.correct_points && oracle.complete >= fixed23.complete;
  Outcome o{ok, "complete at 15 iterations: 1 resample " + pct(one.complete_accuracy) + ", 10 resamples " +
                    pct(ten.complete_accuracy) + "; best-iteration oracle " + pct(oracle.complete_accuracy) +
                    " (point " + pct(oracle.point_accuracy) + ") vs fixed 23 " + pct(fixed23.complete_accuracy) +
                    " (point " + pct(fixed23.point_accuracy) + ")"};
  o.values = {{"complete_1", one.complete_accuracy}, {"complete_10", ten.complete_accuracy},
              {"oracle_complete", oracle.complete_accuracy}, {"oracle_point", oracle.point_accuracy},
              {"fixed23_complete", fixed23.complete_accuracy}, {"fixed23_point", fixed23.point_accuracy}};
  return o;
}

std::string epochs_text(const TrainReport& r) {
  return r.epochs_to_90 ? std::to_string(*r.epochs_to_90) : ">" + std::to_string(r.epochs.size());
}

Outcome grid_init(Context& ctx) {
  const auto& g = ctx.main_run();
  const auto r = desk::ensure(scaled(desk::st10_random(), ctx.opt), ctx.opt.allow_training);
  const auto& a = g.report;
  const auto& b = r.report;
  const bool ok = a.epochs_to_90 && (!b.epochs_to_90 || *a.epochs_to_90 < *b.epochs_to_90);
  Outcome o{ok, "epochs to 90% validation point accuracy on identical data and seeds: grid " + epochs_text(a) +
                    ", random " + epochs_text(b) + " (best random " + pct(b.best_val_point_accuracy) + ")"};
  o.values = {{"grid", a.epochs_to_90 ? Json(*a.epochs_to_90) : Json(nullptr)},
              {"random", b.epochs_to_90 ? Json(*b.epochs_to_90) : Json(nullptr)},
              {"random_epochs_run", b.epochs.size()},
              {"grid_report", desk::report_to_json(a)},
              {"random_report", desk::report_to_json(b)}};
  return o;
}

// Pooled success over depth bands [1,2], [3,4], ...; bands with fewer than
// `min_points` points are dropped. Returns the band rates in depth order.
std::vector<std::pair<int, double>> depth_bands(const std::vector<analysis::Bucket>& by_depth, std::size_t min_points) {
  std::vector<std::pair<int, double>> out;
  const int max_key = by_depth.empty() ? 0 : by_depth.back().key;
  for (int lo = 1; lo <= max_key; lo += 2) {
    std::size_t total = 0;
    for (const auto& b : by_depth) {
      if (b.key >= lo && b.key <= lo + 1) total += b.total;
    }
    if (total >= min_points) out.emplace_back(lo, analysis::pooled_rate(by_depth, lo, lo + 1));
  }
  return out;
}

Outcome embedding_geometry(Context& ctx) {
  auto& r = ctx.main_run();
  const ModelParams& m = r.best_ema;
  const int n = m.config.grid_side;
  const auto probe = analysis::coord_probe(m.W.value, n, 5, 0);
  const double r2 = std::min(probe.cv_r2[0], probe.cv_r2[1]);

  const auto& hard = ctx.hard_split();
  const EvalReport e = evaluate(m, hard, infer(15, 1, ctx.eval_seed()));
  const auto fb = analysis::failure_analysis(hard, e.predictions);
  const auto bands = depth_bands(fb.by_depth, 50);
  bool monotone = bands.size() >= 2;
  std::string band_text;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (i && bands[i].second > bands[i - 1].second) monotone = false;
    band_text += (i ? ", " : "") + std::to_string(bands[i].first) + "-" + std::to_string(bands[i].first + 1) + ": " +
                 pct(bands[i].second);
  }
  const auto hist = analysis::manhattan_histogram(analysis::misclassification_distances(hard, e.predictions));
  const bool mode_ok = hist.mode && *hist.mode <= 2;

  auto val = ctx.validation();
  if (val.size() > ctx.opt.probe_problems) val.resize(ctx.opt.probe_problems);
  const auto states = analysis::collect_constraint_states(val, m, 15, ctx.eval_seed());
  analysis::ProbeConfig pc;
  pc.seed = 1;
  const auto kind = analysis::train_probe(states, analysis::ProbeTarget::Kind, pc).report;

  const bool ok = r2 >= 0.9 && monotone && mode_ok && kind.accuracy >= 0.9;
  Outcome o{ok, "coordinate probe cross-validated R2 x " + fmt(probe.cv_r2[0]) + " y " + fmt(probe.cv_r2[1]) +
                    " (in-sample " + fmt(probe.r2[0]) + ", " + fmt(probe.r2[1]) + "); point success by depth " +
                    band_text + (monotone ? " (non-increasing)" : " (NOT non-increasing)") +
                    "; Manhattan error mode " + (hist.mode ? std::to_string(*hist.mode) : "none") + " over " +
                    std::to_string(hist.total) + " errors; kind probe accuracy " + pct(kind.accuracy) + " on " +
                    std::to_string(kind.test_size) + " held-out states"};
  Json jb = Json::array();
  for (auto [lo, rate] : bands) jb.push_back({{"depth_from", lo}, {"depth_to", lo + 1}, {"success", rate}});
  o.values = {{"coord_cv_r2", probe.cv_r2}, {"coord_r2", probe.r2}, {"depth_bands", jb},
              {"manhattan_mode", hist.mode ? Json(*hist.mode) : Json(nullptr)}, {"manhattan_counts", hist.counts},
              {"kind_probe_accuracy", kind.accuracy}, {"kind_probe_balanced_accuracy", kind.balanced_accuracy}};
  return o;
}

Outcome determinism(Context&) {
  std::vector<std::string> failures;
  // generate: same seed, different worker counts
  GeneratorConfig g = GeneratorConfig::training();
  g.seed = 99;
  const auto d1 = generate_dataset(g, 300, 1);
  const auto d2 = generate_dataset(g, 300, 3);
  std::ostringstream s1, s2;
  write_dataset(s1, d1.problems);
  write_dataset(s2, d2.problems);
  if (s1.str() != s2.str()) failures.push_back("generate");
  std::istringstream in(s1.str());
  const auto back = read_dataset(in, true);
  std::ostringstream s3;
  write_dataset(s3, back);
  if (s3.str() != s1.str()) failures.push_back("jsonl round trip");

  // train: two seeded runs give identical checkpoints
  GeneratorConfig small = GeneratorConfig::square_translation(5);
  small.seed = 3;
  small.max_constraints = 3;
  const auto data = generate_dataset(small, 120).problems;
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 8;
  t.dim = 16;
  t.eval_iterations = 5;
  t.seed = 8;
  Checkpoint c1, c2;
  c1.params = train(data, t).best_ema;
  c2.params = train(data, t).best_ema;
  const std::string b1 = checkpoint_bytes(c1);
  if (b1 != checkpoint_bytes(c2)) failures.push_back("train");

  // checkpoint round trip through bytes and a file
  if (checkpoint_bytes(checkpoint_from_bytes(b1)) != b1) failures.push_back("checkpoint bytes");
  const auto path = (desk::cache_dir() / "acceptance_roundtrip.ckpt").string();
  std::filesystem::create_directories(desk::cache_dir());
  save_checkpoint(path, c1);
  const std::string f1 = read_file(path);
  save_checkpoint(path, load_checkpoint(path));
  if (read_file(path) != f1 || f1 != b1) failures.push_back("checkpoint file");
  std::filesystem::remove(path);

  // eval: repeated and re-batched runs agree
  InferenceConfig ic = infer(6, 3, 17);
  const EvalReport e1 = evaluate(c1.params, data, ic);
  ic.batch_size = 7;
  const EvalReport e2 = evaluate(c1.params, data, ic);
  bool same = e1.correct_points == e2.correct_points;
  for (std::size_t i = 0; same && i < e1.predictions.size(); ++i) {
    same = e1.predictions[i].assignment == e2.predictions[i].assignment &&
           e1.predictions[i].resample == e2.predictions[i].resample;
  }
  if (!same) failures.push_back("eval");

  // solver log round trip
  std::size_t logs = 0;
  for (const Problem& p : d1.problems) {
    const ParsedSolverLog log = parse_solver_log(emit_solver_log(p));
    bool ok = log.constraints == p.constraints && log.variable_count == p.variables.size();
    std::set<VarId> fixed;
    for (auto [v, idx] : log.fixed) {
      ok = ok && p.fixed.has(v) && point_to_index(p.fixed.at(v), p.grid_side) == idx;
      fixed.insert(v);
    }
    ok = ok && fixed.size() == p.knowns().size();
    std::size_t implied = 0;
    for (const auto& st : log.steps) {
      for (auto [v, idx] : st.implied) {
        ok = ok && p.labels.has(v) && point_to_index(p.labels.at(v), p.grid_side) == idx;
        ++implied;
      }
    }
    ok = ok && implied == p.unknowns().size();
    if (!ok) {
      failures.push_back("solver log");
      break;
    }
    ++logs;
  }
  std::string detail = "generate (1 vs 3 workers), JSONL, train, checkpoint bytes and file, eval (re-batched), " +
                       std::to_string(logs) + " solver logs: ";
  if (failures.empty()) {
    detail += "all identical";
  } else {
    for (const auto& f : failures) detail += f + " differs; ";
  }
  Outcome o{failures.empty(), detail};
  o.values = {{"failures", failures}};
  return o;
}

Outcome rnn_ablation(Context& ctx) {
  const auto r = desk::ensure(scaled(desk::st10_rnn(), ctx.opt), ctx.opt.allow_training);
  const auto& rep = r.report;
  const bool ok = rep.epochs.size() == static_cast<std::size_t>(r.spec.train.epochs) &&
                  std::isfinite(rep.epochs.back().val_point_accuracy);
  Outcome o{ok, "cell=rnn completed " + std::to_string(rep.epochs.size()) + " epochs; final validation point accuracy " +
                    pct(rep.epochs.back().val_point_accuracy) + ", complete " +
                    pct(rep.epochs.back().val_complete_accuracy) + ", best " + pct(rep.best_val_point_accuracy)};
  o.values = {{"final_val_point_accuracy", rep.epochs.back().val_point_accuracy},
              {"best_val_point_accuracy", rep.best_val_point_accuracy}, {"epochs", rep.epochs.size()}};
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  Options opt;
  bool no_train = false;
  std::vector<int> only;
  std::string summary;
  app.add_flag("--no-train", no_train, "Fail desk checks whose runs are not cached instead of training them");
  app.add_option("--only", only, "Run only these checks")->delimiter(',');
  app.add_option("--hard-count", opt.hard_count, "Problems in the harder evaluation split");
  app.add_flag("--quick", opt.quick, "Use tiny stand-in desk runs (checks the harness, not the model)");
  app.add_option("--summary", summary, "Write a JSON summary here (default: desk cache)");
  CLI11_PARSE(app, argc, argv);
  opt.allow_training = !no_train;
  if (opt.quick) {
    opt.hard_count = 100;
    opt.probe_problems = 50;
  }

  Context ctx;
  ctx.opt = opt;
  struct Check {
    const char* name;
    Outcome (*run)(Context&);
  };
  const std::vector<Check> checks = {
      {"parameter accounting", parameter_accounting},
      {"resolution oracle equivalence", resolution_oracle},
      {"worked example", worked_example},
      {"generator validity and statistics", generator_statistics},
      {"gradient correctness", gradient_check},
      {"desk-scale training", desk_training},
      {"test-time iteration scaling", iteration_scaling},
      {"resampling benefit and oracle dominance", resampling},
      {"grid-init acceleration", grid_init},
      {"embedding geometry", embedding_geometry},
      {"determinism and formats", determinism},
      {"rnn ablation", rnn_ablation},
  };

  Json out = Json::array();
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = checks[i].run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << checks[i].name << ": " << o.detail << " ["
              << fmt(secs, 3) << " s]" << std::endl;
    out.push_back({{"id", id}, {"name", checks[i].name}, {"pass", o.pass}, {"detail", o.detail},
                   {"seconds", secs}, {"values", o.values}});
  }
  try {
    const std::string path = summary.empty() ? (desk::cache_dir() / "acceptance_summary.json").string() : summary;
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    write_file(path, out.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "could not write summary: " << e.what() << "\n";
  }
  std::cout << (failed ? std::to_string(failed) + " check(s) failed" : "all checks passed") << std::endl;
  return failed ? 1 : 0;
}
