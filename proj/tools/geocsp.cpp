#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "geocsp/analysis.hpp"
#include "geocsp/error.hpp"
#include "geocsp/generator.hpp"
#include "geocsp/io.hpp"
#include "geocsp/solver.hpp"

using namespace geocsp;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config with generator/train/inference sections");
  app->add_option("--set", c.sets, "Override a config field, e.g. train.epochs=5")->take_all();
  app->add_option("--seed", c.seed, "Seed for every randomized step");
}

Json load_config(const Common& c) {
  Json doc = c.config.empty() ? Json::object() : read_json_file(c.config);
  for (const std::string& s : c.sets) {
    const auto eq = s.find('=');
    const auto dot = s.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      fail(ErrorKind::Config, "--set expects section.key=value, got '" + s + "'");
    }
    const std::string section = s.substr(0, dot), key = s.substr(dot + 1, eq - dot - 1), text = s.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(text);
    } catch (const Json::exception&) {
      value = text;
    }
    doc[section][key] = value;
  }
  if (!doc.is_object()) fail(ErrorKind::Config, "config must be a JSON object");
  for (const auto& [name, value] : doc.items()) {
    if (name != "generator" && name != "train" && name != "inference") {
      fail(ErrorKind::Config, "unknown config section '" + name + "'");
    }
  }
  return doc;
}

Json section(const Json& doc, const char* name) { return doc.contains(name) ? doc.at(name) : Json::object(); }

void write_json(const std::string& path, const Json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    write_file(path, j.dump(2) + "\n");
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

/// A problem file holds one JSON record, or JSONL from which `index` is taken.
Problem load_problem(const std::string& path, std::size_t index) {
  const std::string text = read_file(path);
  try {
    const Json j = Json::parse(text);
    if (index != 0) fail(ErrorKind::Config, "--index needs a JSONL file");
    return problem_from_json(j);
  } catch (const Json::parse_error&) {
    std::istringstream in(text);
    const auto all = read_dataset(in);
    if (index >= all.size()) fail(ErrorKind::Range, "problem index out of range");
    return all[index];
  }
}

ModelParams load_model(const std::string& path) { return load_checkpoint(path).params; }

std::vector<Problem> select_split(std::vector<Problem> data, const std::string& split, const TrainConfig& train) {
  if (split == "all") return data;
  if (split != "train" && split != "validation") fail(ErrorKind::Config, "--split must be all, train or validation");
  const auto [tr, va] = split_indices(data.size(), train.validation_fraction, derive_seed(train.seed, 1));
  std::vector<Problem> out;
  for (std::size_t i : split == "train" ? tr : va) out.push_back(std::move(data[i]));
  return out;
}

Json report_json(const EvalReport& r) {
  return {{"problems", r.problems},
          {"points", r.points},
          {"correct_points", r.correct_points},
          {"complete", r.complete},
          {"point_accuracy", r.point_accuracy},
          {"complete_accuracy", r.complete_accuracy}};
}

Json assignment_json(const Problem& p, const Assignment& a) {
  Json out = Json::object();
  for (std::size_t v = 0; v < p.variables.size(); ++v) {
    if (a.has(static_cast<VarId>(v))) {
      const GridPoint g = a.at(static_cast<VarId>(v));
      out[p.variables[v]] = {g.x, g.y};
    }
  }
  return out;
}

Json train_report_json(const TrainReport& r) {
  Json j{{"best_epoch", r.best_epoch},
         {"best_val_point_accuracy", r.best_val_point_accuracy},
         {"train_size", r.train_size},
         {"validation_size", r.validation_size},
         {"epochs", r.epochs.size()}};
  j["epochs_to_90"] = r.epochs_to_90 ? Json(*r.epochs_to_90) : Json(nullptr);
  if (!r.epochs.empty()) {
    j["final_val_point_accuracy"] = r.epochs.back().val_point_accuracy;
    j["final_val_complete_accuracy"] = r.epochs.back().val_complete_accuracy;
  }
  return j;
}

int fail_json(std::string_view kind, const std::string& message, int code) {
  std::cerr << Json{{"error", message}, {"kind", kind}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometric constraint problems: generation, exact solving, neural training and analysis"};
  app.require_subcommand(1);

  // generate
  Common gen_c;
  std::size_t gen_count = 1000;
  std::string gen_out, gen_stats, gen_preset;
  bool gen_verify = false;
  unsigned gen_workers = 1;
  auto* gen = app.add_subcommand("generate", "Sample a dataset of solvable problems");
  add_common(gen, gen_c);
  gen->add_option("--count", gen_count, "Number of problems")->required();
  gen->add_option("--out", gen_out, "Output JSONL path")->required();
  gen->add_option("--stats", gen_stats, "Stats JSON path (default: <out stem>.stats.json)");
  gen->add_option("--preset", gen_preset, "training, test or square_translation");
  gen->add_option("--workers", gen_workers, "Worker threads");
  gen->add_flag("--verify", gen_verify, "Re-read and re-solve the written file");

  // train
  Common tr_c;
  std::string tr_data, tr_out;
  auto* tr = app.add_subcommand("train", "Train the message-passing model");
  add_common(tr, tr_c);
  tr->add_option("--data", tr_data, "Training JSONL")->required();
  tr->add_option("--out", tr_out, "Output directory")->required();

  // eval
  Common ev_c;
  std::string ev_ckpt, ev_data, ev_out, ev_split = "all";
  std::optional<int> ev_iters, ev_resamples;
  bool ev_oracle = false;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  add_common(ev, ev_c);
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--data", ev_data, "Evaluation JSONL")->required();
  ev->add_option("--iters", ev_iters, "Message-passing iterations");
  ev->add_option("--resamples", ev_resamples, "Random restarts; the most satisfying run is kept");
  ev->add_option("--split", ev_split, "all, train or validation (split as in training)");
  ev->add_flag("--best-oracle", ev_oracle, "Also report the label-using best-iteration oracle and solve-time histograms");
  ev->add_option("--out", ev_out, "Report JSON path (default stdout)");

  // solve
  std::string so_problem, so_out;
  std::size_t so_index = 0;
  bool so_cot = false;
  auto* so = app.add_subcommand("solve", "Solve a problem exactly");
  so->add_option("--problem", so_problem, "Problem JSON or JSONL")->required();
  so->add_option("--index", so_index, "Record index in a JSONL file");
  so->add_flag("--cot", so_cot, "Emit the solver log instead of JSON");
  so->add_option("--out", so_out, "Output path (default stdout)");

  // trace
  Common tc_c;
  std::string tc_ckpt, tc_problem, tc_out, tc_states;
  std::size_t tc_index = 0;
  std::optional<int> tc_iters;
  auto* tc = app.add_subcommand("trace", "Record per-iteration predictions for one problem");
  add_common(tc, tc_c);
  tc->add_option("--ckpt", tc_ckpt, "Checkpoint")->required();
  tc->add_option("--problem", tc_problem, "Problem JSON or JSONL")->required();
  tc->add_option("--index", tc_index, "Record index in a JSONL file");
  tc->add_option("--iters", tc_iters, "Message-passing iterations");
  tc->add_option("--out", tc_out, "Trace JSONL path (default stdout)");
  tc->add_option("--states", tc_states, "Also export hidden states as CSV");

  // config
  Common cf_c;
  std::string cf_out;
  auto* cf = app.add_subcommand("config", "Print the effective config document (defaults plus overrides)");
  add_common(cf, cf_c);
  cf->add_option("--out", cf_out, "Output path (default stdout)");

  // analyze
  auto* an = app.add_subcommand("analyze", "Embedding and failure analyses");
  an->require_subcommand(1);
  Common an_c;
  std::string an_ckpt, an_data, an_out, an_problem, an_coords, an_target = "kind";
  std::size_t an_index = 0, an_count = 0;
  int an_k = 8, an_dims = 3, an_id_columns = 1, an_first = 1, an_epochs = 30;
  std::optional<int> an_iters, an_resamples;
  auto analysis_cmd = [&](const char* name, const char* help) {
    auto* c = an->add_subcommand(name, help);
    add_common(c, an_c);
    c->add_option("--ckpt", an_ckpt, "Checkpoint");
    c->add_option("--out", an_out, "Output path (default stdout)");
    return c;
  };
  auto* a_fail = analysis_cmd("failure", "Success by point depth and constraint count (CSV)");
  auto* a_man = analysis_cmd("manhattan", "Manhattan error histogram of wrong points (CSV)");
  for (auto* c : {a_fail, a_man}) {
    c->add_option("--data", an_data, "Evaluation JSONL")->required();
    c->add_option("--iters", an_iters, "Message-passing iterations");
    c->add_option("--resamples", an_resamples, "Random restarts");
  }
  auto* a_pca = analysis_cmd("pca", "PCA coordinates of W as CSV; with --out the spectrum is printed as JSON");
  a_pca->add_option("--dims", an_dims, "Output dimensions");
  auto* a_curv = analysis_cmd("curvature", "Local curvature of the 3D PCA projection of W, or of imported coordinates");
  a_curv->add_option("--k", an_k, "Neighbourhood size");
  a_curv->add_option("--coords", an_coords, "Imported 3D coordinates CSV");
  a_curv->add_option("--id-columns", an_id_columns, "Leading id columns in --coords");
  auto* a_2d = analysis_cmd("2dness", "Mean top-2 explained variance over 3x3 windows of W");
  auto* a_proj = analysis_cmd("projmetrics", "Geometric quality of projected point embeddings per iteration");
  a_proj->add_option("--problem", an_problem, "Problem JSON or JSONL")->required();
  a_proj->add_option("--index", an_index, "Record index in a JSONL file");
  a_proj->add_option("--iters", an_iters, "Message-passing iterations");
  a_proj->add_option("--coords", an_coords, "Imported 2D coordinates CSV (one row per variable) instead of a trace");
  a_proj->add_option("--id-columns", an_id_columns, "Leading id columns in --coords");
  auto* a_probe = analysis_cmd("probe", "MLP probe on constraint hidden states");
  a_probe->add_option("--data", an_data, "Problems to trace")->required();
  a_probe->add_option("--target", an_target, "kind, satisfied or iteration");
  a_probe->add_option("--iters", an_iters, "Iterations to trace");
  a_probe->add_option("--first-iter", an_first, "First iteration collected");
  a_probe->add_option("--count", an_count, "Use only the first N problems");
  a_probe->add_option("--epochs", an_epochs, "Probe training epochs");
  auto* a_coord = analysis_cmd("coordprobe", "Linear probe from W rows to grid coordinates");
  auto* a_exp = analysis_cmd("export", "Export W rows, or a problem's traced states, as CSV");
  a_exp->add_option("--problem", an_problem, "Export traced states of this problem instead of W");
  a_exp->add_option("--index", an_index, "Record index in a JSONL file");
  a_exp->add_option("--iters", an_iters, "Message-passing iterations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail_json("usage", e.what(), e.get_exit_code() ? e.get_exit_code() : 2);
  }

  try {
    if (*gen) {
      Json doc = load_config(gen_c);
      Json g = section(doc, "generator");
      if (!gen_preset.empty()) g["preset"] = gen_preset;
      if (gen_c.seed) g["seed"] = *gen_c.seed;
      const GeneratorConfig cfg = generator_config_from_json(g);
      const Dataset ds = generate_dataset(cfg, gen_count, std::max(1u, gen_workers));
      write_dataset(gen_out, ds.problems);
      if (gen_verify) read_dataset(gen_out, true);
      Json stats = stats_to_json(ds.stats);
      stats["generator"] = generator_config_to_json(cfg);
      if (gen_stats.empty()) gen_stats = fs::path(gen_out).replace_extension(".stats.json").string();
      write_json(gen_stats, stats);
      return 0;
    }

    if (*cf) {
      const Json doc = load_config(cf_c);
      Json g = section(doc, "generator"), t = section(doc, "train"), i = section(doc, "inference");
      if (cf_c.seed) g["seed"] = t["seed"] = i["seed"] = *cf_c.seed;
      Json gen_json = generator_config_to_json(generator_config_from_json(g));
      gen_json["preset"] = g.value("preset", "training");
      write_json(cf_out, {{"generator", gen_json},
                          {"train", train_config_to_json(train_config_from_json(t))},
                          {"inference", inference_config_to_json(inference_config_from_json(i))}});
      return 0;
    }

    if (*tr) {
      Json doc = load_config(tr_c);
      Json t = section(doc, "train");
      if (tr_c.seed) t["seed"] = *tr_c.seed;
      const TrainConfig cfg = train_config_from_json(t);
      const auto data = read_dataset(tr_data);
      fs::create_directories(tr_out);
      const fs::path dir(tr_out);
      std::ofstream metrics(dir / "metrics.csv");
      CsvWriter csv(metrics);
      csv.header({"epoch", "lr", "train_loss", "val_point_accuracy", "val_complete_accuracy", "seconds"});
      int epoch_seen = 0;
      const TrainState st = train(data, cfg, [&](const EpochRecord& e, const ModelParams& ema) {
        csv.cell(e.epoch).cell(e.lr).cell(e.train_loss).cell(e.val_point_accuracy).cell(e.val_complete_accuracy).cell(e.seconds);
        csv.end_row();
        metrics.flush();
        Checkpoint ck;
        ck.params = ema;
        ck.metadata = {{"epoch", e.epoch}, {"ema", true}, {"train", train_config_to_json(cfg)}};
        save_checkpoint((dir / "last.ckpt").string(), ck);
        epoch_seen = e.epoch;
        std::cerr << "epoch " << e.epoch << " loss " << e.train_loss << " val_point " << e.val_point_accuracy
                  << " val_complete " << e.val_complete_accuracy << '\n';
      });
      Checkpoint best;
      best.params = st.best_ema;
      best.metadata = {{"epoch", st.report.best_epoch}, {"ema", true}, {"train", train_config_to_json(cfg)}};
      save_checkpoint((dir / "best.ckpt").string(), best);
      Json rep = train_report_json(st.report);
      rep["last_epoch"] = epoch_seen;
      write_json((dir / "report.json").string(), rep);
      return 0;
    }

    if (*ev) {
      Json doc = load_config(ev_c);
      Json inf = section(doc, "inference");
      if (ev_iters) inf["iterations"] = *ev_iters;
      if (ev_resamples) inf["resamples"] = *ev_resamples;
      if (ev_c.seed) inf["seed"] = *ev_c.seed;
      const InferenceConfig cfg = inference_config_from_json(inf);
      const auto data = select_split(read_dataset(ev_data), ev_split, train_config_from_json(section(doc, "train")));
      const ModelParams params = load_model(ev_ckpt);
      Json out = report_json(evaluate(params, data, cfg));
      out["iterations"] = cfg.iterations;
      out["resamples"] = cfg.resamples;
      out["split"] = ev_split;
      if (ev_oracle) {
        const auto oracle = best_iteration_oracle(data, params, cfg.seed);
        std::vector<Prediction> preds;
        Json hist = Json::object();
        std::map<int, int> counts;
        for (const auto& o : oracle) {
          preds.push_back(o.prediction);
          ++counts[o.best_iteration];
        }
        for (const auto& [k, v] : counts) hist[std::to_string(k)] = v;
        out["best_oracle"] = report_json(score(data, preds));
        out["best_oracle"]["max_iterations"] = kOracleMaxIterations;
        out["best_oracle"]["best_iteration_counts"] = hist;
        const TimingHistograms t = timing_histograms(data, params, cfg.seed);
        auto nonzero = [](const std::vector<std::size_t>& c) {
          Json h = Json::object();
          for (std::size_t k = 1; k < c.size(); ++k) {
            if (c[k]) h[std::to_string(k)] = c[k];
          }
          return h;
        };
        out["timing"] = {{"solved", t.solved},
                         {"unsolved", t.unsolved},
                         {"first_solve_iteration", nonzero(t.first_solve)},
                         {"best_accuracy_iteration", nonzero(t.best_accuracy)}};
      }
      write_json(ev_out, out);
      return 0;
    }

    if (*so) {
      const Problem p = load_problem(so_problem, so_index);
      if (so_cot) {
        write_text(so_out, emit_solver_log(p));
        return 0;
      }
      const Solution s = solve(p);
      const auto depths = point_depths(p);
      Json d = Json::object();
      for (std::size_t v = 0; v < p.variables.size(); ++v) d[p.variables[v]] = depths[v];
      write_json(so_out, {{"assignment", assignment_json(p, s.assignment)}, {"depth", d}});
      return 0;
    }

    if (*tc) {
      Json doc = load_config(tc_c);
      Json inf = section(doc, "inference");
      if (tc_iters) inf["iterations"] = *tc_iters;
      if (tc_c.seed) inf["seed"] = *tc_c.seed;
      InferenceConfig cfg = inference_config_from_json(inf);
      cfg.trace = true;
      cfg.resamples = 1;
      const Problem p = load_problem(tc_problem, tc_index);
      const RunResult r = run(p, load_model(tc_ckpt), cfg);
      std::ostringstream os;
      write_trace_jsonl(os, p, *r.trace);
      write_text(tc_out, os.str());
      if (!tc_states.empty()) {
        std::ofstream f(tc_states);
        if (!f) fail(ErrorKind::Io, "cannot write " + tc_states);
        analysis::export_trace_embeddings(f, *r.trace);
      }
      return 0;
    }

    if (*an) {
      const Json doc = load_config(an_c);
      Json inf = section(doc, "inference");
      if (an_iters) inf["iterations"] = *an_iters;
      if (an_resamples) inf["resamples"] = *an_resamples;
      if (an_c.seed) inf["seed"] = *an_c.seed;
      const InferenceConfig icfg = inference_config_from_json(inf);
      const bool need_model = !(*a_curv && !an_coords.empty()) && !(*a_proj && !an_coords.empty());
      if (need_model && an_ckpt.empty()) fail(ErrorKind::Config, "--ckpt is required");
      ModelParams params;
      if (!an_ckpt.empty()) params = load_model(an_ckpt);
      const Matrix& W = params.W.value;
      const int n = params.config.grid_side;
      std::ostringstream os;

      if (*a_fail || *a_man) {
        const auto data = read_dataset(an_data);
        const EvalReport rep = evaluate(params, data, icfg);
        if (*a_fail) {
          analysis::write_failure_csv(os, analysis::failure_analysis(data, rep.predictions));
        } else {
          const auto d = analysis::misclassification_distances(data, rep.predictions);
          analysis::write_histogram_csv(os, analysis::manhattan_histogram(d));
        }
        write_text(an_out, os.str());
      } else if (*a_pca) {
        const auto r = analysis::project_embeddings(W, n, an_dims);
        std::vector<std::vector<long long>> ids;
        for (Eigen::Index i = 0; i < r.coords.rows(); ++i) ids.push_back({i, i % n, i / n});
        analysis::export_embeddings(os, r.coords, {"index", "x", "y"}, ids);
        write_text(an_out, os.str());
        if (!an_out.empty() && an_out != "-") std::cout << Json{{"explained_ratio", r.explained_ratio}}.dump() << '\n';
      } else if (*a_curv) {
        Matrix coords;
        if (!an_coords.empty()) {
          std::ifstream in(an_coords);
          if (!in) fail(ErrorKind::Io, "cannot open " + an_coords);
          coords = analysis::import_embeddings(in, an_id_columns);
        } else {
          coords = nn::pca(W, 3).coords;
        }
        const auto c = analysis::curvature(coords, an_k);
        write_json(an_out, {{"mean", c.mean}, {"k", an_k}, {"kappa", c.kappa}});
      } else if (*a_2d) {
        write_json(an_out, {{"local_2dness", analysis::local_2dness(W, n)}});
      } else if (*a_proj) {
        const Problem p = load_problem(an_problem, an_index);
        std::vector<analysis::ProjectionMetrics> series;
        if (!an_coords.empty()) {
          std::ifstream in(an_coords);
          if (!in) fail(ErrorKind::Io, "cannot open " + an_coords);
          series.push_back(analysis::projection_metrics(analysis::import_embeddings(in, an_id_columns), p.constraints));
        } else {
          InferenceConfig c = icfg;
          c.trace = true;
          c.resamples = 1;
          const RunResult r = run(p, params, c);
          series = analysis::projection_metric_series(p, *r.trace, W);
        }
        analysis::write_projection_series_csv(os, series);
        write_text(an_out, os.str());
      } else if (*a_probe) {
        auto data = read_dataset(an_data);
        if (an_count && an_count < data.size()) data.resize(an_count);
        const auto target = analysis::parse_probe_target(an_target);
        const auto ds = analysis::collect_constraint_states(data, params, icfg.iterations, icfg.seed, an_first);
        analysis::ProbeConfig pc;
        pc.epochs = an_epochs;
        pc.seed = an_c.seed.value_or(0);
        const auto r = analysis::train_probe(ds, target, pc).report;
        Json per = Json::array();
        for (std::size_t i = 0; i < r.class_labels.size(); ++i) {
          per.push_back({{"label", r.class_labels[i]}, {"count", r.class_counts[i]}, {"accuracy", r.class_accuracy[i]}});
        }
        Json j{{"target", analysis::to_string(target)},
               {"accuracy", r.accuracy},
               {"balanced_accuracy", r.balanced_accuracy},
               {"validation_accuracy", r.validation_accuracy},
               {"per_class", per},
               {"train_size", r.train_size},
               {"validation_size", r.validation_size},
               {"test_size", r.test_size}};
        if (target == analysis::ProbeTarget::Iteration) {
          j["within1"] = r.within1;
          j["within2"] = r.within2;
        }
        write_json(an_out, j);
      } else if (*a_coord) {
        const auto c = analysis::coord_probe(W, n, 5, an_c.seed.value_or(0));
        write_json(an_out, {{"r2_x", c.r2[0]}, {"r2_y", c.r2[1]}, {"cv_r2_x", c.cv_r2[0]}, {"cv_r2_y", c.cv_r2[1]}});
      } else if (*a_exp) {
        if (an_problem.empty()) {
          analysis::export_grid_embeddings(os, W);
        } else {
          InferenceConfig c = icfg;
          c.trace = true;
          c.resamples = 1;
          const Problem p = load_problem(an_problem, an_index);
          analysis::export_trace_embeddings(os, *run(p, params, c).trace);
        }
        write_text(an_out, os.str());
      }
      return 0;
    }
  } catch (const Error& e) {
    return fail_json(to_string(e.kind()), e.what(), 1);
  } catch (const std::exception& e) {
    return fail_json("internal", e.what(), 1);
  }
  return 0;
}
