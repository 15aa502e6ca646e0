#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "geocsp/analysis.hpp"
#include "geocsp/error.hpp"
#include "geocsp/generator.hpp"
#include "geocsp/io.hpp"
#include "geocsp/solver.hpp"

namespace py = pybind11;
using namespace geocsp;

namespace {

// Problems and configs cross the boundary as plain dicts via JSON text.
Json to_json(const py::handle& obj) {
  if (obj.is_none()) return Json::object();
  const std::string text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return Json::parse(text);
}

py::object from_json(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Problem to_problem(const py::handle& obj) { return problem_from_json(to_json(obj)); }

std::vector<Problem> to_problems(const py::iterable& objs) {
  std::vector<Problem> out;
  for (const auto& o : objs) out.push_back(to_problem(o));
  return out;
}

py::dict points_dict(const Problem& p, const Assignment& a) {
  py::dict out;
  for (std::size_t v = 0; v < p.variables.size(); ++v) {
    if (a.has(static_cast<VarId>(v))) {
      const GridPoint g = a.at(static_cast<VarId>(v));
      out[py::str(p.variables[v])] = py::make_tuple(g.x, g.y);
    }
  }
  return out;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["problems"] = r.problems;
  d["points"] = r.points;
  d["correct_points"] = r.correct_points;
  d["complete"] = r.complete;
  d["point_accuracy"] = r.point_accuracy;
  d["complete_accuracy"] = r.complete_accuracy;
  return d;
}

py::dict train_report_dict(const TrainReport& r) {
  py::list epochs;
  for (const auto& e : r.epochs) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["lr"] = e.lr;
    d["train_loss"] = e.train_loss;
    d["val_point_accuracy"] = e.val_point_accuracy;
    d["val_complete_accuracy"] = e.val_complete_accuracy;
    d["seconds"] = e.seconds;
    epochs.append(d);
  }
  py::dict d;
  d["epochs"] = epochs;
  d["epochs_to_90"] = r.epochs_to_90 ? py::object(py::int_(*r.epochs_to_90)) : py::object(py::none());
  d["best_epoch"] = r.best_epoch;
  d["best_val_point_accuracy"] = r.best_val_point_accuracy;
  d["train_size"] = r.train_size;
  d["validation_size"] = r.validation_size;
  return d;
}

InferenceConfig inference(int iterations, int resamples, std::uint64_t seed) {
  InferenceConfig c;
  c.iterations = iterations;
  c.resamples = resamples;
  c.seed = seed;
  return c;
}

struct Model {
  ModelParams params;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Geometric constraint problems on integer grids with a recurrent message-passing solver";

  static py::exception<Error> error(m, "GeoCspError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error;
      PyErr_SetObject(exc.ptr(), py::make_tuple(std::string(to_string(e.kind())), e.what()).ptr());
    }
  });

  m.def(
      "generate",
      [](std::size_t count, py::object config, std::optional<std::uint64_t> seed, unsigned workers) {
        Json j = to_json(config);
        if (seed) j["seed"] = *seed;
        Dataset ds;
        {
          py::gil_scoped_release release;
          ds = generate_dataset(generator_config_from_json(j), count, workers);
        }
        py::list problems;
        for (const auto& p : ds.problems) problems.append(from_json(problem_to_json(p)));
        return py::make_tuple(problems, from_json(stats_to_json(ds.stats)));
      },
      py::arg("count"), py::arg("config") = py::none(), py::arg("seed") = py::none(), py::arg("workers") = 1,
      "Sample `count` solvable problems. `config` holds generator fields, e.g. {'preset': 'square_translation', "
      "'grid_side': 10}. Returns (problems, stats).");

  m.def(
      "validate", [](py::object problem) { to_problem(problem).validate(false); }, py::arg("problem"),
      "Raise GeoCspError if the record is malformed.");

  m.def(
      "solve",
      [](py::object problem) {
        const Problem p = to_problem(problem);
        const Solution s = solve(p);
        const auto depths = point_depths(p);
        py::dict d;
        for (std::size_t v = 0; v < p.variables.size(); ++v) d[py::str(p.variables[v])] = depths[v];
        py::dict out;
        out["assignment"] = points_dict(p, s.assignment);
        out["depth"] = d;
        return out;
      },
      py::arg("problem"), "Exact forward-propagation solve. Returns {'assignment', 'depth'}.");

  m.def(
      "solver_log", [](py::object problem) { return emit_solver_log(to_problem(problem)); }, py::arg("problem"));

  py::class_<Model>(m, "Model")
      .def_static(
          "create",
          [](int grid_side, int dim, const std::string& cell, const std::string& init, std::uint64_t seed) {
            const TrainConfig t = train_config_from_json({{"dim", dim}, {"cell", cell}, {"init", init}});
            Rng rng(seed);
            return Model{make_model(ModelConfig{grid_side, t.dim, t.cell}, t.init, rng)};
          },
          py::arg("grid_side"), py::arg("dim") = 128, py::arg("cell") = "lstm", py::arg("init") = "random",
          py::arg("seed") = 0)
      .def_static(
          "load", [](const std::string& path) { return Model{load_checkpoint(path).params}; }, py::arg("path"))
      .def(
          "save",
          [](const Model& self, const std::string& path) {
            Checkpoint c;
            c.params = self.params;
            save_checkpoint(path, c);
          },
          py::arg("path"))
      .def_property_readonly("grid_side", [](const Model& self) { return self.params.config.grid_side; })
      .def_property_readonly("dim", [](const Model& self) { return self.params.config.dim; })
      .def_property_readonly("param_count", [](const Model& self) { return param_count(self.params).total; })
      .def_property_readonly(
          "embeddings", [](const Model& self) { return Matrix(self.params.W.value); },
          "Copy of the grid embedding matrix W (one row per grid point).")
      .def(
          "predict",
          [](const Model& self, py::object problem, int iterations, int resamples, std::uint64_t seed) {
            const Problem p = to_problem(problem);
            const RunResult r = run(p, self.params, inference(iterations, resamples, seed));
            py::dict out;
            out["assignment"] = points_dict(p, r.prediction.assignment);
            out["satisfied"] = r.prediction.satisfied;
            out["resample"] = r.prediction.resample;
            return out;
          },
          py::arg("problem"), py::arg("iterations") = 15, py::arg("resamples") = 1, py::arg("seed") = 0)
      .def(
          "evaluate",
          [](const Model& self, py::iterable problems, int iterations, int resamples, std::uint64_t seed) {
            const auto ps = to_problems(problems);
            EvalReport r;
            {
              py::gil_scoped_release release;
              r = evaluate(self.params, ps, inference(iterations, resamples, seed));
            }
            py::dict out = report_dict(r);
            const auto f = analysis::failure_analysis(ps, r.predictions);
            py::dict depth;
            for (const auto& b : f.by_depth) depth[py::int_(b.key)] = b.rate();
            out["accuracy_by_depth"] = depth;
            out["error_distances"] = analysis::misclassification_distances(ps, r.predictions);
            return out;
          },
          py::arg("problems"), py::arg("iterations") = 15, py::arg("resamples") = 1, py::arg("seed") = 0,
          "Point and complete-problem accuracy against labels, with per-depth accuracy and the Manhattan "
          "distances of wrong points.")
      .def(
          "trace",
          [](const Model& self, py::object problem, int iterations, std::uint64_t seed) {
            const Problem p = to_problem(problem);
            InferenceConfig c = inference(iterations, 1, seed);
            c.trace = true;
            const InferenceTrace t = *run(p, self.params, c).trace;
            py::list steps;
            for (std::size_t i = 0; i < t.steps.size(); ++i) {
              py::dict s;
              s["iteration"] = t.steps[i].iteration;
              s["predicted"] = t.steps[i].predicted;
              s["satisfied"] = t.steps[i].satisfied;
              s["variable_states"] = t.variable_states[i];
              s["constraint_states"] = t.constraint_states[i];
              steps.append(s);
            }
            return steps;
          },
          py::arg("problem"), py::arg("iterations") = 15, py::arg("seed") = 0,
          "Per-iteration decoded grid indices, satisfaction flags and hidden states; entry 0 is the initial state.");

  m.def(
      "train",
      [](py::iterable problems, py::object config) {
        const auto ps = to_problems(problems);
        const TrainConfig cfg = train_config_from_json(to_json(config));
        TrainState st;
        {
          py::gil_scoped_release release;
          st = train(ps, cfg);
        }
        return py::make_tuple(Model{std::move(st.best_ema)}, train_report_dict(st.report));
      },
      py::arg("problems"), py::arg("config") = py::none(),
      "Train on labelled problems. Returns (best EMA model, report).");

  auto a = m.def_submodule("analysis", "Embedding geometry and probes");
  a.def(
      "pca",
      [](const Matrix& W, int dims) {
        const auto r = nn::pca(W, dims);
        return py::make_tuple(r.coords, r.explained_ratio);
      },
      py::arg("embeddings"), py::arg("dims") = 3, "Returns (coordinates, explained variance ratios).");
  a.def(
      "curvature",
      [](const Matrix& coords, int k) {
        const auto c = analysis::curvature(coords, k);
        return py::make_tuple(c.mean, c.kappa);
      },
      py::arg("coords"), py::arg("k") = 8, "Returns (mean, per-point) local curvature of 3D points.");
  a.def("local_2dness", &analysis::local_2dness, py::arg("embeddings"), py::arg("grid_side"));
  a.def(
      "coord_probe",
      [](const Matrix& W, int n, int folds, std::uint64_t seed) {
        const auto c = analysis::coord_probe(W, n, folds, seed);
        py::dict d;
        d["r2"] = c.r2;
        d["cv_r2"] = c.cv_r2;
        return d;
      },
      py::arg("embeddings"), py::arg("grid_side"), py::arg("folds") = 5, py::arg("seed") = 0);
  a.def(
      "projection_metrics",
      [](const Matrix& coords, py::object problem) {
        const Problem p = to_problem(problem);
        const auto r = analysis::projection_metrics(coords, p.constraints);
        py::dict d;
        for (int i = 0; i < analysis::kProjectionMetricCount; ++i) d[analysis::kProjectionMetricNames[i]] = r.value[i];
        return d;
      },
      py::arg("coords"), py::arg("problem"), "Nine geometric scores of 2D point coordinates (one row per variable).");
}
