#include "geocsp/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "geocsp/error.hpp"
#include "geocsp/solver.hpp"

namespace geocsp {

namespace {

Json point_json(GridPoint p) { return Json::array({p.x, p.y}); }

GridPoint point_from(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    fail(ErrorKind::Format, "a point must be an [x, y] integer pair");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

Json assignment_json(const Problem& p, const Assignment& a) {
  Json out = Json::object();
  for (std::size_t v = 0; v < p.variables.size(); ++v) {
    if (v < a.size() && a.has(static_cast<VarId>(v))) out[p.variables[v]] = point_json(a.at(static_cast<VarId>(v)));
  }
  return out;
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::Config, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

Json problem_to_json(const Problem& p) {
  Json j;
  j["grid_side"] = p.grid_side;
  j["variables"] = p.variables;
  Json cons = Json::array();
  for (const Constraint& c : p.constraints) {
    Json args = Json::array();
    for (VarId v : c.vars()) args.push_back(p.variables.at(v));
    cons.push_back({{"kind", std::string(1, kind_letter(c.kind))}, {"args", args}});
  }
  j["constraints"] = cons;
  j["fixed"] = assignment_json(p, p.fixed);
  j["labels"] = assignment_json(p, p.labels);
  Json meta;
  meta["constraint_count"] = p.constraints.size();
  meta["point_count"] = p.variables.size();
  try {
    meta["depth"] = solve(p).dependencies.max_depth;
  } catch (const Error&) {
    meta["depth"] = nullptr;
  }
  if (p.generator_seed) meta["generator_seed"] = *p.generator_seed;
  j["metadata"] = meta;
  return j;
}

Problem problem_from_json(const Json& j) {
  try {
    Problem p;
    p.grid_side = j.at("grid_side").get<int>();
    p.variables = j.at("variables").get<std::vector<std::string>>();
    std::map<std::string, VarId> index;
    for (std::size_t i = 0; i < p.variables.size(); ++i) {
      if (!index.emplace(p.variables[i], static_cast<VarId>(i)).second) {
        fail(ErrorKind::Format, "duplicate variable name " + p.variables[i]);
      }
    }
    auto var_of = [&](const Json& a) -> VarId {
      if (a.is_number_integer()) {
        const auto v = a.get<long long>();
        if (v < 0 || v >= static_cast<long long>(p.variables.size())) fail(ErrorKind::Format, "variable index out of range");
        return static_cast<VarId>(v);
      }
      const auto it = index.find(a.get<std::string>());
      if (it == index.end()) fail(ErrorKind::Format, "unknown variable " + a.get<std::string>());
      return it->second;
    };
    for (const Json& c : j.at("constraints")) {
      Constraint con;
      con.kind = parse_kind(c.at("kind").get<std::string>());
      const Json& args = c.at("args");
      if (!args.is_array() || static_cast<int>(args.size()) != arity(con.kind)) {
        fail(ErrorKind::Format, std::string("constraint ") + kind_letter(con.kind) + " needs " +
                                    std::to_string(arity(con.kind)) + " arguments");
      }
      for (std::size_t s = 0; s < args.size(); ++s) con.args[s] = var_of(args[s]);
      p.constraints.push_back(con);
    }
    p.fixed = Assignment(p.variables.size());
    p.labels = Assignment(p.variables.size());
    auto read_points = [&](const char* key, Assignment& into) {
      if (!j.contains(key)) return;
      for (const auto& [name, pt] : j.at(key).items()) into.set(var_of(Json(name)), point_from(pt));
    };
    read_points("fixed", p.fixed);
    read_points("labels", p.labels);
    if (j.contains("metadata") && j["metadata"].contains("generator_seed")) {
      p.generator_seed = j["metadata"]["generator_seed"].get<std::uint64_t>();
    }
    p.validate(false);
    return p;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Format, std::string("problem record: ") + e.what());
  }
}

void write_dataset(std::ostream& os, const std::vector<Problem>& problems) {
  for (const Problem& p : problems) os << problem_to_json(p).dump() << '\n';
}

void write_dataset(const std::string& path, const std::vector<Problem>& problems) {
  std::ostringstream os;
  write_dataset(os, problems);
  write_file(path, os.str());
}

std::vector<Problem> read_dataset(std::istream& is, bool verify) {
  std::vector<Problem> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      fail(ErrorKind::Format, "dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    Problem p = problem_from_json(j);
    if (verify) {
      const Solution s = solve(p);
      if (p.has_labels()) {
        for (VarId v : p.unknowns()) {
          if (!p.labels.has(v) || p.labels.at(v) != s.assignment.at(v)) {
            fail(ErrorKind::Inconsistency, "dataset line " + std::to_string(line_no) + ": label of " +
                                               p.variables[v] + " disagrees with the solver");
          }
        }
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Problem> read_dataset(const std::string& path, bool verify) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  return read_dataset(in, verify);
}

Json stats_to_json(const DatasetStats& s) {
  Json j;
  j["problems"] = s.problems;
  j["failures"] = s.failures;
  j["mean_constraints"] = s.mean_constraints();
  j["mean_points"] = s.mean_points();
  j["mean_depth"] = s.mean_depth();
  const auto f = s.kind_fractions();
  Json kinds;
  for (ConstraintKind k : kAllKinds) kinds[std::string(1, kind_letter(k))] = f[static_cast<int>(k)];
  j["kind_fractions"] = kinds;
  auto hist = [](const std::map<int, std::size_t>& m) {
    Json h = Json::object();
    for (const auto& [k, v] : m) h[std::to_string(k)] = v;
    return h;
  };
  j["constraint_counts"] = hist(s.constraint_counts);
  j["point_counts"] = hist(s.point_counts);
  j["depth_counts"] = hist(s.depth_counts);
  return j;
}

namespace {

void require_known_keys(const Json& j, std::initializer_list<std::string_view> keys, std::string_view section) {
  if (!j.is_object()) fail(ErrorKind::Config, std::string(section) + " config must be an object");
  for (const auto& [name, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), name) == keys.end()) {
      fail(ErrorKind::Config, "unknown " + std::string(section) + " setting '" + name + "'");
    }
  }
}

}  // namespace

GeneratorConfig generator_config_from_json(const Json& j) {
  require_known_keys(j, {"preset", "grid_side", "min_constraints", "max_constraints", "min_parents", "max_parents",
                         "seed", "max_attempts", "wiring_attempts", "type_weights"},
                     "generator");
  GeneratorConfig cfg = GeneratorConfig::training();
  const std::string preset = get_or<std::string>(j, "preset", "training");
  if (preset == "test") {
    cfg = GeneratorConfig::test();
  } else if (preset == "square_translation") {
    cfg = GeneratorConfig::square_translation(get_or(j, "grid_side", 10));
  } else if (preset != "training") {
    fail(ErrorKind::Config, "unknown generator preset '" + preset + "'");
  }
  cfg.grid_side = get_or(j, "grid_side", cfg.grid_side);
  cfg.min_constraints = get_or(j, "min_constraints", cfg.min_constraints);
  cfg.max_constraints = get_or(j, "max_constraints", cfg.max_constraints);
  cfg.min_parents = get_or(j, "min_parents", cfg.min_parents);
  cfg.max_parents = get_or(j, "max_parents", cfg.max_parents);
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.max_attempts = get_or(j, "max_attempts", cfg.max_attempts);
  cfg.wiring_attempts = get_or(j, "wiring_attempts", cfg.wiring_attempts);
  if (j.contains("type_weights")) {
    cfg.type_weights.clear();
    cfg.allowed_kinds.clear();
    for (const auto& [name, w] : j["type_weights"].items()) {
      const ConstraintKind k = parse_kind(name);
      cfg.type_weights[k] = w.get<double>();
      cfg.allowed_kinds.push_back(k);
    }
  }
  cfg.validate();
  return cfg;
}

Json generator_config_to_json(const GeneratorConfig& cfg) {
  Json j;
  j["grid_side"] = cfg.grid_side;
  j["min_constraints"] = cfg.min_constraints;
  j["max_constraints"] = cfg.max_constraints;
  j["min_parents"] = cfg.min_parents;
  j["max_parents"] = cfg.max_parents;
  j["seed"] = cfg.seed;
  j["max_attempts"] = cfg.max_attempts;
  j["wiring_attempts"] = cfg.wiring_attempts;
  Json w = Json::object();
  for (ConstraintKind k : cfg.allowed_kinds) {
    const auto it = cfg.type_weights.find(k);
    w[std::string(1, kind_letter(k))] = it == cfg.type_weights.end() ? 0.0 : it->second;
  }
  j["type_weights"] = w;
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  require_known_keys(j, {"epochs", "batch_size", "base_lr", "weight_decay", "clip_norm", "ema_decay", "dropout",
                         "beta1", "beta2", "eps", "cycle_epochs", "peak_decay", "min_lr_factor", "iteration_center",
                         "iteration_spread", "iteration_p_center", "eval_iterations", "init", "cell", "dim",
                         "validation_fraction", "seed", "stop_at_accuracy", "max_validation"},
                     "train");
  TrainConfig c;
  c.epochs = get_or(j, "epochs", c.epochs);
  c.batch_size = get_or(j, "batch_size", c.batch_size);
  c.base_lr = get_or(j, "base_lr", c.base_lr);
  c.weight_decay = get_or(j, "weight_decay", c.weight_decay);
  c.clip_norm = get_or(j, "clip_norm", c.clip_norm);
  c.ema_decay = get_or(j, "ema_decay", c.ema_decay);
  c.dropout = get_or(j, "dropout", c.dropout);
  c.beta1 = get_or(j, "beta1", c.beta1);
  c.beta2 = get_or(j, "beta2", c.beta2);
  c.eps = get_or(j, "eps", c.eps);
  c.cycle_epochs = get_or(j, "cycle_epochs", c.cycle_epochs);
  c.peak_decay = get_or(j, "peak_decay", c.peak_decay);
  c.min_lr_factor = get_or(j, "min_lr_factor", c.min_lr_factor);
  c.iterations.center = get_or(j, "iteration_center", c.iterations.center);
  c.iterations.spread = get_or(j, "iteration_spread", c.iterations.spread);
  c.iterations.p_center = get_or(j, "iteration_p_center", c.iterations.p_center);
  c.eval_iterations = get_or(j, "eval_iterations", c.eval_iterations);
  c.init = parse_init_mode(get_or<std::string>(j, "init", std::string(to_string(c.init))));
  c.cell = nn::parse_cell_kind(get_or<std::string>(j, "cell", std::string(nn::to_string(c.cell))));
  c.dim = get_or(j, "dim", c.dim);
  c.validation_fraction = get_or(j, "validation_fraction", c.validation_fraction);
  c.seed = get_or(j, "seed", c.seed);
  c.stop_at_accuracy = get_or(j, "stop_at_accuracy", c.stop_at_accuracy);
  c.max_validation = get_or(j, "max_validation", c.max_validation);
  c.validate();
  return c;
}

Json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"base_lr", c.base_lr},
          {"weight_decay", c.weight_decay},
          {"clip_norm", c.clip_norm},
          {"ema_decay", c.ema_decay},
          {"dropout", c.dropout},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"cycle_epochs", c.cycle_epochs},
          {"peak_decay", c.peak_decay},
          {"min_lr_factor", c.min_lr_factor},
          {"iteration_center", c.iterations.center},
          {"iteration_spread", c.iterations.spread},
          {"iteration_p_center", c.iterations.p_center},
          {"eval_iterations", c.eval_iterations},
          {"init", to_string(c.init)},
          {"cell", nn::to_string(c.cell)},
          {"dim", c.dim},
          {"validation_fraction", c.validation_fraction},
          {"seed", c.seed},
          {"stop_at_accuracy", c.stop_at_accuracy},
          {"max_validation", c.max_validation}};
}

InferenceConfig inference_config_from_json(const Json& j) {
  require_known_keys(j, {"iterations", "resamples", "seed", "batch_size"}, "inference");
  InferenceConfig c;
  c.iterations = get_or(j, "iterations", c.iterations);
  c.resamples = get_or(j, "resamples", c.resamples);
  c.seed = get_or(j, "seed", c.seed);
  c.batch_size = get_or(j, "batch_size", c.batch_size);
  if (c.iterations < 0 || c.resamples < 1 || c.batch_size < 1) fail(ErrorKind::Config, "invalid inference settings");
  return c;
}

Json inference_config_to_json(const InferenceConfig& c) {
  return {{"iterations", c.iterations}, {"resamples", c.resamples}, {"seed", c.seed}, {"batch_size", c.batch_size}};
}

Json read_json_file(const std::string& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    fail(ErrorKind::Format, path + ": " + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

}  // namespace

std::string checkpoint_bytes(const Checkpoint& ckpt) {
  const ModelParams& m = ckpt.params;
  const auto params = m.parameters();
  const std::size_t elem = ckpt.storage == TensorType::F64 ? 8 : 4;
  Json tensors = Json::array();
  std::size_t offset = 0;
  for (const nn::Parameter* p : params) {
    tensors.push_back({{"name", p->name},
                       {"shape", {p->value.rows(), p->value.cols()}},
                       {"dtype", ckpt.storage == TensorType::F64 ? "f64" : "f32"},
                       {"offset", offset}});
    offset += p->size() * elem;
  }
  Json manifest;
  manifest["format"] = "geocsp-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["grid_side"] = m.config.grid_side;
  manifest["dim"] = m.config.dim;
  manifest["cell"] = nn::to_string(m.config.cell);
  manifest["tensors"] = tensors;
  manifest["metadata"] = ckpt.metadata;
  const std::string text = manifest.dump();

  std::string out(kCheckpointMagic, 8);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + offset);
  for (const nn::Parameter* p : params) {
    const double* d = p->value.data();
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      if (ckpt.storage == TensorType::F64) {
        char b[8];
        std::memcpy(b, &d[i], 8);
        out.append(b, 8);
      } else {
        const float f = static_cast<float>(d[i]);
        char b[4];
        std::memcpy(b, &f, 4);
        out.append(b, 4);
      }
    }
  }
  return out;
}

Checkpoint checkpoint_from_bytes(std::string_view bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    fail(ErrorKind::Format, "not a geocsp checkpoint (bad magic)");
  }
  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 4);
  if (bytes.size() < 12 + static_cast<std::size_t>(len)) fail(ErrorKind::Format, "checkpoint manifest truncated");
  Json manifest;
  try {
    manifest = Json::parse(bytes.substr(12, len));
  } catch (const Json::exception& e) {
    fail(ErrorKind::Format, std::string("checkpoint manifest: ") + e.what());
  }
  try {
    if (manifest.at("format") != "geocsp-checkpoint") fail(ErrorKind::Format, "unknown checkpoint format");
    const int version = manifest.at("version").get<int>();
    if (version != kCheckpointVersion) {
      fail(ErrorKind::Format, "checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ck;
    ModelConfig cfg;
    cfg.grid_side = manifest.at("grid_side").get<int>();
    cfg.dim = manifest.at("dim").get<int>();
    cfg.cell = nn::parse_cell_kind(manifest.at("cell").get<std::string>());
    Rng unused(0);
    ck.params = make_model(cfg, InitMode::Random, unused);
    ck.metadata = manifest.value("metadata", Json::object());
    const std::string_view payload = bytes.substr(12 + len);
    auto params = ck.params.parameters();
    const Json& tensors = manifest.at("tensors");
    if (tensors.size() != params.size()) fail(ErrorKind::Format, "checkpoint tensor count mismatch");
    std::size_t expected = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      const Json& t = tensors[k];
      nn::Parameter& p = *params[k];
      if (t.at("name").get<std::string>() != p.name) fail(ErrorKind::Format, "unexpected tensor " + t.at("name").get<std::string>());
      const auto shape = t.at("shape").get<std::vector<long long>>();
      if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
        fail(ErrorKind::Format, "shape mismatch for tensor " + p.name);
      }
      const std::string dtype = t.at("dtype").get<std::string>();
      if (dtype != "f64" && dtype != "f32") fail(ErrorKind::Format, "unsupported dtype " + dtype);
      ck.storage = dtype == "f64" ? TensorType::F64 : TensorType::F32;
      const std::size_t elem = dtype == "f64" ? 8 : 4;
      const auto offset = t.at("offset").get<std::size_t>();
      if (offset != expected) fail(ErrorKind::Format, "tensor offsets are not contiguous");
      const std::size_t nbytes = p.size() * elem;
      if (offset + nbytes > payload.size()) fail(ErrorKind::Format, "checkpoint payload truncated");
      for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        const char* src = payload.data() + offset + static_cast<std::size_t>(i) * elem;
        if (elem == 8) {
          std::memcpy(p.value.data() + i, src, 8);
        } else {
          float f;
          std::memcpy(&f, src, 4);
          p.value.data()[i] = f;
        }
      }
      p.zero_grad();
      expected += nbytes;
    }
    if (expected != payload.size()) fail(ErrorKind::Format, "checkpoint payload length does not match the manifest");
    return ck;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Format, std::string("checkpoint manifest: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file(path, checkpoint_bytes(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_bytes(read_file(path)); }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void CsvWriter::sep() {
  if (!first_) os_ << ',';
  first_ = false;
}

void CsvWriter::header(const std::vector<std::string>& names) {
  for (const auto& n : names) cell(n);
  end_row();
}

CsvWriter& CsvWriter::cell(double v) {
  sep();
  os_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::cell(long long v) {
  sep();
  os_ << v;
  return *this;
}

CsvWriter& CsvWriter::cell(std::string_view v) {
  sep();
  if (v.find_first_of(",\"\n") == std::string_view::npos) {
    os_ << v;
    return *this;
  }
  os_ << '"';
  for (char c : v) {
    if (c == '"') os_ << '"';
    os_ << c;
  }
  os_ << '"';
  return *this;
}

void CsvWriter::end_row() {
  os_ << '\n';
  first_ = true;
}

void write_train_report_csv(std::ostream& os, const TrainReport& report) {
  CsvWriter csv(os);
  csv.header({"epoch", "lr", "train_loss", "val_point_accuracy", "val_complete_accuracy", "seconds"});
  for (const auto& e : report.epochs) {
    csv.cell(e.epoch).cell(e.lr).cell(e.train_loss).cell(e.val_point_accuracy).cell(e.val_complete_accuracy).cell(e.seconds);
    csv.end_row();
  }
}

void write_trace_jsonl(std::ostream& os, const Problem& p, const InferenceTrace& trace) {
  for (const TraceStep& step : trace.steps) {
    Json rec;
    rec["iteration"] = step.iteration;
    Json pts = Json::object();
    for (std::size_t i = 0; i < trace.unknowns.size(); ++i) {
      pts[p.variables[trace.unknowns[i]]] = point_json(index_to_point(step.predicted[i], p.grid_side));
    }
    rec["predicted"] = pts;
    rec["satisfied"] = step.satisfied;
    int sat = 0;
    for (bool b : step.satisfied) sat += b ? 1 : 0;
    rec["satisfied_count"] = sat;
    if (p.has_labels()) {
      int correct = 0;
      for (std::size_t i = 0; i < trace.unknowns.size(); ++i) {
        correct += index_to_point(step.predicted[i], p.grid_side) == p.labels.at(trace.unknowns[i]) ? 1 : 0;
      }
      rec["correct"] = correct;
    }
    os << rec.dump() << '\n';
  }
}

}  // namespace geocsp
