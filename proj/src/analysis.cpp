#include "geocsp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "geocsp/error.hpp"
#include "geocsp/io.hpp"
#include "geocsp/nn/optim.hpp"
#include "geocsp/solver.hpp"

namespace geocsp::analysis {

namespace {

void bump(std::map<int, Bucket>& m, int key, bool ok) {
  Bucket& b = m[key];
  b.key = key;
  ++b.total;
  if (ok) ++b.success;
}

std::vector<Bucket> flatten(const std::map<int, Bucket>& m) {
  std::vector<Bucket> out;
  for (const auto& [k, b] : m) out.push_back(b);
  return out;
}

void check_lengths(std::size_t problems, std::size_t predictions) {
  if (problems != predictions) fail(ErrorKind::Dimension, "one prediction per problem is required");
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

FailureBreakdown failure_analysis(std::span<const Problem> problems, std::span<const Prediction> predictions) {
  check_lengths(problems.size(), predictions.size());
  std::map<int, Bucket> depth, count;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const Problem& p = problems[i];
    const auto depths = point_depths(p);
    bool complete = true;
    for (VarId v : p.unknowns()) {
      const bool ok = predictions[i].assignment.has(v) && predictions[i].assignment.at(v) == p.labels.at(v);
      complete = complete && ok;
      bump(depth, depths[v], ok);
    }
    bump(count, static_cast<int>(p.constraints.size()), complete);
  }
  return {flatten(depth), flatten(count)};
}

double pooled_rate(const std::vector<Bucket>& buckets, int lo, int hi) {
  std::size_t total = 0, success = 0;
  for (const Bucket& b : buckets) {
    if (b.key < lo || b.key > hi) continue;
    total += b.total;
    success += b.success;
  }
  return total ? static_cast<double>(success) / static_cast<double>(total) : 0.0;
}

int manhattan(GridPoint a, GridPoint b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

std::vector<int> misclassification_distances(std::span<const Problem> problems,
                                             std::span<const Prediction> predictions) {
  check_lengths(problems.size(), predictions.size());
  std::vector<int> out;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    for (VarId v : problems[i].unknowns()) {
      const int d = manhattan(predictions[i].assignment.at(v), problems[i].labels.at(v));
      if (d > 0) out.push_back(d);
    }
  }
  return out;
}

Histogram manhattan_histogram(std::span<const int> distances) {
  Histogram h;
  if (distances.empty()) return h;
  const int top = *std::max_element(distances.begin(), distances.end());
  if (*std::min_element(distances.begin(), distances.end()) < 0) fail(ErrorKind::Range, "negative distance");
  h.counts.assign(static_cast<std::size_t>(top) + 1, 0);
  for (int d : distances) ++h.counts[d];
  h.total = distances.size();
  for (std::size_t c : h.counts) h.frequency.push_back(static_cast<double>(c) / static_cast<double>(h.total));
  h.mode = static_cast<int>(std::max_element(h.counts.begin(), h.counts.end()) - h.counts.begin());
  return h;
}

CurvatureResult curvature(const Matrix& coords, int k) {
  if (coords.cols() != 3) fail(ErrorKind::Dimension, "curvature expects 3D coordinates");
  if (k < 3) fail(ErrorKind::Config, "curvature needs k >= 3");
  const Eigen::Index n = coords.rows();
  if (n < k + 1) fail(ErrorKind::Config, "curvature needs at least k + 1 points");
  CurvatureResult out;
  out.kappa.resize(n);
  std::vector<std::pair<double, Eigen::Index>> dist(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) dist[j] = {(coords.row(j) - coords.row(i)).squaredNorm(), j};
    std::partial_sort(dist.begin(), dist.begin() + k + 1, dist.end());
    Eigen::MatrixXd nb(k + 1, 3);
    for (int j = 0; j <= k; ++j) nb.row(j) = coords.row(dist[j].second);
    const Eigen::MatrixXd centered = nb.rowwise() - nb.colwise().mean();
    const Eigen::Matrix3d cov = centered.transpose() * centered / static_cast<double>(k);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov, Eigen::EigenvaluesOnly);
    const double lmin = std::max(es.eigenvalues()(0), 0.0);
    const double lmax = es.eigenvalues()(2);
    out.kappa[i] = lmax > 0.0 ? lmin / (lmax + kCurvatureEps) : 0.0;
  }
  out.mean = std::accumulate(out.kappa.begin(), out.kappa.end(), 0.0) / static_cast<double>(n);
  return out;
}

double local_2dness(const Matrix& W, int n) {
  if (n < 3) fail(ErrorKind::Config, "local 2D-ness needs a grid side of at least 3");
  if (W.rows() != static_cast<Eigen::Index>(n) * n) fail(ErrorKind::Dimension, "W must have n^2 rows");
  double sum = 0.0;
  int windows = 0;
  Eigen::MatrixXd pts(9, W.cols());
  for (int y0 = 0; y0 + 3 <= n; ++y0) {
    for (int x0 = 0; x0 + 3 <= n; ++x0) {
      int r = 0;
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) pts.row(r++) = W.row((x0 + dx) + (y0 + dy) * n);
      }
      const Eigen::MatrixXd c = pts.rowwise() - pts.colwise().mean();
      // The 9x9 Gram matrix shares its nonzero spectrum with the covariance.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c * c.transpose(), Eigen::EigenvaluesOnly);
      const auto& ev = es.eigenvalues();
      const double total = ev.cwiseMax(0.0).sum();
      sum += total > 0.0 ? clamp01((ev(8) + ev(7)) / total) : 0.0;
      ++windows;
    }
  }
  return sum / windows;
}

ProjectionReport project_embeddings(const Matrix& W, int n, int dims) {
  if (W.rows() != static_cast<Eigen::Index>(n) * n) fail(ErrorKind::Dimension, "W must have n^2 rows");
  const nn::PcaResult r = nn::pca(W, dims);
  ProjectionReport out;
  out.coords = r.coords;
  for (double e : r.eigenvalues) {
    const double total = std::accumulate(r.eigenvalues.begin(), r.eigenvalues.end(), 0.0);
    out.explained_ratio.push_back(total > 0.0 ? e / total : 0.0);
  }
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (x + 1 < n) out.edges.emplace_back(x + y * n, x + 1 + y * n);
      if (y + 1 < n) out.edges.emplace_back(x + y * n, x + (y + 1) * n);
    }
  }
  return out;
}

CoordProbe coord_probe(const Matrix& W, int n, int folds, std::uint64_t seed) {
  const Eigen::Index N = static_cast<Eigen::Index>(n) * n;
  if (W.rows() != N) fail(ErrorKind::Dimension, "W must have n^2 rows");
  if (folds < 2 || folds > N) fail(ErrorKind::Config, "invalid fold count");
  Eigen::MatrixXd X(N, W.cols() + 1);
  X.leftCols(W.cols()) = W;
  X.col(W.cols()).setOnes();
  Eigen::MatrixXd Y(N, 2);
  for (Eigen::Index i = 0; i < N; ++i) Y.row(i) << static_cast<double>(i % n), static_cast<double>(i / n);

  auto r2 = [&](const Eigen::MatrixXd& pred) {
    std::array<double, 2> out{};
    for (int a = 0; a < 2; ++a) {
      const double mean = Y.col(a).mean();
      const double tot = (Y.col(a).array() - mean).square().sum();
      const double res = (Y.col(a) - pred.col(a)).squaredNorm();
      out[a] = tot > 0.0 ? 1.0 - res / tot : 0.0;
    }
    return out;
  };

  CoordProbe out;
  out.weights = X.colPivHouseholderQr().solve(Y);
  out.r2 = r2(X * out.weights);

  std::vector<Eigen::Index> order(N);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Eigen::MatrixXd held(N, 2);
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < N; ++i) (i % folds == f ? te : tr).push_back(order[i]);
    const Eigen::MatrixXd w = X(tr, Eigen::all).colPivHouseholderQr().solve(Y(tr, Eigen::all));
    held(te, Eigen::all) = X(te, Eigen::all) * w;
  }
  out.cv_r2 = r2(held);
  return out;
}

namespace {

double cross(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

double max_pair_distance(std::initializer_list<Point2> pts) {
  double m = 0.0;
  for (auto i = pts.begin(); i != pts.end(); ++i) {
    for (auto j = std::next(i); j != pts.end(); ++j) m = std::max(m, (*i - *j).norm());
  }
  return m;
}

// Lengths below this fraction of the figure's extent count as zero.
constexpr double kDegenerate = 1e-12;

}  // namespace

SquareScores square_scores(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  SquareScores s;
  const std::array<Point2, 4> p{a, b, c, d};
  const double extent = max_pair_distance({a, b, c, d});
  std::array<double, 4> side{};
  for (int i = 0; i < 4; ++i) side[i] = (p[(i + 1) % 4] - p[i]).norm();
  if (extent == 0.0 || *std::min_element(side.begin(), side.end()) <= kDegenerate * extent) {
    s.degenerate = true;
    return s;
  }
  const double mean = (side[0] + side[1] + side[2] + side[3]) / 4.0;
  double var = 0.0;
  for (double l : side) var += (l - mean) * (l - mean);
  s.side_uniformity = clamp01(1.0 - std::sqrt(var / 4.0) / mean);

  double area = 0.0;
  for (int i = 0; i < 4; ++i) area += cross(p[i], p[(i + 1) % 4]);
  area = std::abs(area) / 2.0;
  const double ref = mean * mean;
  s.area_ratio = std::min(area, ref) / std::max(area, ref);

  double dev = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Point2 u = p[(i + 3) % 4] - p[i];
    const Point2 v = p[(i + 1) % 4] - p[i];
    const double cosang = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
    dev += std::abs(std::acos(cosang) - std::numbers::pi / 2) / (std::numbers::pi / 2);
  }
  s.corner_angle = clamp01(1.0 - dev / 4.0);
  return s;
}

TranslationScores translation_scores(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  TranslationScores s;
  const double extent = max_pair_distance({a, b, c, d});
  const Point2 u = b - a, v = d - c;
  const double lu = u.norm(), lv = v.norm();
  if (extent == 0.0 || std::min(lu, lv) <= kDegenerate * extent) {
    s.degenerate = true;
    return s;
  }
  s.length_ratio = std::min(lu, lv) / std::max(lu, lv);
  s.parallelism = clamp01(std::abs(u.dot(v)) / (lu * lv));
  return s;
}

ReflectionScores reflection_scores(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  ReflectionScores s;
  const double extent = max_pair_distance({a, b, c, d});
  const Point2 axis = b - a;
  const double la = axis.norm();
  if (extent == 0.0 || la <= kDegenerate * extent) {
    s.degenerate = true;
    return s;
  }
  const Point2 dir = axis / la;
  auto foot = [&](const Point2& q) { return a + dir * dir.dot(q - a); };
  const Point2 mirror = 2.0 * foot(c) - c;
  const double scale = (la + (d - c).norm()) / 2.0;
  s.reflection_accuracy = 1.0 - clamp01((mirror - d).norm() / scale);
  const Point2 mid = (c + d) / 2.0;
  s.axis_quality = 1.0 - clamp01((mid - foot(mid)).norm() / scale);
  return s;
}

MidpointScores midpoint_scores(const Point2& a, const Point2& b, const Point2& c) {
  MidpointScores s;
  const double longest = max_pair_distance({a, b, c});
  if (longest == 0.0) {
    s.degenerate = true;
    return s;
  }
  const double area = std::abs(cross(b - a, c - a)) / 2.0;
  s.collinearity = 1.0 - clamp01(area / (0.5 * longest * longest));
  const std::array<Point2, 3> p{a, b, c};
  for (int m = 0; m < 3; ++m) {
    const Point2& e1 = p[(m + 1) % 3];
    const Point2& e2 = p[(m + 2) % 3];
    const double seg = (e1 - e2).norm();
    if (seg <= kDegenerate * longest) continue;
    s.midpoint_accuracy = std::max(s.midpoint_accuracy, 1.0 - clamp01((p[m] - (e1 + e2) / 2.0).norm() / seg));
  }
  return s;
}

const std::array<const char*, kProjectionMetricCount> kProjectionMetricNames = {
    "square_area_ratio",     "square_side_uniformity", "square_corner_angle",
    "translation_length_ratio", "translation_parallelism", "reflection_accuracy",
    "reflection_axis_quality",  "midpoint_collinearity",   "midpoint_accuracy"};

ProjectionMetrics projection_metrics(const Matrix& coords, std::span<const Constraint> constraints) {
  if (coords.cols() != 2) fail(ErrorKind::Dimension, "projection metrics expect 2D coordinates");
  ProjectionMetrics out;
  std::array<double, kProjectionMetricCount> sum{};
  auto pt = [&](VarId v) -> Point2 {
    if (v < 0 || v >= coords.rows()) fail(ErrorKind::Range, "constraint refers to a missing coordinate row");
    return coords.row(v).transpose();
  };
  auto add = [&](int slot, double v) {
    sum[slot] += v;
    ++out.count[slot];
  };
  for (const Constraint& c : constraints) {
    const auto& g = c.args;
    switch (c.kind) {
      case ConstraintKind::Square: {
        const auto s = square_scores(pt(g[0]), pt(g[1]), pt(g[2]), pt(g[3]));
        if (s.degenerate) break;
        add(0, s.area_ratio);
        add(1, s.side_uniformity);
        add(2, s.corner_angle);
        continue;
      }
      case ConstraintKind::Translation: {
        const auto s = translation_scores(pt(g[0]), pt(g[1]), pt(g[2]), pt(g[3]));
        if (s.degenerate) break;
        add(3, s.length_ratio);
        add(4, s.parallelism);
        continue;
      }
      case ConstraintKind::Reflection: {
        const auto s = reflection_scores(pt(g[0]), pt(g[1]), pt(g[2]), pt(g[3]));
        if (s.degenerate) break;
        add(5, s.reflection_accuracy);
        add(6, s.axis_quality);
        continue;
      }
      case ConstraintKind::Midpoint: {
        const auto s = midpoint_scores(pt(g[0]), pt(g[1]), pt(g[2]));
        if (s.degenerate) break;
        add(7, s.collinearity);
        add(8, s.midpoint_accuracy);
        continue;
      }
    }
    ++out.degenerate;
  }
  for (int i = 0; i < kProjectionMetricCount; ++i) {
    out.value[i] = out.count[i] ? sum[i] / out.count[i] : std::nan("");
  }
  return out;
}

std::vector<Matrix> trace_point_embeddings(const Problem& p, const InferenceTrace& trace, const Matrix& W) {
  std::vector<Matrix> out;
  const Eigen::Index d = W.cols();
  std::vector<int> row_of(p.variables.size(), -1);
  for (std::size_t k = 0; k < trace.unknowns.size(); ++k) row_of[trace.unknowns[k]] = static_cast<int>(k);
  for (const Matrix& states : trace.variable_states) {
    if (states.cols() != d) fail(ErrorKind::Dimension, "trace states do not match the embedding width");
    Matrix e(static_cast<Eigen::Index>(p.variables.size()), d);
    for (std::size_t v = 0; v < p.variables.size(); ++v) {
      const VarId id = static_cast<VarId>(v);
      e.row(id) = row_of[v] >= 0 ? Matrix(states.row(row_of[v])) : Matrix(W.row(point_to_index(p.fixed.at(id), p.grid_side)));
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ProjectionMetrics> projection_metric_series(const Problem& p, const InferenceTrace& trace,
                                                        const Matrix& W) {
  std::vector<ProjectionMetrics> out;
  for (const Matrix& e : trace_point_embeddings(p, trace, W)) {
    out.push_back(projection_metrics(nn::pca(e, 2).coords, p.constraints));
  }
  return out;
}

void write_projection_series_csv(std::ostream& os, std::span<const ProjectionMetrics> series) {
  CsvWriter csv(os);
  std::vector<std::string> head{"iteration"};
  for (const char* n : kProjectionMetricNames) head.emplace_back(n);
  csv.header(head);
  for (std::size_t t = 0; t < series.size(); ++t) {
    csv.cell(t);
    for (double v : series[t].value) csv.cell(v);
    csv.end_row();
  }
}

std::string_view to_string(ProbeTarget t) {
  switch (t) {
    case ProbeTarget::Kind: return "kind";
    case ProbeTarget::Satisfied: return "satisfied";
    case ProbeTarget::Iteration: return "iteration";
  }
  return "?";
}

ProbeTarget parse_probe_target(std::string_view text) {
  for (auto t : {ProbeTarget::Kind, ProbeTarget::Satisfied, ProbeTarget::Iteration}) {
    if (text == to_string(t)) return t;
  }
  fail(ErrorKind::Config, "unknown probe target '" + std::string(text) + "' (expected kind, satisfied or iteration)");
}

const std::vector<int>& ProbeDataset::labels(ProbeTarget t) const {
  switch (t) {
    case ProbeTarget::Kind: return kind;
    case ProbeTarget::Satisfied: return satisfied;
    case ProbeTarget::Iteration: return iteration;
  }
  return kind;
}

ProbeDataset collect_constraint_states(std::span<const Problem> problems, const ModelParams& params, int iterations,
                                       std::uint64_t seed, int first_iteration) {
  if (first_iteration < 0 || first_iteration > iterations) fail(ErrorKind::Config, "invalid iteration range");
  ProbeDataset out;
  std::vector<Matrix> blocks;
  InferenceConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = seed;
  cfg.trace = true;
  Eigen::Index rows = 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const Problem& p = problems[i];
    const RunResult r = run(p, params, cfg, i);
    for (int t = first_iteration; t <= iterations; ++t) {
      blocks.push_back(r.trace->constraint_states[t]);
      rows += blocks.back().rows();
      for (std::size_t c = 0; c < p.constraints.size(); ++c) {
        out.kind.push_back(static_cast<int>(p.constraints[c].kind));
        out.satisfied.push_back(r.trace->steps[t].satisfied[c] ? 1 : 0);
        out.iteration.push_back(t);
        out.problem.push_back(static_cast<int>(i));
      }
    }
  }
  out.features.resize(rows, params.config.dim);
  Eigen::Index at = 0;
  for (const Matrix& b : blocks) {
    out.features.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

std::vector<int> ProbeModel::predict(const Matrix& x) const {
  const Matrix h = ((x * w1.value.transpose()).rowwise() + b1.value.row(0)).cwiseMax(0.0);
  const Matrix logits = (h * w2.value.transpose()).rowwise() + b2.value.row(0);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index arg;
    logits.row(r).maxCoeff(&arg);
    out[r] = classes[arg];
  }
  return out;
}

namespace {

double accuracy_of(const ProbeModel& m, const Matrix& x, std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  const auto pred = m.predict(x);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) ok += pred[i] == labels[i];
  return static_cast<double>(ok) / static_cast<double>(labels.size());
}

}  // namespace

ProbeResult train_probe(const Matrix& features, std::span<const int> labels, std::span<const int> groups,
                        const ProbeConfig& cfg) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n || groups.size() != n) fail(ErrorKind::Dimension, "one label and group per row is required");
  if (cfg.hidden < 1 || cfg.epochs < 1 || cfg.batch_size < 1) fail(ErrorKind::Config, "invalid probe settings");
  if (!(cfg.train_fraction > 0.0 && cfg.validation_fraction > 0.0 &&
        cfg.train_fraction + cfg.validation_fraction < 1.0)) {
    fail(ErrorKind::Config, "split fractions must leave room for a test split");
  }
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) fail(ErrorKind::Config, "probe needs at least two classes");
  std::map<int, int> class_index;
  for (std::size_t c = 0; c < classes.size(); ++c) class_index[classes[c]] = static_cast<int>(c);

  std::vector<int> unit(groups.begin(), groups.end());
  std::sort(unit.begin(), unit.end());
  unit.erase(std::unique(unit.begin(), unit.end()), unit.end());
  Rng rng(cfg.seed);
  std::shuffle(unit.begin(), unit.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(unit.size())));
  const auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(unit.size())));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= unit.size()) {
    fail(ErrorKind::Config, "too few groups for a train/validation/test split");
  }
  std::map<int, int> split_of;
  for (std::size_t u = 0; u < unit.size(); ++u) split_of[unit[u]] = u < n_train ? 0 : u < n_train + n_val ? 1 : 2;
  std::array<std::vector<std::size_t>, 3> rows;
  for (std::size_t i = 0; i < n; ++i) rows[split_of[groups[i]]].push_back(i);

  if (cfg.balance) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i : rows[0]) by_class[labels[i]].push_back(i);
    if (by_class.size() < 2) fail(ErrorKind::Config, "training split holds a single class");
    std::size_t least = n;
    for (auto& [c, v] : by_class) least = std::min(least, v.size());
    rows[0].clear();
    for (auto& [c, v] : by_class) {
      std::shuffle(v.begin(), v.end(), rng);
      rows[0].insert(rows[0].end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(least));
    }
    std::sort(rows[0].begin(), rows[0].end());
  }

  auto gather = [&](const std::vector<std::size_t>& idx, Matrix& x, std::vector<int>& y) {
    x.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
    y.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      x.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(idx[k]));
      y[k] = labels[idx[k]];
    }
  };
  Matrix xval, xtest;
  std::vector<int> yval, ytest;
  gather(rows[1], xval, yval);
  gather(rows[2], xtest, ytest);

  const int d = static_cast<int>(features.cols());
  const int C = static_cast<int>(classes.size());
  ProbeModel m;
  m.classes = classes;
  auto uniform = [&](int r, int c, int fan_in, const char* name) {
    std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    Matrix v(r, c);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = u(rng);
    return nn::Parameter(name, std::move(v));
  };
  m.w1 = uniform(cfg.hidden, d, d, "w1");
  m.b1 = uniform(1, cfg.hidden, d, "b1");
  m.w2 = uniform(C, cfg.hidden, cfg.hidden, "w2");
  m.b2 = uniform(1, C, cfg.hidden, "b2");
  const std::vector<nn::Parameter*> plist{&m.w1, &m.b1, &m.w2, &m.b2};
  nn::AdamW opt(plist, {0.9, 0.999, 1e-8, cfg.weight_decay});

  ProbeResult out;
  out.report.train_size = rows[0].size();
  out.report.validation_size = rows[1].size();
  out.report.test_size = rows[2].size();
  ProbeModel best = m;
  double best_val = -1.0;
  std::vector<std::size_t> order = rows[0];
  nn::Tape tape;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      Matrix xb(static_cast<Eigen::Index>(end - begin), d);
      std::vector<int> yb(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        xb.row(static_cast<Eigen::Index>(k - begin)) = features.row(static_cast<Eigen::Index>(order[k]));
        yb[k - begin] = class_index[labels[order[k]]];
      }
      tape.clear();
      nn::zero_grads(plist);
      const nn::Var h = tape.relu(tape.linear(tape.constant(std::move(xb)), tape.param(m.w1), tape.param(m.b1)));
      const nn::Var logits = tape.linear(h, tape.param(m.w2), tape.param(m.b2));
      tape.backward(tape.softmax_cross_entropy(logits, yb));
      opt.step(cfg.lr);
    }
    const double val = accuracy_of(m, xval, yval);
    if (val > best_val) {
      best_val = val;
      best = m;
    }
  }
  out.model = std::move(best);
  out.report.validation_accuracy = best_val;

  ProbeReport& r = out.report;
  const auto pred = out.model.predict(xtest);
  std::vector<std::size_t> hit(C, 0), count(C, 0);
  std::size_t ok = 0, w1 = 0, w2 = 0;
  for (std::size_t i = 0; i < ytest.size(); ++i) {
    const int c = class_index[ytest[i]];
    ++count[c];
    const int diff = std::abs(pred[i] - ytest[i]);
    if (diff == 0) {
      ++hit[c];
      ++ok;
    }
    w1 += diff <= 1;
    w2 += diff <= 2;
  }
  const double tn = static_cast<double>(std::max<std::size_t>(ytest.size(), 1));
  r.accuracy = static_cast<double>(ok) / tn;
  r.within1 = static_cast<double>(w1) / tn;
  r.within2 = static_cast<double>(w2) / tn;
  double bal = 0.0;
  int present = 0;
  for (int c = 0; c < C; ++c) {
    r.class_labels.push_back(classes[c]);
    r.class_counts.push_back(count[c]);
    const double acc = count[c] ? static_cast<double>(hit[c]) / static_cast<double>(count[c]) : std::nan("");
    r.class_accuracy.push_back(acc);
    if (count[c]) {
      bal += acc;
      ++present;
    }
  }
  r.balanced_accuracy = present ? bal / present : 0.0;
  return out;
}

ProbeResult train_probe(const ProbeDataset& data, ProbeTarget target, ProbeConfig cfg) {
  if (target == ProbeTarget::Satisfied) cfg.balance = true;
  return train_probe(data.features, data.labels(target), data.problem, cfg);
}

void export_embeddings(std::ostream& os, const Matrix& rows, const std::vector<std::string>& id_columns,
                       const std::vector<std::vector<long long>>& ids) {
  if (ids.size() != static_cast<std::size_t>(rows.rows())) fail(ErrorKind::Dimension, "one id tuple per row is required");
  CsvWriter csv(os);
  std::vector<std::string> head = id_columns;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) head.push_back("v" + std::to_string(c));
  csv.header(head);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    if (ids[r].size() != id_columns.size()) fail(ErrorKind::Dimension, "id tuple width mismatch");
    for (long long v : ids[r]) csv.cell(v);
    for (Eigen::Index c = 0; c < rows.cols(); ++c) csv.cell(rows(r, c));
    csv.end_row();
  }
}

void export_grid_embeddings(std::ostream& os, const Matrix& W) {
  std::vector<std::vector<long long>> ids(static_cast<std::size_t>(W.rows()));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = {static_cast<long long>(i)};
  export_embeddings(os, W, {"index"}, ids);
}

void export_trace_embeddings(std::ostream& os, const InferenceTrace& trace) {
  if (trace.variable_states.empty()) fail(ErrorKind::Config, "trace holds no states");
  const Eigen::Index d = trace.variable_states.front().cols();
  const auto u = static_cast<Eigen::Index>(trace.unknowns.size());
  Matrix all(static_cast<Eigen::Index>(trace.variable_states.size()) * u, d);
  std::vector<std::vector<long long>> ids;
  for (std::size_t t = 0; t < trace.variable_states.size(); ++t) {
    all.middleRows(static_cast<Eigen::Index>(t) * u, u) = trace.variable_states[t];
    for (VarId v : trace.unknowns) ids.push_back({static_cast<long long>(t), v});
  }
  export_embeddings(os, all, {"iteration", "variable"}, ids);
}

Matrix import_embeddings(std::istream& is, int id_columns) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorKind::Format, "empty embedding file");
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col++ < id_columns) continue;
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        fail(ErrorKind::Format, "non-numeric embedding value '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) fail(ErrorKind::Format, "ragged embedding rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return out;
}

void write_failure_csv(std::ostream& os, const FailureBreakdown& f) {
  CsvWriter csv(os);
  csv.header({"bucket", "key", "total", "success", "rate"});
  for (const Bucket& b : f.by_depth) {
    csv.cell(std::string_view("depth")).cell(b.key).cell(b.total).cell(b.success).cell(b.rate());
    csv.end_row();
  }
  for (const Bucket& b : f.by_constraint_count) {
    csv.cell(std::string_view("constraints")).cell(b.key).cell(b.total).cell(b.success).cell(b.rate());
    csv.end_row();
  }
}

void write_histogram_csv(std::ostream& os, const Histogram& h) {
  CsvWriter csv(os);
  csv.header({"distance", "count", "frequency"});
  for (std::size_t k = 1; k < h.counts.size(); ++k) {
    csv.cell(k).cell(h.counts[k]).cell(h.frequency[k]);
    csv.end_row();
  }
}

}  // namespace geocsp::analysis
