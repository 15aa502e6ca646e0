#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geocsp/inference.hpp"
#include "geocsp/model.hpp"
#include "geocsp/nn/pca.hpp"

namespace geocsp::analysis {

struct Bucket {
  int key = 0;
  std::size_t total = 0;
  std::size_t success = 0;
  double rate() const { return total ? static_cast<double>(success) / static_cast<double>(total) : 0.0; }
};

/// Point success by solver depth (unknown points only) and complete-problem
/// success by constraint count. Buckets are sorted by key.
struct FailureBreakdown {
  std::vector<Bucket> by_depth;
  std::vector<Bucket> by_constraint_count;
};

FailureBreakdown failure_analysis(std::span<const Problem> problems, std::span<const Prediction> predictions);

/// Success rate over all buckets whose key lies in [lo, hi].
double pooled_rate(const std::vector<Bucket>& buckets, int lo, int hi);

int manhattan(GridPoint a, GridPoint b);

/// Manhattan distances of every wrongly predicted unknown point.
std::vector<int> misclassification_distances(std::span<const Problem> problems,
                                             std::span<const Prediction> predictions);

struct Histogram {
  /// counts[k] = number of errors at distance k.
  std::vector<std::size_t> counts;
  std::vector<double> frequency;
  std::size_t total = 0;
  /// Smallest most frequent distance; nullopt when empty.
  std::optional<int> mode;
};

Histogram manhattan_histogram(std::span<const int> distances);

struct CurvatureResult {
  std::vector<double> kappa;
  double mean = 0.0;
};

inline constexpr double kCurvatureEps = 1e-12;

/// For every row of `coords` (3 columns), the covariance of the row and its k
/// nearest neighbours gives kappa = lambda_min / (lambda_max + eps). A
/// neighbourhood with no spread gives 0.
CurvatureResult curvature(const Matrix& coords, int k);

/// Mean top-2 explained variance of the rows of W over every 3x3 window of
/// the n x n grid.
double local_2dness(const Matrix& W, int n);

/// PCA coordinates of W, its explained-variance spectrum and the 4-neighbour
/// grid edges (pairs of grid indices).
struct ProjectionReport {
  Matrix coords;
  std::vector<double> explained_ratio;
  std::vector<std::pair<int, int>> edges;
};

ProjectionReport project_embeddings(const Matrix& W, int n, int dims);

struct CoordProbe {
  /// In-sample fit.
  std::array<double, 2> r2{};
  /// Out-of-fold R^2 from k-fold cross-validation.
  std::array<double, 2> cv_r2{};
  /// (d + 1) x 2 least-squares weights, intercept in the last row.
  Matrix weights;
};

/// Linear regression from rows of W to their (x, y) grid coordinates.
CoordProbe coord_probe(const Matrix& W, int n, int folds = 5, std::uint64_t seed = 0);

/// Per-constraint geometric quality of 2D coordinates, each in [0, 1].
struct SquareScores {
  double area_ratio = 0.0;
  double side_uniformity = 0.0;
  double corner_angle = 0.0;
  bool degenerate = false;
};
struct TranslationScores {
  double length_ratio = 0.0;
  double parallelism = 0.0;
  bool degenerate = false;
};
struct ReflectionScores {
  double reflection_accuracy = 0.0;
  double axis_quality = 0.0;
  bool degenerate = false;
};
struct MidpointScores {
  double collinearity = 0.0;
  double midpoint_accuracy = 0.0;
  bool degenerate = false;
};

using Point2 = Eigen::Vector2d;

/// Points in argument order: square A B C D cyclic, translation B - A = D - C,
/// reflection of C across line AB is D, midpoint B of A and C.
SquareScores square_scores(const Point2& a, const Point2& b, const Point2& c, const Point2& d);
TranslationScores translation_scores(const Point2& a, const Point2& b, const Point2& c, const Point2& d);
ReflectionScores reflection_scores(const Point2& a, const Point2& b, const Point2& c, const Point2& d);
MidpointScores midpoint_scores(const Point2& a, const Point2& b, const Point2& c);

inline constexpr int kProjectionMetricCount = 9;
extern const std::array<const char*, kProjectionMetricCount> kProjectionMetricNames;

/// Mean of each of the nine scores over the constraints of a problem, with
/// the number of non-degenerate constraints that contributed. Metrics of kinds
/// absent from the problem are NaN.
struct ProjectionMetrics {
  std::array<double, kProjectionMetricCount> value{};
  std::array<int, kProjectionMetricCount> count{};
  int degenerate = 0;
};

/// `coords` has one 2D row per variable of the problem.
ProjectionMetrics projection_metrics(const Matrix& coords, std::span<const Constraint> constraints);

/// Embeddings of every variable of a traced problem at each iteration: known
/// points use their W row, unknowns their hidden state.
std::vector<Matrix> trace_point_embeddings(const Problem& p, const InferenceTrace& trace, const Matrix& W);

/// Projects each iteration's embeddings independently to 2D with PCA and
/// scores the problem's constraints. One entry per traced iteration.
std::vector<ProjectionMetrics> projection_metric_series(const Problem& p, const InferenceTrace& trace,
                                                        const Matrix& W);

void write_projection_series_csv(std::ostream& os, std::span<const ProjectionMetrics> series);

enum class ProbeTarget { Kind, Satisfied, Iteration };
std::string_view to_string(ProbeTarget t);
ProbeTarget parse_probe_target(std::string_view text);

/// Constraint hidden states with their labels, one row per (problem,
/// constraint, iteration).
struct ProbeDataset {
  Matrix features;
  std::vector<int> kind;
  std::vector<int> satisfied;
  std::vector<int> iteration;
  std::vector<int> problem;

  std::size_t size() const { return kind.size(); }
  const std::vector<int>& labels(ProbeTarget t) const;
};

/// Traces every problem for `iterations` steps and collects the constraint
/// states of iterations first_iteration..iterations.
ProbeDataset collect_constraint_states(std::span<const Problem> problems, const ModelParams& params, int iterations,
                                       std::uint64_t seed, int first_iteration = 1);

struct ProbeConfig {
  int hidden = 64;
  int epochs = 60;
  int batch_size = 64;
  double lr = 3e-3;
  double weight_decay = 1e-3;
  /// Train/validation/test shares, split by problem so no problem contributes
  /// to more than one split.
  double train_fraction = 0.7;
  double validation_fraction = 0.1;
  /// Undersample the training split to equal class counts.
  bool balance = false;
  std::uint64_t seed = 0;
};

struct ProbeModel {
  nn::Parameter w1, b1, w2, b2;
  /// Label value of each output class.
  std::vector<int> classes;
  std::vector<int> predict(const Matrix& x) const;
};

struct ProbeReport {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  /// Per class (label value, test count, accuracy).
  std::vector<int> class_labels;
  std::vector<std::size_t> class_counts;
  std::vector<double> class_accuracy;
  /// Share of test predictions within 1 and 2 of the label.
  double within1 = 0.0;
  double within2 = 0.0;
  double validation_accuracy = 0.0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
};

struct ProbeResult {
  ProbeModel model;
  ProbeReport report;
};

/// Two-layer ReLU classifier trained with AdamW on the training split; the
/// epoch with the best validation accuracy is kept and scored on the test
/// split. `groups` assigns rows to split units (e.g. problem ids).
ProbeResult train_probe(const Matrix& features, std::span<const int> labels, std::span<const int> groups,
                        const ProbeConfig& cfg);
ProbeResult train_probe(const ProbeDataset& data, ProbeTarget target, ProbeConfig cfg);

/// CSV with a header; `ids` label each row.
void export_embeddings(std::ostream& os, const Matrix& rows, const std::vector<std::string>& id_columns,
                       const std::vector<std::vector<long long>>& ids);
void export_grid_embeddings(std::ostream& os, const Matrix& W);
/// Rows (iteration, variable) over all traced states of the unknowns.
void export_trace_embeddings(std::ostream& os, const InferenceTrace& trace);
/// Reads the numeric columns after the first `id_columns` of an exported CSV.
Matrix import_embeddings(std::istream& is, int id_columns);

void write_failure_csv(std::ostream& os, const FailureBreakdown& f);
void write_histogram_csv(std::ostream& os, const Histogram& h);

}  // namespace geocsp::analysis
