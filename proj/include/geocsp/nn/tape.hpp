#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geocsp/rng.hpp"

namespace geocsp::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// A trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(const Tape* tape, int id, std::uint64_t generation) : tape_(tape), id_(id), generation_(generation) {}

  const Tape* tape_ = nullptr;
  int id_ = -1;
  std::uint64_t generation_ = 0;
};

/// Row reference used by the gather/scatter operations: row `row` of the
/// source with index `source`. A negative source stands for a zero row.
struct RowRef {
  int source = -1;
  int row = 0;
};

/// Records a forward computation over dense matrices and replays it in
/// reverse to accumulate gradients into the Parameters it read.
///
/// A Var becomes stale when the tape is cleared; using a stale Var or one from
/// another tape raises ErrorKind::Graph.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void clear();
  std::size_t size() const { return nodes_.size(); }
  /// Drops every node recorded after the first `mark` ones. Vars created
  /// after the mark must not be used again.
  void rewind(std::size_t mark);

  Var constant(Matrix value);
  /// Reads a parameter; backward() adds into `p.grad`.
  Var param(Parameter& p);

  Var add(Var a, Var b);
  Var sum(Var a);
  /// a * b^T.
  Var matmul_nt(Var a, Var b);
  /// x * w^T + bias (bias is a 1 x out row broadcast over rows).
  Var linear(Var x, Var w, Var bias);
  Var tanh(Var a);
  Var relu(Var a);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
  /// Input gates laid out as [i f g o] blocks of width h; `c` is the previous
  /// cell state. Returns [h' | c'] (rows x 2h).
  Var lstm_pointwise(Var gates, Var c);
  /// Inverted dropout with a freshly drawn mask; identity when rate == 0.
  Var dropout(Var a, double rate, Rng& rng);
  /// Output row i is the concatenation of refs[i*slots .. i*slots+slots)
  /// taken from `sources` (all with `width` columns).
  Var gather_slots(std::span<const Var> sources, std::span<const RowRef> refs, int slots, Eigen::Index width);
  /// Output row i is the sum of rows refs[offsets[i] .. offsets[i+1]).
  Var scatter_sum(std::span<const Var> sources, std::span<const int> offsets, std::span<const RowRef> refs,
                  Eigen::Index width);
  /// Mean over rows of -log softmax(logits)[target]. 1 x 1.
  Var softmax_cross_entropy(Var logits, std::span<const int> targets);

  /// Reverse sweep from a 1 x 1 loss.
  void backward(Var loss);

  const Matrix& value(const Var& v) const;

 private:
  enum class Op : std::uint8_t {
    Constant, Param, Add, Sum, MatMulNT, Linear, Tanh, Relu, SliceCols, LstmPointwise, Dropout,
    GatherSlots, ScatterSum, SoftmaxCrossEntropy,
  };

  struct Node {
    Op op = Op::Constant;
    std::vector<int> inputs;
    Matrix value;
    Matrix aux;
    Parameter* param = nullptr;
    std::vector<RowRef> refs;
    std::vector<int> ints;
    Eigen::Index a = 0;
    Eigen::Index b = 0;
  };

  int check(const Var& v) const;
  Var push(Node node);
  Matrix& grad_of(std::vector<Matrix>& grads, int id);

  std::vector<Node> nodes_;
  std::uint64_t generation_ = 1;
};

}  // namespace geocsp::nn
