#include "geocsp/nn/tape.hpp"

#include <cmath>

#include "geocsp/error.hpp"

namespace geocsp::nn {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require(bool ok, const std::string& msg) {
  if (!ok) fail(ErrorKind::Dimension, msg);
}

}  // namespace

const Matrix& Var::value() const {
  if (!tape_) fail(ErrorKind::Graph, "use of an empty Var");
  return tape_->value(*this);
}

void Tape::clear() {
  nodes_.clear();
  ++generation_;
}

void Tape::rewind(std::size_t mark) {
  if (mark > nodes_.size()) fail(ErrorKind::Graph, "rewind past the end of the tape");
  nodes_.resize(mark);
}

int Tape::check(const Var& v) const {
  if (v.tape_ != this) fail(ErrorKind::Graph, "Var belongs to a different tape");
  if (v.generation_ != generation_ || v.id_ < 0 || v.id_ >= static_cast<int>(nodes_.size())) {
    fail(ErrorKind::Graph, "stale Var used after the tape was cleared");
  }
  return v.id_;
}

const Matrix& Tape::value(const Var& v) const { return nodes_[check(v)].value; }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1, generation_);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.op = Op::Param;
  n.value = p.value;
  n.param = &p;
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  const Matrix& va = nodes_[ia].value;
  const Matrix& vb = nodes_[ib].value;
  require(va.rows() == vb.rows() && va.cols() == vb.cols(), "add: shape mismatch");
  Node n;
  n.op = Op::Add;
  n.inputs = {ia, ib};
  n.value = va + vb;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const int ia = check(a);
  Node n;
  n.op = Op::Sum;
  n.inputs = {ia};
  n.value = Matrix::Constant(1, 1, nodes_[ia].value.sum());
  return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
  const int ia = check(a), ib = check(b);
  require(nodes_[ia].value.cols() == nodes_[ib].value.cols(), "matmul_nt: inner dimension mismatch");
  Node n;
  n.op = Op::MatMulNT;
  n.inputs = {ia, ib};
  n.value.noalias() = nodes_[ia].value * nodes_[ib].value.transpose();
  return push(std::move(n));
}

Var Tape::linear(Var x, Var w, Var bias) {
  const int ix = check(x), iw = check(w), ib = check(bias);
  const Matrix& vx = nodes_[ix].value;
  const Matrix& vw = nodes_[iw].value;
  const Matrix& vb = nodes_[ib].value;
  require(vx.cols() == vw.cols(), "linear: input width does not match weight");
  require(vb.rows() == 1 && vb.cols() == vw.rows(), "linear: bias shape mismatch");
  Node n;
  n.op = Op::Linear;
  n.inputs = {ix, iw, ib};
  n.value.noalias() = vx * vw.transpose();
  n.value.rowwise() += vb.row(0);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  const int ia = check(a);
  Node n;
  n.op = Op::Tanh;
  n.inputs = {ia};
  n.value = nodes_[ia].value.array().tanh().matrix();
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  const int ia = check(a);
  Node n;
  n.op = Op::Relu;
  n.inputs = {ia};
  n.value = nodes_[ia].value.cwiseMax(0.0);
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  const int ia = check(a);
  const Matrix& va = nodes_[ia].value;
  require(start >= 0 && count >= 0 && start + count <= va.cols(), "slice_cols: range out of bounds");
  Node n;
  n.op = Op::SliceCols;
  n.inputs = {ia};
  n.a = start;
  n.b = count;
  n.value = va.middleCols(start, count);
  return push(std::move(n));
}

Var Tape::lstm_pointwise(Var gates, Var c) {
  const int ig = check(gates), ic = check(c);
  const Matrix& g = nodes_[ig].value;
  const Matrix& cp = nodes_[ic].value;
  const Eigen::Index h = cp.cols();
  require(g.cols() == 4 * h && g.rows() == cp.rows(), "lstm_pointwise: gate/cell shape mismatch");
  Node n;
  n.op = Op::LstmPointwise;
  n.inputs = {ig, ic};
  n.aux.resize(g.rows(), 5 * h);  // activated i, f, g, o and tanh(c')
  n.value.resize(g.rows(), 2 * h);
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    const double* in = g.row(r).data();
    double* act = n.aux.row(r).data();
    double* out = n.value.row(r).data();
    const double* cprev = cp.row(r).data();
    for (Eigen::Index k = 0; k < h; ++k) {
      const double ig_ = sigmoid(in[k]);
      const double fg = sigmoid(in[h + k]);
      const double gg = std::tanh(in[2 * h + k]);
      const double og = sigmoid(in[3 * h + k]);
      const double cn = fg * cprev[k] + ig_ * gg;
      const double tc = std::tanh(cn);
      act[k] = ig_;
      act[h + k] = fg;
      act[2 * h + k] = gg;
      act[3 * h + k] = og;
      act[4 * h + k] = tc;
      out[k] = og * tc;
      out[h + k] = cn;
    }
  }
  return push(std::move(n));
}

Var Tape::dropout(Var a, double rate, Rng& rng) {
  const int ia = check(a);
  if (rate < 0.0 || rate >= 1.0) fail(ErrorKind::Config, "dropout rate must lie in [0, 1)");
  if (rate == 0.0) return a;
  const Matrix& va = nodes_[ia].value;
  Node n;
  n.op = Op::Dropout;
  n.inputs = {ia};
  n.aux.resize(va.rows(), va.cols());
  const double keep = 1.0 / (1.0 - rate);
  std::bernoulli_distribution drop(rate);
  for (Eigen::Index i = 0; i < n.aux.size(); ++i) n.aux.data()[i] = drop(rng) ? 0.0 : keep;
  n.value = va.cwiseProduct(n.aux);
  return push(std::move(n));
}

Var Tape::gather_slots(std::span<const Var> sources, std::span<const RowRef> refs, int slots, Eigen::Index width) {
  require(slots > 0 && refs.size() % static_cast<std::size_t>(slots) == 0, "gather_slots: refs not a multiple of slots");
  Node n;
  n.op = Op::GatherSlots;
  for (const Var& s : sources) {
    n.inputs.push_back(check(s));
    require(nodes_[n.inputs.back()].value.cols() == width, "gather_slots: source width mismatch");
  }
  n.refs.assign(refs.begin(), refs.end());
  n.a = slots;
  const Eigen::Index rows = static_cast<Eigen::Index>(refs.size()) / slots;
  n.value.setZero(rows, slots * width);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int s = 0; s < slots; ++s) {
      const RowRef& ref = refs[r * slots + s];
      if (ref.source < 0) continue;
      require(ref.source < static_cast<int>(sources.size()), "gather_slots: bad source index");
      const Matrix& src = nodes_[n.inputs[ref.source]].value;
      require(ref.row >= 0 && ref.row < src.rows(), "gather_slots: row out of range");
      n.value.block(r, s * width, 1, width) = src.row(ref.row);
    }
  }
  return push(std::move(n));
}

Var Tape::scatter_sum(std::span<const Var> sources, std::span<const int> offsets, std::span<const RowRef> refs,
                      Eigen::Index width) {
  require(!offsets.empty() && offsets.front() == 0 && static_cast<std::size_t>(offsets.back()) == refs.size(),
          "scatter_sum: offsets do not cover refs");
  Node n;
  n.op = Op::ScatterSum;
  for (const Var& s : sources) {
    n.inputs.push_back(check(s));
    require(nodes_[n.inputs.back()].value.cols() == width, "scatter_sum: source width mismatch");
  }
  n.refs.assign(refs.begin(), refs.end());
  n.ints.assign(offsets.begin(), offsets.end());
  const Eigen::Index rows = static_cast<Eigen::Index>(offsets.size()) - 1;
  n.value.setZero(rows, width);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int k = offsets[r]; k < offsets[r + 1]; ++k) {
      const RowRef& ref = refs[k];
      if (ref.source < 0) continue;
      require(ref.source < static_cast<int>(sources.size()), "scatter_sum: bad source index");
      const Matrix& src = nodes_[n.inputs[ref.source]].value;
      require(ref.row >= 0 && ref.row < src.rows(), "scatter_sum: row out of range");
      n.value.row(r) += src.row(ref.row);
    }
  }
  return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const int> targets) {
  const int il = check(logits);
  const Matrix& z = nodes_[il].value;
  require(static_cast<std::size_t>(z.rows()) == targets.size(), "softmax_cross_entropy: one target per row");
  require(z.rows() > 0, "softmax_cross_entropy: no rows");
  Node n;
  n.op = Op::SoftmaxCrossEntropy;
  n.inputs = {il};
  n.ints.assign(targets.begin(), targets.end());
  n.aux.resize(z.rows(), z.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int t = targets[r];
    require(t >= 0 && t < z.cols(), "softmax_cross_entropy: target out of range");
    const double m = z.row(r).maxCoeff();
    n.aux.row(r) = (z.row(r).array() - m).exp().matrix();
    const double s = n.aux.row(r).sum();
    n.aux.row(r) /= s;
    total += m + std::log(s) - z(r, t);
  }
  n.value = Matrix::Constant(1, 1, total / static_cast<double>(z.rows()));
  return push(std::move(n));
}

Matrix& Tape::grad_of(std::vector<Matrix>& grads, int id) {
  Matrix& g = grads[id];
  if (g.size() == 0) g.setZero(nodes_[id].value.rows(), nodes_[id].value.cols());
  return g;
}

void Tape::backward(Var loss) {
  const int root = check(loss);
  if (nodes_[root].value.rows() != 1 || nodes_[root].value.cols() != 1) {
    fail(ErrorKind::Graph, "backward needs a 1 x 1 loss");
  }
  std::vector<Matrix> grads(nodes_.size());
  grads[root] = Matrix::Ones(1, 1);

  for (int id = root; id >= 0; --id) {
    if (grads[id].size() == 0) continue;
    Node& n = nodes_[id];
    const Matrix& g = grads[id];
    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Param:
        n.param->grad += g;
        break;
      case Op::Add:
        grad_of(grads, n.inputs[0]) += g;
        grad_of(grads, n.inputs[1]) += g;
        break;
      case Op::Sum:
        grad_of(grads, n.inputs[0]).array() += g(0, 0);
        break;
      case Op::MatMulNT: {
        const Matrix& a = nodes_[n.inputs[0]].value;
        const Matrix& b = nodes_[n.inputs[1]].value;
        grad_of(grads, n.inputs[0]).noalias() += g * b;
        grad_of(grads, n.inputs[1]).noalias() += g.transpose() * a;
        break;
      }
      case Op::Linear: {
        const Matrix& x = nodes_[n.inputs[0]].value;
        const Matrix& w = nodes_[n.inputs[1]].value;
        if (nodes_[n.inputs[0]].op != Op::Constant) grad_of(grads, n.inputs[0]).noalias() += g * w;
        grad_of(grads, n.inputs[1]).noalias() += g.transpose() * x;
        grad_of(grads, n.inputs[2]) += g.colwise().sum();
        break;
      }
      case Op::Tanh:
        grad_of(grads, n.inputs[0]).array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::Relu:
        grad_of(grads, n.inputs[0]).array() += g.array() * (n.value.array() > 0.0).cast<double>();
        break;
      case Op::SliceCols:
        grad_of(grads, n.inputs[0]).middleCols(n.a, n.b) += g;
        break;
      case Op::LstmPointwise: {
        const Eigen::Index h = n.value.cols() / 2;
        const Matrix& cprev = nodes_[n.inputs[1]].value;
        Matrix& dgates = grad_of(grads, n.inputs[0]);
        const bool want_c = nodes_[n.inputs[1]].op != Op::Constant;
        Matrix* dc = want_c ? &grad_of(grads, n.inputs[1]) : nullptr;
        for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
          const double* act = n.aux.row(r).data();
          const double* gr = g.row(r).data();
          double* dg = dgates.row(r).data();
          for (Eigen::Index k = 0; k < h; ++k) {
            const double ig = act[k], fg = act[h + k], gg = act[2 * h + k], og = act[3 * h + k], tc = act[4 * h + k];
            const double dh = gr[k];
            const double dcn = gr[h + k] + dh * og * (1.0 - tc * tc);
            dg[k] += dcn * gg * ig * (1.0 - ig);
            dg[h + k] += dcn * cprev(r, k) * fg * (1.0 - fg);
            dg[2 * h + k] += dcn * ig * (1.0 - gg * gg);
            dg[3 * h + k] += dh * tc * og * (1.0 - og);
            if (dc) (*dc)(r, k) += dcn * fg;
          }
        }
        break;
      }
      case Op::Dropout:
        grad_of(grads, n.inputs[0]) += g.cwiseProduct(n.aux);
        break;
      case Op::GatherSlots: {
        const Eigen::Index slots = n.a;
        const Eigen::Index width = g.cols() / slots;
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          for (Eigen::Index s = 0; s < slots; ++s) {
            const RowRef& ref = n.refs[r * slots + s];
            if (ref.source < 0) continue;
            const int src = n.inputs[ref.source];
            if (nodes_[src].op == Op::Constant) continue;
            grad_of(grads, src).row(ref.row) += g.block(r, s * width, 1, width);
          }
        }
        break;
      }
      case Op::ScatterSum:
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          for (int k = n.ints[r]; k < n.ints[r + 1]; ++k) {
            const RowRef& ref = n.refs[k];
            if (ref.source < 0) continue;
            const int src = n.inputs[ref.source];
            if (nodes_[src].op == Op::Constant) continue;
            grad_of(grads, src).row(ref.row) += g.row(r);
          }
        }
        break;
      case Op::SoftmaxCrossEntropy: {
        Matrix d = n.aux;
        for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, n.ints[r]) -= 1.0;
        grad_of(grads, n.inputs[0]) += d * (g(0, 0) / static_cast<double>(d.rows()));
        break;
      }
    }
    grads[id].resize(0, 0);
  }
}

}  // namespace geocsp::nn
