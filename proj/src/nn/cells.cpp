#include "geocsp/nn/cells.hpp"

#include <cmath>

#include "geocsp/error.hpp"

namespace geocsp::nn {

std::string_view to_string(CellKind kind) { return kind == CellKind::Lstm ? "lstm" : "rnn"; }

CellKind parse_cell_kind(std::string_view text) {
  if (text == "lstm") return CellKind::Lstm;
  if (text == "rnn") return CellKind::Rnn;
  fail(ErrorKind::Config, "unknown cell kind '" + std::string(text) + "' (expected lstm or rnn)");
}

CellParams make_cell(CellKind kind, int input, int hidden, const std::string& prefix) {
  CellParams p;
  p.kind = kind;
  p.input = input;
  p.hidden = hidden;
  const int g = gate_count(kind) * hidden;
  p.w_ih = Parameter(prefix + ".w_ih", Matrix::Zero(g, input));
  p.w_hh = Parameter(prefix + ".w_hh", Matrix::Zero(g, hidden));
  p.b_ih = Parameter(prefix + ".b_ih", Matrix::Zero(1, g));
  p.b_hh = Parameter(prefix + ".b_hh", Matrix::Zero(1, g));
  return p;
}

void init_cell_uniform(CellParams& cell, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(cell.hidden));
  std::uniform_real_distribution<double> dist(-k, k);
  for (Parameter* p : {&cell.w_ih, &cell.w_hh, &cell.b_ih, &cell.b_hh}) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = dist(rng);
  }
}

namespace {

Matrix pre_activation(const Matrix& x, const Matrix& h, const CellParams& p) {
  if (x.cols() != p.input || h.cols() != p.hidden || x.rows() != h.rows()) {
    fail(ErrorKind::Dimension, "cell input shapes do not match the cell parameters");
  }
  Matrix pre = x * p.w_ih.value.transpose() + h * p.w_hh.value.transpose();
  pre.rowwise() += p.b_ih.value.row(0) + p.b_hh.value.row(0);
  return pre;
}

}  // namespace

std::pair<Matrix, Matrix> lstm_cell(const Matrix& x, const Matrix& h, const Matrix& c, const CellParams& p) {
  if (p.kind != CellKind::Lstm) fail(ErrorKind::Config, "lstm_cell needs LSTM parameters");
  if (c.rows() != h.rows() || c.cols() != p.hidden) fail(ErrorKind::Dimension, "cell state shape mismatch");
  const Matrix pre = pre_activation(x, h, p);
  const Eigen::Index H = p.hidden;
  using Array = Eigen::ArrayXXd;
  auto sig = [&](Eigen::Index block) -> Array { return (1.0 + (-pre.middleCols(block * H, H).array()).exp()).inverse(); };
  const Array i = sig(0);
  const Array f = sig(1);
  const Array g = pre.middleCols(2 * H, H).array().tanh();
  const Array o = sig(3);
  Matrix c2 = (f * c.array() + i * g).matrix();
  Matrix h2 = (o * c2.array().tanh()).matrix();
  return {std::move(h2), std::move(c2)};
}

Matrix rnn_cell(const Matrix& x, const Matrix& h, const CellParams& p) {
  if (p.kind != CellKind::Rnn) fail(ErrorKind::Config, "rnn_cell needs RNN parameters");
  return pre_activation(x, h, p).array().tanh().matrix();
}

CellVars bind_cell(Tape& tape, CellParams& p) {
  return {p.kind, p.hidden, tape.param(p.w_ih), tape.param(p.w_hh), tape.param(p.b_ih), tape.param(p.b_hh)};
}

CellVars bind_cell(Tape& tape, const CellParams& p) {
  return {p.kind, p.hidden, tape.constant(p.w_ih.value), tape.constant(p.w_hh.value), tape.constant(p.b_ih.value),
          tape.constant(p.b_hh.value)};
}

CellState cell_step(Tape& tape, const CellVars& cell, Var x, const CellState& prev) {
  const Var pre = tape.add(tape.linear(x, cell.w_ih, cell.b_ih), tape.linear(prev.h, cell.w_hh, cell.b_hh));
  if (cell.kind == CellKind::Rnn) return {tape.tanh(pre), prev.c};
  const Var hc = tape.lstm_pointwise(pre, prev.c);
  return {tape.slice_cols(hc, 0, cell.hidden), tape.slice_cols(hc, cell.hidden, cell.hidden)};
}

}  // namespace geocsp::nn
