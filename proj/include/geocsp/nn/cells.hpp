#pragma once

#include <string>
#include <string_view>
#include <utility>

#include "geocsp/nn/tape.hpp"

namespace geocsp::nn {

enum class CellKind { Lstm, Rnn };

std::string_view to_string(CellKind kind);
CellKind parse_cell_kind(std::string_view text);

/// Number of gate blocks: 4 for the LSTM (i, f, g, o), 1 for the tanh RNN.
constexpr int gate_count(CellKind kind) { return kind == CellKind::Lstm ? 4 : 1; }

/// Recurrent cell weights with separate input and hidden biases.
struct CellParams {
  CellKind kind = CellKind::Lstm;
  int input = 0;
  int hidden = 0;
  Parameter w_ih;  // (gates*hidden) x input
  Parameter w_hh;  // (gates*hidden) x hidden
  Parameter b_ih;  // 1 x (gates*hidden)
  Parameter b_hh;  // 1 x (gates*hidden)

  std::size_t param_count() const { return w_ih.size() + w_hh.size() + b_ih.size() + b_hh.size(); }
};

/// Zero-initialized cell; parameter names get `prefix` prepended.
CellParams make_cell(CellKind kind, int input, int hidden, const std::string& prefix);
/// Uniform(-1/sqrt(hidden), 1/sqrt(hidden)) on every weight and bias.
void init_cell_uniform(CellParams& cell, Rng& rng);

constexpr std::size_t cell_param_count(CellKind kind, std::size_t input, std::size_t hidden) {
  return static_cast<std::size_t>(gate_count(kind)) * (input * hidden + hidden * hidden + 2 * hidden);
}

/// One LSTM step over a batch of rows. Returns (h', c').
std::pair<Matrix, Matrix> lstm_cell(const Matrix& x, const Matrix& h, const Matrix& c, const CellParams& p);
/// One tanh RNN step: h' = tanh(W_ih x + b_ih + W_hh h + b_hh).
Matrix rnn_cell(const Matrix& x, const Matrix& h, const CellParams& p);

/// A cell's parameters registered on a tape once per forward pass.
struct CellVars {
  CellKind kind = CellKind::Lstm;
  int hidden = 0;
  Var w_ih, w_hh, b_ih, b_hh;
};

CellVars bind_cell(Tape& tape, CellParams& p);
/// Records the weights as constants; no gradient is accumulated.
CellVars bind_cell(Tape& tape, const CellParams& p);

struct CellState {
  Var h;
  Var c;  // unused by the RNN cell
};

/// Taped counterpart of lstm_cell / rnn_cell.
CellState cell_step(Tape& tape, const CellVars& cell, Var x, const CellState& prev);

}  // namespace geocsp::nn
