#include <cmath>

#include "doctest.h"
#include "geocsp/error.hpp"
#include "geocsp/nn/cells.hpp"
#include "geocsp/nn/optim.hpp"
#include "geocsp/nn/pca.hpp"

using namespace geocsp;
using namespace geocsp::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  std::normal_distribution<double> n(0.0, scale);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("lstm cell parameter counts") {
  CHECK(cell_param_count(CellKind::Lstm, 512, 128) == 328704);
  CHECK(cell_param_count(CellKind::Lstm, 128, 128) == 132096);
  CHECK(make_cell(CellKind::Lstm, 512, 128, "u").param_count() == 328704);
  CHECK(make_cell(CellKind::Rnn, 128, 128, "u").param_count() == 33024);
}

TEST_CASE("lstm cell with zero parameters and inputs is zero") {
  const CellParams p = make_cell(CellKind::Lstm, 3, 2, "u");
  const auto [h, c] = lstm_cell(Matrix::Zero(1, 3), Matrix::Zero(1, 2), Matrix::Zero(1, 2), p);
  CHECK(h.isZero(0.0));
  CHECK(c.isZero(0.0));
}

TEST_CASE("one-unit lstm matches scalar gate arithmetic") {
  CellParams p = make_cell(CellKind::Lstm, 1, 1, "u");
  Rng rng(4);
  init_cell_uniform(p, rng);
  const double x = 0.7, h = -0.3, c = 0.45;
  auto pre = [&](int g) {
    return p.w_ih.value(g, 0) * x + p.b_ih.value(0, g) + p.w_hh.value(g, 0) * h + p.b_hh.value(0, g);
  };
  const double i = sigmoid(pre(0)), f = sigmoid(pre(1)), g = std::tanh(pre(2)), o = sigmoid(pre(3));
  const double c2 = f * c + i * g;
  const double h2 = o * std::tanh(c2);
  const auto [hh, cc] = lstm_cell(Matrix::Constant(1, 1, x), Matrix::Constant(1, 1, h), Matrix::Constant(1, 1, c), p);
  CHECK(std::abs(hh(0, 0) - h2) < 1e-12);
  CHECK(std::abs(cc(0, 0) - c2) < 1e-12);

  Tape tape;
  const CellState s = cell_step(tape, bind_cell(tape, p), tape.constant(Matrix::Constant(1, 1, x)),
                                {tape.constant(Matrix::Constant(1, 1, h)), tape.constant(Matrix::Constant(1, 1, c))});
  CHECK(std::abs(s.h.value()(0, 0) - h2) < 1e-12);
  CHECK(std::abs(s.c.value()(0, 0) - c2) < 1e-12);
}

TEST_CASE("rnn cell is tanh of the two affine maps") {
  CellParams p = make_cell(CellKind::Rnn, 2, 3, "r");
  Rng rng(8);
  init_cell_uniform(p, rng);
  const Matrix x = random_matrix(4, 2, rng), h = random_matrix(4, 3, rng);
  const Matrix expect = (x * p.w_ih.value.transpose() + h * p.w_hh.value.transpose()).rowwise() +
                        (p.b_ih.value.row(0) + p.b_hh.value.row(0));
  CHECK((rnn_cell(x, h, p) - expect.array().tanh().matrix()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("cells reject mismatched shapes") {
  const CellParams p = make_cell(CellKind::Lstm, 3, 2, "u");
  try {
    lstm_cell(Matrix::Zero(1, 4), Matrix::Zero(1, 2), Matrix::Zero(1, 2), p);
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
  }
}

TEST_CASE("gradient of a sum of parameters is all ones") {
  Parameter a("a", Matrix::Constant(2, 3, 0.5));
  Parameter b("b", Matrix::Constant(2, 3, -1.0));
  Tape tape;
  tape.backward(tape.sum(tape.add(tape.param(a), tape.param(b))));
  CHECK(a.grad.isOnes(0.0));
  CHECK(b.grad.isOnes(0.0));
}

TEST_CASE("cross-entropy gradient at uniform logits is softmax minus one-hot") {
  Parameter z("z", Matrix::Zero(1, 5));
  Tape tape;
  const std::vector<int> target{2};
  const Var loss = tape.softmax_cross_entropy(tape.param(z), target);
  CHECK(loss.value()(0, 0) == doctest::Approx(std::log(5.0)));
  tape.backward(loss);
  for (int k = 0; k < 5; ++k) CHECK(z.grad(0, k) == doctest::Approx(0.2 - (k == 2 ? 1.0 : 0.0)));
}

TEST_CASE("softmax probabilities sum to one") {
  Rng rng(3);
  Parameter z("z", random_matrix(6, 40, rng, 10.0));
  Tape tape;
  const std::vector<int> t{0, 1, 2, 3, 4, 5};
  tape.backward(tape.softmax_cross_entropy(tape.param(z), t));
  // Row sums of (softmax - onehot) / rows vanish iff the softmax sums to one.
  for (Eigen::Index r = 0; r < 6; ++r) CHECK(std::abs(z.grad.row(r).sum()) < 1e-12);
}

TEST_CASE("stale and foreign vars raise graph errors") {
  Tape t1, t2;
  const Var a = t1.constant(Matrix::Ones(1, 1));
  auto expect_graph = [](auto&& f) {
    try {
      f();
      FAIL("expected a graph error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Graph);
    }
  };
  expect_graph([&] { t2.sum(a); });
  t1.clear();
  expect_graph([&] { t1.sum(a); });
  Tape t3;
  const Var m = t3.constant(Matrix::Ones(2, 2));
  expect_graph([&] { t3.backward(m); });
}

namespace {

double composite_loss(std::vector<Parameter*> ps, Rng rng, bool backward) {
  Parameter& w = *ps[0];
  Parameter& b = *ps[1];
  Parameter& x = *ps[2];
  Tape tape;
  const Var vw = tape.param(w), vb = tape.param(b), vx = tape.param(x);
  const Var lin = tape.linear(vx, vw, vb);
  const Var c = tape.slice_cols(lin, 0, 2);
  const Var hc = tape.lstm_pointwise(lin, tape.tanh(c));
  const Var h = tape.dropout(tape.slice_cols(hc, 0, 2), 0.3, rng);
  const std::array<Var, 2> sources{tape.relu(h), tape.slice_cols(hc, 2, 2)};
  const std::vector<RowRef> refs{{0, 0}, {1, 2}, {-1, 0}, {1, 1}, {0, 2}, {0, 1}};
  const Var g = tape.gather_slots(sources, refs, 2, 2);
  const std::vector<int> offs{0, 2, 3};
  const std::vector<RowRef> srefs{{0, 0}, {0, 2}, {0, 1}};
  const std::array<Var, 1> gs{g};
  const Var s = tape.scatter_sum(gs, offs, srefs, 4);
  const Var logits = tape.matmul_nt(s, tape.slice_cols(vw, 0, 4));
  const std::vector<int> t{3, 5};
  const Var loss = tape.add(tape.softmax_cross_entropy(logits, t), tape.sum(tape.tanh(hc)));
  if (backward) tape.backward(loss);
  return loss.value()(0, 0);
}

}  // namespace

TEST_CASE("every tape operation agrees with central differences") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    Parameter w("w", random_matrix(8, 5, rng, 0.5));
    Parameter b("b", random_matrix(1, 8, rng, 0.5));
    Parameter x("x", random_matrix(3, 5, rng));
    std::vector<Parameter*> ps{&w, &b, &x};
    const Rng drop(seed * 77);
    composite_loss(ps, drop, true);
    for (Parameter* p : ps) {
      for (Eigen::Index i = 0; i < p->value.size(); ++i) {
        const double old = p->value.data()[i];
        const double h = 1e-5;
        p->value.data()[i] = old + h;
        const double up = composite_loss(ps, drop, false);
        p->value.data()[i] = old - h;
        const double down = composite_loss(ps, drop, false);
        p->value.data()[i] = old;
        const double fd = (up - down) / (2 * h);
        const double an = p->grad.data()[i];
        CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4}) < 1e-5);
      }
    }
  }
}

TEST_CASE("dropout") {
  Rng rng(1);
  Tape tape;
  const Var a = tape.constant(random_matrix(50, 40, rng));
  CHECK(tape.dropout(a, 0.0, rng).value() == a.value());
  const Matrix d = tape.dropout(a, 0.5, rng).value();
  int zeros = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d.data()[i] == 0.0) {
      ++zeros;
    } else {
      CHECK(d.data()[i] == doctest::Approx(2.0 * a.value().data()[i]));
    }
  }
  CHECK(zeros > 800);
  CHECK(zeros < 1200);
  CHECK_THROWS_AS(tape.dropout(a, 1.0, rng), Error);
}

TEST_CASE("adamw") {
  SUBCASE("zero gradient decays weights only") {
    Parameter w("w", Matrix::Constant(2, 2, 3.0));
    AdamW opt({&w}, {0.9, 0.999, 1e-8, 0.01});
    opt.step(0.1);
    CHECK(w.value.isApproxToConstant(3.0 * (1.0 - 0.1 * 0.01), 1e-15));
    for (int k = 0; k < 5; ++k) opt.step(0.1);
    CHECK(opt.first_moments()[0].isZero(0.0));
    CHECK(opt.second_moments()[0].isZero(0.0));
  }
  SUBCASE("scalar recurrence") {
    Parameter w("w", Matrix::Constant(1, 1, 0.5));
    const double lr = 1e-2, wd = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    AdamW opt({&w}, {b1, b2, eps, wd});
    double ref = 0.5, m = 0.0, v = 0.0;
    const double grads[] = {1.0, -0.5, 0.25};
    for (int t = 1; t <= 3; ++t) {
      w.grad(0, 0) = grads[t - 1];
      opt.step(lr);
      ref *= 1.0 - lr * wd;
      m = b1 * m + (1 - b1) * grads[t - 1];
      v = b2 * v + (1 - b2) * grads[t - 1] * grads[t - 1];
      ref -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
      CHECK(std::abs(w.value(0, 0) - ref) < 1e-15);
    }
    // First step from zero moments with g = 1 moves by lr (up to eps).
    Parameter u("u", Matrix::Zero(1, 1));
    AdamW one({&u}, {b1, b2, eps, 0.0});
    u.grad(0, 0) = 1.0;
    one.step(lr);
    CHECK(u.value(0, 0) == doctest::Approx(-lr / (1.0 + eps)).epsilon(1e-12));
  }
  SUBCASE("non-finite gradients abort without touching weights") {
    Parameter w("w", Matrix::Constant(1, 2, 1.0));
    AdamW opt({&w}, {});
    w.grad(0, 1) = std::nan("");
    try {
      opt.step(0.1);
      FAIL("expected a training abort");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::TrainingAbort);
    }
    CHECK(w.value.isOnes(0.0));
  }
}

TEST_CASE("gradient clipping") {
  Parameter a("a", Matrix::Zero(1, 2));
  a.grad << 3.0, 4.0;
  CHECK(clip_global_norm({&a}, 10.0) == doctest::Approx(5.0));
  CHECK(a.grad(0, 0) == 3.0);
  CHECK(clip_global_norm({&a}, 0.65) == doctest::Approx(5.0));
  CHECK(a.grad.norm() == doctest::Approx(0.65).epsilon(1e-6));
}

TEST_CASE("ema") {
  Parameter a("a", Matrix::Constant(1, 1, 2.0));
  Ema copy({&a}, 0.0);
  a.value(0, 0) = 5.0;
  copy.update({&a});
  CHECK(copy.shadow()[0](0, 0) == 5.0);
  Ema slow({&a}, 0.99);
  a.value(0, 0) = 6.0;
  slow.update({&a});
  CHECK(slow.shadow()[0](0, 0) == doctest::Approx(0.99 * 5.0 + 0.01 * 6.0));
  CHECK_THROWS_AS(Ema({&a}, 1.0), Error);
}

TEST_CASE("cosine cycle schedule") {
  CHECK(cosine_cycle_lr(0) == doctest::Approx(1e-3));
  CHECK(cosine_cycle_lr(15) == doctest::Approx(9e-4));
  CHECK(cosine_cycle_lr(30) == doctest::Approx(8.1e-4));
  CHECK(cosine_cycle_lr(7.5) == doctest::Approx((1e-3 + 1e-4) / 2));
  CHECK(cosine_cycle_lr(14.999) == doctest::Approx(1e-4).epsilon(1e-3));
  CHECK(cosine_cycle_lr(22.5) == doctest::Approx((9e-4 + 9e-5) / 2));
  CHECK_THROWS_AS(cosine_cycle_lr(-1), Error);
}

TEST_CASE("pca") {
  SUBCASE("points on a line") {
    Matrix pts(12, 10);
    Rng rng(2);
    const Matrix dir = random_matrix(1, 10, rng);
    for (int i = 0; i < 12; ++i) pts.row(i) = (i * 0.3 - 1.0) * dir;
    const PcaResult r = pca(pts, 2);
    CHECK(r.explained_ratio[0] == doctest::Approx(1.0));
    CHECK(r.explained_ratio[1] == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("planar grid") {
    Matrix pts(25, 4);
    for (int i = 0; i < 25; ++i) pts.row(i) << i % 5, i / 5, 0.0, 0.0;
    const PcaResult r = pca(pts, 2);
    CHECK(r.explained_ratio[0] + r.explained_ratio[1] == doctest::Approx(1.0));
  }
  SUBCASE("matches a direct eigendecomposition") {
    Rng rng(7);
    Matrix pts = random_matrix(20, 5, rng);
    pts.col(1) *= 3.0;
    pts.col(3) *= 2.0;
    const PcaResult r = pca(pts, 3);
    const Matrix centered = pts.rowwise() - pts.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / 19.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(cov);
    std::vector<std::pair<double, Eigen::VectorXd>> eig;
    for (int i = 0; i < 5; ++i) eig.emplace_back(es.eigenvalues()(i).real(), es.eigenvectors().col(i).real());
    std::sort(eig.begin(), eig.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (int j = 0; j < 3; ++j) {
      CHECK(r.eigenvalues[j] == doctest::Approx(eig[j].first));
      const Eigen::VectorXd proj = centered * eig[j].second.normalized();
      const double sign = proj.dot(r.coords.col(j)) < 0 ? -1.0 : 1.0;
      CHECK((sign * proj - r.coords.col(j)).cwiseAbs().maxCoeff() < 1e-9);
      Eigen::Index arg;
      r.components.row(j).cwiseAbs().maxCoeff(&arg);
      CHECK(r.components(j, arg) > 0);
    }
  }
  CHECK_THROWS_AS(pca(Matrix::Zero(2, 3), 2), Error);
}
