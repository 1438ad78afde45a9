#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "graphfit/ad/gradcheck.hpp"
#include "graphfit/ad/tape.hpp"
#include "graphfit/common.hpp"

using namespace graphfit;
using namespace graphfit::ad;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Keep entries away from ties/kinks: resample until pairwise gaps exceed
// the margin.
Tensor kink_free_tensor(Rng& rng, Shape shape, double margin = 1e-3) {
  Tensor t = random_tensor(rng, shape);
  for (std::int64_t i = 0; i < t.size(); ++i) {
    bool ok = false;
    while (!ok) {
      ok = std::abs(t[i]) > margin;
      for (std::int64_t j = 0; ok && j < i; ++j)
        if (std::abs(t[i] - t[j]) < margin) ok = false;
      if (!ok) t[i] = rng.uniform(-1.0, 1.0);
    }
  }
  return t;
}

}  // namespace

TEST_CASE("forward semantics: listed examples") {
  Tape tape;
  // reduce_max of (3, -1, 2) is 3; backward routes only to index 0.
  Parameter p("p", Tensor({3}, {3.0, -1.0, 2.0}));
  const auto x = tape.param(p);
  const auto m = tape.reduce_max(x, 0);
  CHECK(tape.value(m).item() == 3.0);
  tape.backward(m);
  CHECK(p.grad[0] == 1.0);
  CHECK(p.grad[1] == 0.0);
  CHECK(p.grad[2] == 0.0);

  Tape t2;
  CHECK(t2.value(t2.sigmoid(t2.constant(Tensor::scalar(0.0)))).item() == 0.5);

  const auto a = t2.constant(Tensor::zeros({4, 3}));
  const auto b = t2.constant(Tensor::zeros({4, 5}));
  const auto c = t2.concat({a, b}, 1);
  CHECK(t2.value(c).shape() == Shape{4, 8});
}

TEST_CASE("backward: sum and sigmoid-times-x examples") {
  Parameter p("p", Tensor({5}, {1, 2, 3, 4, 5}));
  Tape tape;
  p.zero_grad();
  tape.backward(tape.reduce_sum_all(tape.param(p)));
  for (int i = 0; i < 5; ++i) CHECK(p.grad[i] == 1.0);

  // loss = sigmoid(w) * x at w=0, x=2 has dL/dw = 0.25 * 2 = 0.5.
  Parameter w("w", Tensor::scalar(0.0));
  Tape t2;
  w.zero_grad();
  const auto loss = t2.mul(t2.sigmoid(t2.param(w)), t2.constant(Tensor::scalar(2.0)));
  t2.backward(loss);
  CHECK(w.grad[0] == doctest::Approx(0.5));
}

TEST_CASE("backward rejects non-scalar loss") {
  Tape tape;
  const auto v = tape.constant(Tensor::zeros({3}));
  CHECK_THROWS_AS(tape.backward(v), ShapeError);
}

TEST_CASE("shape errors carry both shapes") {
  Tape tape;
  const auto a = tape.constant(Tensor::zeros({2, 3}));
  const auto b = tape.constant(Tensor::zeros({2, 4}));
  try {
    tape.matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2,3)") != std::string::npos);
    CHECK(msg.find("(2,4)") != std::string::npos);
  }
}

TEST_CASE("solve_spd: forward examples") {
  Tape tape;
  const auto eye = tape.constant(Tensor::identity(3));
  const auto b = tape.constant(Tensor({3}, {1, 2, 3}));
  const auto x = tape.solve_spd(eye, b);
  CHECK(tape.value(x)[0] == doctest::Approx(1.0));
  CHECK(tape.value(x)[1] == doctest::Approx(2.0));
  CHECK(tape.value(x)[2] == doctest::Approx(3.0));

  const auto d = tape.constant(Tensor({2, 2}, {2, 0, 0, 4}));
  const auto b2 = tape.constant(Tensor({2}, {2, 4}));
  const auto x2 = tape.solve_spd(d, b2);
  CHECK(tape.value(x2)[0] == doctest::Approx(1.0));
  CHECK(tape.value(x2)[1] == doctest::Approx(1.0));

  const auto bad = tape.constant(Tensor({2, 2}, {1, 0, 0, -1}));
  CHECK_THROWS_AS(tape.solve_spd(bad, b2), ConditioningError);
  const auto asym = tape.constant(Tensor({2, 2}, {1, 0.5, 0, 1}));
  CHECK_THROWS_AS(tape.solve_spd(asym, b2), ConditioningError);
}

TEST_CASE("solve_spd: backward matches finite differences on ||x||^2") {
  Rng rng(101);
  // a = G^T G + I stays SPD under perturbation of G.
  Parameter g("g", random_tensor(rng, {6, 6}));
  Parameter b("b", random_tensor(rng, {6}));

  auto build = [&](Tape& t) {
    const auto gid = t.param(g);
    const auto a = t.add(t.matmul(t.transpose(gid), gid),
                         t.constant(Tensor::identity(6)));
    const auto x = t.solve_spd(a, t.param(b));
    return t.reduce_sum_all(t.mul(x, x));
  };
  const auto report = gradient_check(build, {&g, &b}, 1e-5);
  CHECK(report.pass);
}

TEST_CASE("solve_spd composed with matmul reproduces the rhs") {
  Rng rng(103);
  for (int trial = 0; trial < 10; ++trial) {
    Tape tape;
    Tensor gt = random_tensor(rng, {8, 8});
    const auto g = tape.constant(gt);
    const auto a = tape.add(tape.matmul(tape.transpose(g), g),
                            tape.constant(Tensor::identity(8)));
    Tensor bt = random_tensor(rng, {8});
    const auto b = tape.constant(bt);
    const auto x = tape.solve_spd(a, b);
    const auto ax = tape.matmul(tape.value(a).rank() == 2 ? a : a,
                                tape.reshape(x, {8, 1}));
    double binf = 0.0, rinf = 0.0;
    for (int i = 0; i < 8; ++i) {
      binf = std::max(binf, std::abs(bt[i]));
      rinf = std::max(rinf, std::abs(tape.value(ax)[i] - bt[i]));
    }
    CHECK(rinf <= 1e-9 * binf);
  }
}

TEST_CASE("gradient_check passes for every op at kink-free points") {
  Rng rng(107);
  const double tol_smooth = 1e-5;
  const double tol_kinked = 1e-4;

  Parameter a("a", kink_free_tensor(rng, {4, 3}));
  Parameter b("b", kink_free_tensor(rng, {4, 3}));
  Parameter v("v", kink_free_tensor(rng, {3}));
  Parameter w("w", random_tensor(rng, {3, 5}));
  Parameter pos("pos", random_tensor(rng, {4, 3}, 0.2, 1.5));
  Parameter s("s", random_tensor(rng, {4}, 0.3, 1.2));

  auto check = [&](const char* what, std::vector<Parameter*> params,
                   const std::function<Tape::Id(Tape&)>& build, double tol) {
    INFO(what);
    const auto report = gradient_check(build, params, tol);
    CHECK(report.pass);
  };

  check("add+broadcast", {&a, &v}, [&](Tape& t) {
    return t.reduce_sum_all(t.add(t.param(a), t.param(v)));
  }, tol_smooth);
  check("sub", {&a, &b}, [&](Tape& t) {
    return t.reduce_sum_all(t.mul(t.sub(t.param(a), t.param(b)),
                                  t.sub(t.param(a), t.param(b))));
  }, tol_smooth);
  check("mul+broadcast", {&a, &v}, [&](Tape& t) {
    return t.reduce_sum_all(t.mul(t.param(a), t.param(v)));
  }, tol_smooth);
  check("div", {&a, &pos}, [&](Tape& t) {
    return t.reduce_sum_all(t.div(t.param(a), t.param(pos)));
  }, tol_smooth);
  check("matmul", {&a, &w}, [&](Tape& t) {
    return t.reduce_sum_all(t.matmul(t.param(a), t.param(w)));
  }, tol_smooth);
  check("transpose+reshape", {&a}, [&](Tape& t) {
    const auto x = t.reshape(t.transpose(t.param(a)), {4, 3});
    return t.reduce_sum_all(t.mul(x, x));
  }, tol_smooth);
  check("concat+slice", {&a, &b}, [&](Tape& t) {
    const auto c = t.concat({t.param(a), t.param(b)}, 1);
    const auto sl = t.slice(c, 1, 2, 3);
    return t.reduce_sum_all(t.mul(sl, sl));
  }, tol_smooth);
  check("gather+scale_rows", {&a, &s}, [&](Tape& t) {
    const auto g = t.gather_rows(t.param(a), {3, 0, 0, 2, 1});
    const auto sr = t.scale_rows(t.param(a), t.param(s));
    return t.add(t.reduce_sum_all(t.mul(g, g)), t.reduce_sum_all(sr));
  }, tol_smooth);
  check("cross_rows", {&a, &b}, [&](Tape& t) {
    const auto c = t.cross_rows(t.param(a), t.param(b));
    return t.reduce_sum_all(t.mul(c, c));
  }, tol_smooth);
  check("reduce_mean+reduce_sum", {&a}, [&](Tape& t) {
    const auto m = t.reduce_mean(t.param(a), 0);
    const auto sum = t.reduce_sum(t.param(a), 1);
    return t.add(t.reduce_sum_all(t.mul(m, m)), t.reduce_sum_all(t.mul(sum, sum)));
  }, tol_smooth);
  check("sigmoid+tanh", {&a}, [&](Tape& t) {
    return t.reduce_sum_all(t.mul(t.sigmoid(t.param(a)), t.tanh(t.param(a))));
  }, tol_smooth);
  check("log+sqrt", {&pos}, [&](Tape& t) {
    return t.reduce_sum_all(t.add(t.log(t.param(pos)), t.sqrt(t.param(pos))));
  }, tol_smooth);
  check("scale+add_scalar", {&a}, [&](Tape& t) {
    return t.reduce_sum_all(t.add_scalar(t.scale(t.param(a), 2.5), -0.75));
  }, tol_smooth);
  check("reduce_max", {&a}, [&](Tape& t) {
    const auto m = t.reduce_max(t.param(a), 0);
    return t.reduce_sum_all(t.mul(m, m));
  }, tol_kinked);
  check("leaky_relu", {&a}, [&](Tape& t) {
    return t.reduce_sum_all(t.leaky_relu(t.param(a), 0.01));
  }, tol_kinked);
  check("clamp_min", {&a}, [&](Tape& t) {
    return t.reduce_sum_all(t.clamp_min(t.param(a), 0.1));
  }, tol_kinked);
  check("solve_spd", {&w}, [&](Tape& t) {
    const auto wid = t.param(w);
    const auto a3 = t.add(t.matmul(t.transpose(wid), wid),
                          t.constant(Tensor::identity(5)));
    const auto x = t.solve_spd(a3, t.constant(Tensor({5}, {1, -1, 2, 0.5, -0.25})));
    return t.reduce_sum_all(t.mul(x, x));
  }, tol_smooth);
}

TEST_CASE("gradient_check: batch_norm in both modes") {
  Rng rng(109);
  Parameter x("x", kink_free_tensor(rng, {6, 4}));
  Parameter gamma("gamma", random_tensor(rng, {4}, 0.5, 1.5));
  Parameter beta("beta", random_tensor(rng, {4}, -0.5, 0.5));

  // Mix the normalized output through fixed random weights; a plain sum of
  // squares is analytically independent of x in training mode (the batch
  // statistics absorb it) and would only compare finite-difference noise.
  const Tensor mix = kink_free_tensor(rng, {4, 3});

  for (bool training : {true, false}) {
    BatchNormState state(4);
    // Non-trivial frozen statistics for the inference path.
    for (int j = 0; j < 4; ++j) {
      state.running_mean[j] = 0.1 * j;
      state.running_var[j] = 1.0 + 0.2 * j;
    }
    auto build = [&](Tape& t) {
      BatchNormState local = state;  // keep probes from drifting the stats
      const auto y = t.batch_norm(t.param(x), t.param(gamma), t.param(beta),
                                  local, training);
      const auto z = t.matmul(y, t.constant(mix));
      return t.reduce_sum_all(t.mul(z, t.sigmoid(z)));
    };
    INFO("training=", training);
    const auto report = gradient_check(build, {&x, &gamma, &beta}, 1e-5);
    CHECK(report.pass);
  }
}

TEST_CASE("batch_norm updates running statistics in training mode only") {
  Rng rng(113);
  Tensor xt = random_tensor(rng, {8, 3}, -2.0, 2.0);
  Parameter gamma("g", Tensor::full({3}, 1.0));
  Parameter beta("b", Tensor::zeros({3}));
  BatchNormState state(3);

  Tape tape;
  tape.batch_norm(tape.constant(xt), tape.param(gamma), tape.param(beta), state, true);
  // running = 0.9 * init + 0.1 * batch
  double mean0 = 0.0;
  for (int i = 0; i < 8; ++i) mean0 += xt[static_cast<std::int64_t>(i) * 3];
  mean0 /= 8.0;
  CHECK(state.running_mean[0] == doctest::Approx(0.1 * mean0));

  const Tensor saved_mean = state.running_mean;
  Tape t2;
  t2.batch_norm(t2.constant(xt), t2.param(gamma), t2.param(beta), state, false);
  CHECK(state.running_mean[0] == saved_mean[0]);
}

TEST_CASE("tape replay determinism: bit-identical gradients") {
  Rng rng(127);
  Parameter w("w", random_tensor(rng, {8, 8}));
  Parameter v("v", random_tensor(rng, {8}));

  auto run = [&]() {
    w.zero_grad();
    v.zero_grad();
    Tape tape;
    const auto h = tape.sigmoid(tape.matmul(tape.param(w), tape.reshape(tape.param(v), {8, 1})));
    const auto loss = tape.reduce_sum_all(tape.mul(h, h));
    tape.backward(loss);
    std::vector<double> grads;
    for (std::int64_t i = 0; i < w.grad.size(); ++i) grads.push_back(w.grad[i]);
    for (std::int64_t i = 0; i < v.grad.size(); ++i) grads.push_back(v.grad[i]);
    return grads;
  };
  const auto first = run();
  const auto second = run();
  CHECK(first == second);  // bitwise
}

TEST_CASE("gradient_check: corrupted backward rule is reported by name") {
  Rng rng(131);
  Parameter w("suspect", random_tensor(rng, {4}));
  auto build = [&](Tape& t) {
    const auto x = t.param(w);
    // A custom square op whose backward rule is wrong by a factor of 2.
    Tensor y(t.value(x).shape());
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = t.value(x)[i] * t.value(x)[i];
    const auto bad = t.custom("bad_square", {x}, std::move(y),
                              [x](Tape& tt, const Tensor& g) {
                                Tensor contrib(tt.value(x).shape());
                                for (std::int64_t i = 0; i < g.size(); ++i)
                                  contrib[i] = g[i] * tt.value(x)[i];  // missing *2
                                tt.add_grad(x, contrib);
                              });
    return t.reduce_sum_all(bad);
  };
  const auto report = gradient_check(build, {&w}, 1e-6);
  CHECK_FALSE(report.pass);
  CHECK(report.worst() == "suspect");
}

TEST_CASE("unreachable parameters keep zero gradients") {
  Rng rng(137);
  Parameter used("used", random_tensor(rng, {3}));
  Parameter unused("unused", random_tensor(rng, {3}));
  used.zero_grad();
  unused.zero_grad();
  Tape tape;
  tape.param(unused);  // on the tape but not wired into the loss
  tape.backward(tape.reduce_sum_all(tape.param(used)));
  for (int i = 0; i < 3; ++i) {
    CHECK(used.grad[i] == 1.0);
    CHECK(unused.grad[i] == 0.0);
  }
}

TEST_CASE("non-finite forward values are rejected") {
  Tape tape;
  const auto zero = tape.constant(Tensor::scalar(0.0));
  CHECK_THROWS_AS(tape.log(zero), Error);  // log(0) = -inf
  const auto neg = tape.constant(Tensor::scalar(-1.0));
  CHECK_THROWS_AS(tape.sqrt(neg), Error);  // NaN
}
