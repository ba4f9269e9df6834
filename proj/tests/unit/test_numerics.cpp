#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "fixtures.hpp"
#include "rumor/autodiff.hpp"
#include "rumor/errors.hpp"
#include "rumor/grad_check.hpp"
#include "rumor/optim.hpp"
#include "rumor/tensor.hpp"

using namespace rumor;
using fixtures::random_tensor;

namespace {

using OpFn = std::function<ad::Var(ad::Tape&, std::vector<ad::Var>&)>;

// Max relative error between tape gradients and central differences of
// sum(op(inputs) .* P) for a fixed random P.
GradCheckResult op_grad_check(std::vector<Tensor> inputs, const OpFn& op, std::uint64_t seed = 1) {
  Rng rng(seed);
  Tensor proj;
  auto eval = [&](std::vector<Tensor>* grads) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.parameter(t));
    ad::Var out = op(tape, vars);
    if (proj.empty()) proj = random_tensor(out.value().rows(), out.value().cols(), rng);
    ad::Var loss = ad::sum(ad::mul(out, tape.constant(proj)));
    if (grads != nullptr) {
      tape.backward(loss);
      for (const auto& v : vars) grads->push_back(tape.grad(v));
    }
    return LossProbe{loss.value()(0, 0), tape.activation_signature()};
  };
  std::vector<Tensor> analytic;
  eval(&analytic);
  std::vector<Tensor*> ptrs;
  for (auto& t : inputs) ptrs.push_back(&t);
  return grad_check([&] { return eval(nullptr); }, ptrs, analytic);
}

ad::Segments segments_of(std::vector<std::size_t> counts) {
  ad::Segments s;
  s.offsets.push_back(0);
  for (std::size_t c : counts) s.offsets.push_back(s.offsets.back() + c);
  return s;
}

}  // namespace

TEST_CASE("affine examples") {
  ad::Tape tape;
  ad::Var x = tape.constant(Tensor::of({{1, 2}}));
  CHECK(ad::affine(x, tape.constant(Tensor::identity(2))).value() == Tensor::of({{1, 2}}));

  ad::Var x2 = tape.constant(Tensor::of({{1, -1}}));
  ad::Var y = ad::affine(x2, tape.constant(Tensor::of({{2}, {3}})), tape.constant(Tensor::of({{1}})));
  CHECK(y.value()(0, 0) == 0.0);

  CHECK_THROWS_AS(ad::matmul(x, tape.constant(Tensor(3, 2))), NumericError);
}

TEST_CASE("relu forward and mask") {
  ad::Tape tape;
  ad::Var x = tape.parameter(Tensor::of({{-1, 0, 2}}));
  ad::Var y = ad::relu(x);
  CHECK(y.value() == Tensor::of({{0, 0, 2}}));
  tape.backward(ad::sum(y));
  CHECK(tape.grad(x) == Tensor::of({{0, 0, 1}}));

  ad::Var neg = tape.constant(Tensor::of({{-3, -0.5}}));
  CHECK(ad::relu(neg).value() == Tensor(1, 2));
}

TEST_CASE("every kernel matches central differences") {
  Rng rng(11);
  const auto seg = segments_of({2, 0, 3, 1});
  const std::vector<std::size_t> senders = {1, 3, 0, 2, 3, 0};
  const std::vector<std::size_t> gather = {2, 0, 0, 3};

  struct Case {
    const char* name;
    std::vector<Tensor> inputs;
    OpFn op;
  };
  const std::vector<Case> cases = {
      {"matmul", {random_tensor(4, 3, rng), random_tensor(3, 2, rng)},
       [](ad::Tape&, auto& v) { return ad::matmul(v[0], v[1]); }},
      {"affine+bias", {random_tensor(4, 3, rng), random_tensor(3, 2, rng), random_tensor(1, 2, rng)},
       [](ad::Tape&, auto& v) { return ad::affine(v[0], v[1], v[2]); }},
      {"add", {random_tensor(3, 2, rng), random_tensor(3, 2, rng)},
       [](ad::Tape&, auto& v) { return ad::add(v[0], v[1]); }},
      {"sub", {random_tensor(3, 2, rng), random_tensor(3, 2, rng)},
       [](ad::Tape&, auto& v) { return ad::sub(v[0], v[1]); }},
      {"mul", {random_tensor(3, 2, rng), random_tensor(3, 2, rng)},
       [](ad::Tape&, auto& v) { return ad::mul(v[0], v[1]); }},
      {"scale", {random_tensor(3, 2, rng)}, [](ad::Tape&, auto& v) { return ad::scale(v[0], -1.7); }},
      {"sum", {random_tensor(3, 2, rng)}, [](ad::Tape&, auto& v) { return ad::sum(v[0]); }},
      {"relu", {random_tensor(4, 3, rng)}, [](ad::Tape&, auto& v) { return ad::relu(v[0]); }},
      {"gather_rows", {random_tensor(4, 3, rng)},
       [&](ad::Tape&, auto& v) { return ad::gather_rows(v[0], gather); }},
      {"segment_mean", {random_tensor(4, 3, rng)},
       [&](ad::Tape&, auto& v) { return ad::segment_mean(v[0], seg, senders); }},
      {"row_dot", {random_tensor(5, 3, rng), random_tensor(5, 3, rng)},
       [](ad::Tape&, auto& v) { return ad::row_dot(v[0], v[1]); }},
      {"row_mean", {random_tensor(5, 3, rng)}, [](ad::Tape&, auto& v) { return ad::row_mean(v[0]); }},
      {"segment_softmax", {random_tensor(6, 1, rng, 2.0)},
       [&](ad::Tape&, auto& v) { return ad::segment_softmax(v[0], seg); }},
      {"segment_weighted_sum", {random_tensor(6, 1, rng), random_tensor(6, 3, rng)},
       [&](ad::Tape&, auto& v) { return ad::segment_weighted_sum(v[0], v[1], seg); }},
      {"concat_cols", {random_tensor(3, 2, rng), random_tensor(3, 4, rng)},
       [](ad::Tape&, auto& v) { return ad::concat_cols(v[0], v[1]); }},
      {"select_row", {random_tensor(3, 4, rng)}, [](ad::Tape&, auto& v) { return ad::select_row(v[0], 1); }},
      {"cross_entropy", {random_tensor(1, 5, rng, 3.0)},
       [](ad::Tape&, auto& v) { return ad::cross_entropy(v[0], 3); }},
  };
  for (const auto& c : cases) {
    const GradCheckResult r = op_grad_check(c.inputs, c.op);
    INFO(c.name << ": " << describe(r));
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("segment_mean of an empty segment is a zero row") {
  ad::Tape tape;
  const auto seg = segments_of({0, 1});
  const std::vector<std::size_t> senders = {0};
  ad::Var x = tape.constant(Tensor::of({{4, 5}}));
  const Tensor m = ad::segment_mean(x, seg, senders).value();
  CHECK(m == Tensor::of({{0, 0}, {4, 5}}));
}

TEST_CASE("backward visits each recorded op once") {
  ad::Tape tape;
  ad::Var x = tape.parameter(Tensor::of({{2.0}}));
  int visits = 0;
  const ad::Var parents[] = {x};
  ad::Var y = tape.record(Tensor::of({{2.0}}), parents, [&visits, xi = x.id](ad::Tape& tp, std::size_t self) {
    ++visits;
    tp.grad_accumulator(xi)[0] += tp.grad_at(self)[0];
  }, "probe");
  // y feeds two branches; its backward must still run once with the summed gradient.
  ad::Var loss = ad::add(ad::scale(y, 3.0), ad::mul(y, y));
  tape.backward(loss);
  CHECK(visits == 1);
  CHECK(tape.grad(x)[0] == doctest::Approx(3.0 + 2.0 * 2.0));
}

TEST_CASE("non-finite values raise") {
  Tensor t = Tensor::of({{1.0, std::numeric_limits<double>::quiet_NaN()}});
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(t.require_finite("t"), NumericError);
  ad::Tape tape;
  ad::Var big = tape.constant(Tensor::of({{1e308}}));
  CHECK_THROWS_AS(ad::scale(big, 10.0), NumericError);
}

TEST_CASE("softmax examples and properties") {
  CHECK(softmax_rows(Tensor::of({{0, 0}})) == Tensor::of({{0.5, 0.5}}));
  CHECK(softmax_rows(Tensor::of({{-3.5}}))[0] == 1.0);
  const Tensor big = softmax_rows(Tensor::of({{1000, 1000, 1000}}));
  for (double v : big.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + uniform_index(rng, 9);
    Tensor z = random_tensor(1, k, rng, 30.0);
    const Tensor p = softmax_rows(z);
    double s = 0.0;
    for (double v : p.values()) s += v;
    CHECK(std::abs(s - 1.0) < 1e-12);
    const double c = uniform(rng, -50.0, 50.0);
    for (double& v : z.values()) v += c;
    const Tensor q = softmax_rows(z);
    for (std::size_t i = 0; i < k; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
  }
}

TEST_CASE("dropout") {
  Rng rng(3);
  ad::Tape tape;
  const Tensor x = random_tensor(4, 5, rng);
  ad::Var v = tape.constant(x);
  CHECK(ad::dropout(v, 0.5, 9, false).value() == x);
  CHECK(ad::dropout(v, 0.0, 9, true).value() == x);
  CHECK_THROWS_AS(ad::dropout(v, 1.0, 9, true), NumericError);
  CHECK_THROWS_AS(ad::dropout(v, -0.1, 9, true), NumericError);
  const Tensor first = ad::dropout(v, 0.5, 9, true).value();
  CHECK(ad::dropout(v, 0.5, 9, true).value() == first);

  const std::size_t n = 100000;
  ad::Var ones = tape.constant(Tensor(1, n, 1.0));
  const Tensor out = ad::dropout(ones, 0.5, 1234, true).value();
  std::size_t survivors = 0;
  for (double e : out.values()) {
    if (e != 0.0) {
      ++survivors;
      CHECK(e == 2.0);
    }
  }
  CHECK(std::abs(static_cast<double>(survivors) / n - 0.5) < 0.01);
}

TEST_CASE("cross entropy values") {
  ad::Tape tape;
  ad::Var uniform_logits = tape.constant(Tensor(1, 5));
  for (std::size_t label = 0; label < 5; ++label) {
    CHECK(ad::cross_entropy(uniform_logits, label).value()(0, 0) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  }
  ad::Var peaked = tape.constant(Tensor::of({{10, 0, 0, 0, 0}}));
  CHECK(ad::cross_entropy(peaked, 0).value()(0, 0) ==
        doctest::Approx(std::log1p(4.0 * std::exp(-10.0))).epsilon(1e-12));
  CHECK_THROWS_AS(ad::cross_entropy(peaked, 5), NumericError);

  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    ad::Var z = tape.constant(random_tensor(1, 5, rng, 20.0));
    CHECK(ad::cross_entropy(z, uniform_index(rng, 5)).value()(0, 0) >= 0.0);
  }
}

TEST_CASE("adamw first step closed form") {
  Tensor theta = Tensor::of({{1.0}});
  AdamW opt({0.01, 0.9, 0.999, 1e-8, 0.01});
  Tensor* params[] = {&theta};
  const Tensor grads[] = {Tensor::of({{1.0}})};
  opt.step(params, grads);
  // m_hat = v_hat = 1 after bias correction.
  const double expected = 1.0 - 0.01 * 1.0 / (1.0 + 1e-8) - 0.01 * 0.01 * 1.0;
  CHECK(std::abs(theta[0] - 0.9899000001) < 1e-10);
  CHECK(std::abs(theta[0] - expected) < 1e-15);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adamw fixed points and decay") {
  Rng rng(2);
  Tensor theta = random_tensor(3, 4, rng);
  const Tensor before = theta;
  AdamW still({0.01, 0.9, 0.999, 1e-8, 0.0});
  Tensor* params[] = {&theta};
  const Tensor zero[] = {Tensor(3, 4)};
  for (int i = 0; i < 5; ++i) still.step(params, zero);
  CHECK(theta == before);

  AdamW decay({0.01, 0.9, 0.999, 1e-8, 0.1});
  decay.step(params, zero);
  for (std::size_t i = 0; i < theta.size(); ++i) CHECK(theta[i] == doctest::Approx(before[i] * (1 - 0.001)));
}

TEST_CASE("adamw matches a scalar re-derivation over several steps") {
  Rng rng(21);
  const double lr = 0.03, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.02;
  Tensor theta = random_tensor(2, 3, rng);
  std::vector<double> ref = theta.values(), m(6, 0.0), v(6, 0.0);
  AdamW opt({lr, b1, b2, eps, wd});
  Tensor* params[] = {&theta};
  for (int t = 1; t <= 6; ++t) {
    const Tensor g = random_tensor(2, 3, rng);
    for (std::size_t i = 0; i < 6; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      ref[i] = ref[i] - lr * mh / (std::sqrt(vh) + eps) - lr * wd * ref[i];
    }
    const Tensor grads[] = {g};
    opt.step(params, grads);
  }
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(theta[i] - ref[i]) < 1e-12);
}

TEST_CASE("adamw rejects bad gradients without touching state") {
  Tensor theta = Tensor::of({{1.0, 2.0}});
  AdamW opt;
  Tensor* params[] = {&theta};
  const Tensor wrong_shape[] = {Tensor(2, 1)};
  CHECK_THROWS_AS(opt.step(params, wrong_shape), NumericError);
  const Tensor nan_grad[] = {Tensor::of({{0.5, std::numeric_limits<double>::infinity()}})};
  CHECK_THROWS_AS(opt.step(params, nan_grad), NumericError);
  CHECK(theta == Tensor::of({{1.0, 2.0}}));
  CHECK(opt.step_count() == 0);
}

TEST_CASE("grad_check on a quadratic") {
  Rng rng(4);
  Tensor theta = random_tensor(3, 3, rng, 2.0);
  auto loss = [&] {
    double s = 0.0;
    for (double v : theta.values()) s += 0.5 * v * v;
    return LossProbe{s, 0};
  };
  const Tensor analytic[] = {theta};
  Tensor* params[] = {&theta};
  const Tensor before = theta;
  const GradCheckResult r = grad_check(loss, params, analytic);
  CHECK(r.checked == 9);
  CHECK(r.max_rel_error < 1e-9);
  CHECK(theta == before);
}

TEST_CASE("grad_check skips coordinates straddling a relu kink") {
  Tensor x = Tensor::of({{0.0, 1.0, -2.0}});
  auto loss = [&] {
    ad::Tape tape;
    ad::Var y = ad::sum(ad::relu(tape.parameter(x)));
    return LossProbe{y.value()(0, 0), tape.activation_signature()};
  };
  const Tensor analytic[] = {Tensor::of({{0.0, 1.0, 0.0}})};
  Tensor* params[] = {&x};
  const GradCheckResult r = grad_check(loss, params, analytic);
  CHECK(r.skipped_kinks == 1);
  CHECK(r.checked == 2);
  CHECK(r.max_rel_error < 1e-9);
}

TEST_CASE("grad_check coordinate subsets") {
  Rng rng(6);
  Tensor theta = random_tensor(10, 10, rng);
  auto loss = [&] {
    double s = 0.0;
    for (double v : theta.values()) s += v * v * v;
    return LossProbe{s, 0};
  };
  Tensor grad = theta;
  for (double& v : grad.values()) v = 3 * v * v;
  const Tensor analytic[] = {grad};
  Tensor* params[] = {&theta};
  GradCheckOptions opts;
  opts.max_coords_per_tensor = 7;
  const GradCheckResult r = grad_check(loss, params, analytic, opts);
  CHECK(r.checked == 7);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("matmul kernels agree with a naive triple loop") {
  Rng rng(9);
  const Tensor a = random_tensor(5, 4, rng), b = random_tensor(4, 3, rng);
  const Tensor c = kernels::matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      CHECK(c(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  }
  const Tensor at = kernels::matmul_tn(a, kernels::matmul(a, b));
  const Tensor bt = kernels::matmul_nt(c, b);
  CHECK(at.rows() == 4);
  CHECK(bt.cols() == 4);
}

TEST_CASE("grad_check tallies coordinates above the tolerance") {
  Tensor theta = Tensor::of({{1.0, 2.0, 3.0}});
  auto loss = [&] { return LossProbe{theta[0] * theta[0] + theta[1] + theta[2], 0}; };
  const Tensor analytic[] = {Tensor::of({{2.0, 1.0, 1.5}})};  // last entry wrong by a third
  Tensor* params[] = {&theta};
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  const GradCheckResult r = grad_check(loss, params, analytic, opt);
  CHECK(r.over_tolerance == 1);
  CHECK(r.largest_over_tolerance == doctest::Approx(1.5));
  CHECK(r.worst_index == 2);
}
