#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "getad/autodiff.hpp"
#include "getad/gradcheck.hpp"
#include "getad/gradcheck_suite.hpp"

using namespace getad;

namespace {

Tensor64 randn(std::size_t r, std::size_t c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Tensor64 t(r, c);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

}  // namespace

TEST_CASE("softmax of equal entries is uniform") {
  ad::Graph g;
  auto s = ad::softmax_rows(g.constant(Tensor64(1, 3, 0.0)));
  for (std::size_t j = 0; j < 3; ++j) CHECK(s.value()(0, j) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("softmax rows are distributions") {
  std::mt19937_64 rng(1);
  ad::Graph g;
  Tensor64 x = randn(20, 9, rng, 30.0);
  x(3, 4) = -std::numeric_limits<double>::infinity();
  auto s = ad::softmax_rows(g.constant(x)).value();
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double sum = 0.0;
    for (double v : s.row(i)) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
  CHECK(s(3, 4) == 0.0);
}

TEST_CASE("layer norm of a constant row is zero before gain and bias") {
  ad::Graph g;
  auto y = ad::layer_norm(g.constant(Tensor64(2, 5, 3.25)), g.constant(Tensor64(1, 5, 1.0)),
                          g.constant(Tensor64(1, 5, 0.0)));
  for (double v : y.value().values()) CHECK(v == 0.0);
}

TEST_CASE("matmul gradient matches finite differences") {
  std::mt19937_64 rng(2);
  auto rep = gradcheck([](ad::Graph&, std::span<const ad::Var> in) { return ad::matmul(in[0], in[1]); },
                       {randn(3, 4, rng), randn(4, 2, rng)});
  CHECK(rep.passed);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("identity op has zero gradient error") {
  std::mt19937_64 rng(3);
  // power-of-two eps keeps x +- eps exact for these inputs
  Tensor64 x(2, 3);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) - 2.5;
  auto rep = gradcheck([](ad::Graph&, std::span<const ad::Var> in) { return in[0]; }, {x},
                       1.0 / 1024.0);
  CHECK(rep.max_rel_err == 0.0);
}

TEST_CASE("gradcheck suite: every primitive and composite passes") {
  for (const auto& r : run_gradcheck_suite()) {
    INFO(r.name << " rel " << r.report.max_rel_err << " at " << r.report.worst);
    CHECK(r.report.passed);
    CHECK(r.report.max_rel_err <= 1e-4);
  }
}

TEST_CASE("cross entropy gradient is softmax minus one-hot") {
  std::mt19937_64 rng(4);
  const Tensor64 logits = randn(5, 7, rng, 2.0);
  const std::vector<int> targets{0, 6, 3, 3, 1};
  ad::Graph g;
  auto x = g.variable(logits);
  g.backward(ad::cross_entropy(x, targets));
  const Tensor64 grad = g.grad(x);
  for (std::size_t i = 0; i < 5; ++i) {
    double mx = -1e300, z = 0.0;
    for (double v : logits.row(i)) mx = std::max(mx, v);
    for (double v : logits.row(i)) z += std::exp(v - mx);
    for (std::size_t j = 0; j < 7; ++j) {
      const double expect = std::exp(logits(i, j) - mx) / z - (static_cast<int>(j) == targets[i]);
      CHECK(grad(i, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward of a sum of losses is the sum of backwards") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor64 a = randn(4, 3, rng), b = randn(3, 5, rng);
    auto loss1 = [](ad::Var x, ad::Var y) { return ad::sum(ad::sigmoid(ad::matmul(x, y))); };
    auto loss2 = [](ad::Var x, ad::Var y) {
      return ad::mean(ad::mul(ad::elu(ad::matmul(x, y)), ad::matmul(x, y)));
    };
    auto grads = [&](int which) {
      ad::Graph g;
      auto x = g.variable(a), y = g.variable(b);
      ad::Var l = which == 1 ? loss1(x, y) : which == 2 ? loss2(x, y) : ad::add(loss1(x, y), loss2(x, y));
      g.backward(l);
      return std::make_pair(g.grad(x), g.grad(y));
    };
    auto g1 = grads(1), g2 = grads(2), g12 = grads(3);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(g12.first[i] == doctest::Approx(g1.first[i] + g2.first[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < b.size(); ++i)
      CHECK(g12.second[i] == doctest::Approx(g1.second[i] + g2.second[i]).epsilon(1e-12));
  }
}

TEST_CASE("dropout is active only in training") {
  std::mt19937_64 rng(6);
  const Tensor64 x = randn(50, 40, rng);
  {
    ad::Graph g(false, 1);
    CHECK(ad::dropout(g.constant(x), 0.5).value() == x);
  }
  {
    ad::Graph g(true, 1);
    CHECK(ad::dropout(g.constant(x), 0.0).value() == x);
  }
  ad::Graph g(true, 1);
  const Tensor64 y = ad::dropout(g.constant(x), 0.5).value();
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] == 0.0)
      ++zeros;
    else
      CHECK(y[i] == doctest::Approx(2.0 * x[i]));
  }
  CHECK(zeros > 800);
  CHECK(zeros < 1200);
  ad::Graph g2(true, 1);
  CHECK(ad::dropout(g2.constant(x), 0.5).value() == y);
}

TEST_CASE("masked fill blocks gradient") {
  ad::Graph g;
  auto x = g.variable(Tensor64::from(1, 3, {1.0, 2.0, 3.0}));
  const std::vector<std::uint8_t> mask{0, 1, 0};
  auto y = ad::masked_fill(x, mask, -5.0);
  CHECK(y.value()(0, 1) == -5.0);
  g.backward(ad::sum(y));
  CHECK(g.grad(x)(0, 0) == 1.0);
  CHECK(g.grad(x)(0, 1) == 0.0);
}

TEST_CASE("leaky relu slope") {
  ad::Graph g;
  auto y = ad::leaky_relu(g.constant(Tensor64::from(1, 2, {-2.0, 3.0})));
  CHECK(y.value()(0, 0) == doctest::Approx(-0.02));
  CHECK(y.value()(0, 1) == 3.0);
}

TEST_CASE("shape mismatch raises") {
  ad::Graph g;
  CHECK_THROWS_AS(ad::matmul(g.constant(Tensor64(2, 3)), g.constant(Tensor64(2, 3))), ShapeError);
}
