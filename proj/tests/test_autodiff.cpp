#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "pdl/autodiff.hpp"
#include "pdl/rng.hpp"

using namespace pdl;
using ad::Value;

TEST_CASE("relu forward and backward") {
  auto x = Value::leaf(Tensor({2}, {-1.0, 2.0}));
  auto y = ad::relu(x);
  CHECK(y.tensor()[0] == 0.0);
  CHECK(y.tensor()[1] == 2.0);
  ad::backward(ad::sum(y));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
}

TEST_CASE("relu gradient is zero at exactly-zero input") {
  auto x = Value::leaf(Tensor({3}, {-1.0, 0.0, 1.0}));
  ad::backward(ad::sum(ad::relu(x)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 1.0);
}

TEST_CASE("x*x has gradient 2x") {
  auto x = Value::leaf(Tensor({1}, {3.0}));
  auto y = ad::mul(x, x);
  ad::backward(ad::sum(y));
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("sum backward is all ones") {
  auto w = Value::leaf(Tensor({3}, {5.0, -2.0, 0.5}));
  ad::backward(ad::sum(w));
  CHECK(w.grad()[0] == 1.0);
  CHECK(w.grad()[1] == 1.0);
  CHECK(w.grad()[2] == 1.0);
}

TEST_CASE("dot(w, w) backward is 2w") {
  auto w = Value::leaf(Tensor({2}, {1.0, 2.0}));
  ad::backward(ad::dot(w, w));
  CHECK(w.grad()[0] == doctest::Approx(2.0));
  CHECK(w.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar roots") {
  auto x = Value::leaf(Tensor({2}, {1.0, 2.0}));
  auto y = ad::scale(x, 2.0);
  CHECK_THROWS_AS(ad::backward(y), contract_error);
}

TEST_CASE("unreached leaves report zero gradient") {
  auto x = Value::leaf(Tensor({2}, {1.0, 2.0}));
  auto z = Value::leaf(Tensor({2}, {3.0, 4.0}));
  ad::backward(ad::sum(x));
  CHECK(!z.has_grad());
  CHECK(z.grad_or_zero()[0] == 0.0);
  CHECK(z.grad_or_zero()[1] == 0.0);
}

TEST_CASE("graph is released after backward") {
  auto x = Value::leaf(Tensor({2}, {1.0, 2.0}));
  auto y = ad::sum(ad::square(x));
  ad::backward(y);
  CHECK(y.item() == doctest::Approx(5.0));  // value stays readable
  CHECK_THROWS_AS(ad::backward(y), contract_error);
}

TEST_CASE("shape mismatch raises dim_error") {
  auto a = Value::leaf(Tensor({2}, {1.0, 2.0}));
  auto b = Value::leaf(Tensor({3}, {1.0, 2.0, 3.0}));
  CHECK_THROWS_AS(ad::add(a, b), dim_error);
  CHECK_THROWS_AS(ad::matmul(a, b), dim_error);
}

TEST_CASE("non-finite op result raises numeric_error with op tag") {
  auto a = Value::constant(Tensor({1}, {1e308}));
  try {
    auto b = ad::add(a, a);
    FAIL("expected numeric_error");
  } catch (const numeric_error& e) {
    CHECK(e.op == std::string("add"));
  }
}

TEST_CASE("detach blocks gradient flow") {
  auto x = Value::leaf(Tensor({2}, {1.0, 2.0}));
  auto frozen = ad::square(x).detach();
  auto loss = ad::sum(ad::mul(frozen, frozen));
  ad::backward(loss);
  CHECK(!x.has_grad());
}

TEST_CASE("backward is bitwise deterministic") {
  Rng rng(99);
  std::vector<double> data(16);
  for (auto& v : data) v = rng.uniform(-1.0, 1.0);
  Tensor t({4, 4}, data);
  Tensor g1, g2;
  for (int rep = 0; rep < 2; ++rep) {
    auto w = Value::leaf(t);
    auto v = Value::constant(Tensor({4}, {0.3, -0.2, 0.8, 0.1}));
    auto y = ad::mean(ad::square(ad::matvec(w, v)));
    ad::backward(y);
    (rep == 0 ? g1 : g2) = w.grad();
  }
  CHECK(g1.vec() == g2.vec());
}

namespace {

// Builds a composite scalar expression from a flat parameter vector and
// returns its value; layout matches random_composite_ad below.
double composite_value(const std::vector<double>& p) {
  const std::size_t n = 4;
  // p = [x(4), q(16), r(4)]
  std::vector<double> x(p.begin(), p.begin() + n);
  std::vector<double> q(p.begin() + n, p.begin() + n + n * n);
  std::vector<double> r(p.begin() + n + n * n, p.end());
  // f = 0.5 x'(QQ')x + r'sin(x) + |x|_1 + max(x,0)^2 summed
  double f = 0.0;
  std::vector<double> qq(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        qq[i * n + j] += q[i * n + k] * q[j * n + k];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) f += 0.5 * x[i] * qq[i * n + j] * x[j];
  for (std::size_t i = 0; i < n; ++i) {
    f += r[i] * std::sin(x[i]);
    f += std::fabs(x[i]);
    const double m = x[i] > 0.0 ? x[i] : 0.0;
    f += m * m;
  }
  return f;
}

double composite_ad(const std::vector<double>& p, std::vector<double>* grad) {
  const std::size_t n = 4;
  auto x = Value::leaf(Tensor({n}, {p.begin(), p.begin() + n}));
  auto q = Value::leaf(Tensor({n, n}, {p.begin() + n, p.begin() + n + n * n}));
  auto r = Value::leaf(Tensor({n}, {p.begin() + n + n * n, p.end()}));
  auto qq = ad::matmul_nt(q, q);  // QQ' is PSD
  auto quad = ad::scale(ad::dot(x, ad::matvec(qq, x)), 0.5);
  auto lin = ad::dot(r, ad::sin(x));
  auto l1 = ad::l1_norm(x);
  auto hinge = ad::sum(ad::square(ad::relu(x)));
  auto f = ad::add(ad::add(quad, lin), ad::add(l1, hinge));
  const double value = f.item();
  if (grad) {
    ad::backward(f);
    grad->clear();
    auto push = [&](const Value& v) {
      Tensor g = v.grad_or_zero();
      grad->insert(grad->end(), g.vec().begin(), g.vec().end());
    };
    push(x);
    push(q);
    push(r);
  }
  return value;
}

}  // namespace

TEST_CASE("composite gradients match finite differences over 100 seeds") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    std::vector<double> p(4 + 16 + 4);
    for (auto& v : p) v = rng.uniform(-1.5, 1.5);
    // keep away from the |x| and relu kinks where FD is invalid
    for (std::size_t i = 0; i < 4; ++i) {
      if (std::fabs(p[i]) < 1e-3) p[i] = 0.05;
    }
    std::vector<double> g_ad;
    const double v_ad = composite_ad(p, &g_ad);
    CHECK(v_ad == doctest::Approx(composite_value(p)).epsilon(1e-10));
    const auto g_fd = oracle::fd_gradient(composite_value, p);
    CHECK(oracle::rel_error(g_ad, g_fd) <= 1e-4);
  }
}

TEST_CASE("matrix op gradients match finite differences") {
  Rng rng(424242);
  const std::size_t B = 3, nvar = 4, m = 2;
  std::vector<double> w(B * nvar), a(m * nvar), v(nvar);
  for (auto& t : w) t = rng.uniform(-1.0, 1.0);
  for (auto& t : a) t = rng.uniform(-1.0, 1.0);
  for (auto& t : v) t = rng.uniform(0.5, 1.5);

  auto eval = [&](const std::vector<double>& wf, std::vector<double>* grad) {
    auto W = Value::leaf(Tensor({B, nvar}, wf));
    auto A = Value::constant(Tensor({m, nvar}, a));
    auto Vv = Value::constant(Tensor({nvar}, v));
    // chain: slice, rowvec ops, matmul_nt, rowsum, mean
    auto t1 = ad::mul_rowvec(W, Vv);
    auto t2 = ad::add_rowvec(t1, Vv);
    auto t3 = ad::matmul_nt(t2, A);            // [B x m]
    auto t4 = ad::slice_cols(t3, 0, m);
    auto t5 = ad::rowsum(ad::square(t4));      // [B]
    auto f = ad::mean(t5);
    const double val = f.item();
    if (grad) {
      ad::backward(f);
      *grad = W.grad_or_zero().vec();
    }
    return val;
  };

  std::vector<double> g_ad;
  eval(w, &g_ad);
  auto g_fd = oracle::fd_gradient([&](const std::vector<double>& p) {
    return eval(p, nullptr);
  }, w);
  CHECK(oracle::rel_error(g_ad, g_fd) <= 1e-6);
}

TEST_CASE("sigmoid, hardsigmoid, maximum, linf gradients match FD") {
  Rng rng(3);
  std::vector<double> x0(6);
  for (auto& t : x0) t = rng.uniform(-2.0, 2.0);

  auto eval = [&](const std::vector<double>& p, std::vector<double>* grad) {
    auto x = Value::leaf(Tensor({6}, p));
    auto c = Value::constant(Tensor({6}, {0.1, -0.4, 0.2, 0.9, -1.2, 0.3}));
    auto s = ad::sum(ad::sigmoid(x));
    auto hs = ad::sum(ad::hardsigmoid(x));
    auto mx = ad::sum(ad::maximum(x, c));
    auto li = ad::linf_norm(x);
    auto f = ad::add(ad::add(s, hs), ad::add(mx, li));
    const double val = f.item();
    if (grad) {
      ad::backward(f);
      *grad = x.grad_or_zero().vec();
    }
    return val;
  };

  std::vector<double> g_ad;
  eval(x0, &g_ad);
  auto g_fd = oracle::fd_gradient([&](const std::vector<double>& p) {
    return eval(p, nullptr);
  }, x0);
  CHECK(oracle::rel_error(g_ad, g_fd) <= 1e-5);
}

TEST_CASE("empty constraint blocks flow through ops") {
  auto g = Value::leaf(Tensor({3, 0}, {}));
  auto s = ad::rowsum(ad::square(g));
  CHECK(s.tensor().numel() == 3);
  CHECK(s.tensor()[0] == 0.0);
  auto loss = ad::mean(s);
  ad::backward(loss);
  CHECK(g.grad_or_zero().numel() == 0);
}
