#include <cmath>
#include <sstream>

#include "doctest.h"
#include "pdl/eval.hpp"
#include "pdl/rng.hpp"

using namespace pdl;
using namespace pdl::eval;
using problems::family_generate;
using problems::Kind;
using problems::ProblemFamily;

TEST_CASE("optimality gap basics") {
  CHECK(optimality_gap(-15.0, -15.0) == 0.0);
  CHECK(optimality_gap(-15.047, -15.017) == doctest::Approx(0.19937).epsilon(1e-3));
  // invariant under negating both values
  CHECK(optimality_gap(-15.047, -15.017) ==
        doctest::Approx(optimality_gap(15.047, 15.017)));
  CHECK_THROWS_AS(optimality_gap(0.0, 1.0), data_error);
  const GapResult g = gap_or_absolute(0.0, 0.25);
  CHECK(g.absolute_fallback);
  CHECK(g.value == doctest::Approx(0.25));
}

TEST_CASE("violations split eq and ineq with max/mean") {
  // family: h(y) = Ay - x with A = I2 (n=2, n_eq=2), g = Gy - h
  ProblemFamily f;
  f.kind = Kind::convex_qp;
  f.dims = {2, 2, 2, 0};
  f.q_diag = Tensor({2}, {1.0, 1.0});
  f.r = Tensor::zeros({2});
  f.A = Tensor({2, 2}, {1, 0, 0, 1});
  f.A_pinv = f.A;
  f.G = Tensor({2, 2}, {1, 0, 0, 1});
  f.h = Tensor({2}, {1.0, 1.0});

  // y = (1.2, -0.4), x = (1.0, 0.0): h = (0.2, -0.4); g = (0.2, -1.4)
  const Violations v = violations(f, Tensor({2}, {1.0, 0.0}),
                                  Tensor({2}, {1.2, -0.4}));
  CHECK(v.max_eq == doctest::Approx(0.4));
  CHECK(v.mean_eq == doctest::Approx(0.3));
  CHECK(v.max_ineq == doctest::Approx(0.2));
  CHECK(v.mean_ineq == doctest::Approx(0.1));

  // feasible point -> all zeros
  const Violations z = violations(f, Tensor({2}, {0.5, 0.5}),
                                  Tensor({2}, {0.5, 0.5}));
  CHECK(z.max_eq == 0.0);
  CHECK(z.mean_eq == 0.0);
  CHECK(z.max_ineq == 0.0);
  CHECK(z.mean_ineq == 0.0);
}

namespace {

Predictor constant_predictor(Tensor row) {
  return [row](const Tensor& X) {
    Tensor out = Tensor::zeros({X.rows(), row.numel()});
    for (std::size_t i = 0; i < X.rows(); ++i) {
      std::copy(row.data(), row.data() + row.numel(),
                out.data() + i * row.numel());
    }
    return out;
  };
}

}  // namespace

TEST_CASE("evaluate: exact reference outputs give a zero row") {
  const ProblemFamily f = family_generate(Kind::convex_qp, {4, 2, 2, 0}, 3);
  auto ds = problems::sample_instances(f, 6, 5);
  ds.split = problems::Split::test;

  problems::Sidecar ref;
  ref.Y = Tensor::zeros({6, 4});
  ref.f.resize(6);
  std::vector<Predictor> model;
  // "model" that replays the witness solutions; reference equals it
  for (std::size_t i = 0; i < 6; ++i) {
    const Tensor w = problems::feasible_witness(f, ds.row(i));
    std::copy(w.data(), w.data() + 4, ref.Y.data() + i * 4);
    ref.f[i] = problems::objective_one(f, ds.row(i), w);
  }
  model.push_back([&](const Tensor& X) {
    (void)X;
    return ref.Y;
  });

  const EvalReport rep = evaluate(f, ds, model, ref, "oracle");
  CHECK(rep.mean_gap == doctest::Approx(0.0));
  CHECK(rep.mean_max_eq <= 1e-12);
  CHECK(rep.mean_max_ineq == 0.0);
}

TEST_CASE("best-of-N objective is monotone in N") {
  const ProblemFamily f = family_generate(Kind::qcqp, {4, 0, 0, 6}, 9);
  auto ds = problems::sample_instances(f, 8, 3);
  ds.split = problems::Split::test;
  problems::Sidecar ref;
  ref.Y = Tensor::zeros({8, 4});
  ref.f.resize(8);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto bf = problems::qcqp_bruteforce(f, ds.row(i));
    std::copy(bf.y.data(), bf.y.data() + 4, ref.Y.data() + i * 4);
    ref.f[i] = bf.f;
  }

  Rng rng(5);
  std::vector<Predictor> models;
  std::vector<double> prev;
  for (int k = 0; k < 4; ++k) {
    Tensor row = Tensor::zeros({4});
    for (std::size_t j = 0; j < 4; ++j) row[j] = rng.uniform(-1.0, 1.0);
    models.push_back(constant_predictor(row));
    const EvalReport rep = evaluate(f, ds, models, ref, "probe");
    std::vector<double> cur;
    for (const auto& r : rep.rows) cur.push_back(r.objective);
    if (!prev.empty()) {
      for (std::size_t i = 0; i < cur.size(); ++i) CHECK(cur[i] <= prev[i]);
    }
    prev = cur;
  }
}

TEST_CASE("aggregates match recomputation from rows") {
  EvalReport rep;
  rep.rows.push_back({1.0, 2.0, false, {0.1, 0.05, 0.0, 0.0}});
  rep.rows.push_back({3.0, 6.0, false, {0.3, 0.15, 0.2, 0.1}});
  rep.rows.push_back({-1.0, 1.0, false, {0.0, 0.0, 0.0, 0.0}});
  rep.recompute_aggregates();
  CHECK(rep.mean_objective == doctest::Approx(1.0));
  CHECK(rep.mean_gap == doctest::Approx(3.0));
  CHECK(rep.gap_min == doctest::Approx(1.0));
  CHECK(rep.gap_median == doctest::Approx(2.0));
  CHECK(rep.gap_max == doctest::Approx(6.0));
  CHECK(rep.mean_max_eq == doctest::Approx((0.1 + 0.3 + 0.0) / 3));
}

TEST_CASE("report csv mirrors the table header exactly") {
  EvalReport rep;
  rep.scheme = "pdl";
  rep.rows.push_back({-15.0, 0.2, false, {0.005, 0.002, 0.001, 0.0}});
  rep.recompute_aggregates();
  std::ostringstream os;
  report_write_csv(os, {rep});
  const std::string text = os.str();
  CHECK(text.find("Method,Type,Obj.,Opt. Gap(%),Max eq.,Max ineq.,Mean eq.,Mean ineq.") == 0);
  CHECK(text.find("pdl,SSL,") != std::string::npos);
}

TEST_CASE("scheme type labels") {
  CHECK(scheme_type_label("pdl") == "SSL");
  CHECK(scheme_type_label("ssl_penalty") == "SSL");
  CHECK(scheme_type_label("naive_mae") == "SL");
  CHECK(scheme_type_label("ld") == "SL");
  CHECK(scheme_type_label("alm") == "opt");
}
