#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "pdl/mlp.hpp"
#include "pdl/rng.hpp"

using namespace pdl;
using nn::Mlp;
using nn::OutputHead;

namespace {

Tensor random_batch(Rng& rng, std::size_t b, std::size_t w) {
  Tensor x = Tensor::zeros({b, w});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1.0, 1.0);
  return x;
}

}  // namespace

TEST_CASE("zero-final network outputs exactly zero") {
  Mlp net({4, 8, 2}, OutputHead::identity, /*zero_final=*/true, 7);
  Rng rng(1);
  const Tensor x = random_batch(rng, 5, 4);
  const Tensor y = net.predict(x);
  for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("equal seeds give identical parameters") {
  Mlp a({3, 16, 2}, OutputHead::identity, false, 99);
  Mlp b({3, 16, 2}, OutputHead::identity, false, 99);
  CHECK(a.flatten_params() == b.flatten_params());
  Mlp c({3, 16, 2}, OutputHead::identity, false, 100);
  CHECK(a.flatten_params() != c.flatten_params());
}

TEST_CASE("forward rejects width mismatch") {
  Mlp net({4, 8, 2}, OutputHead::identity, false, 7);
  CHECK_THROWS_AS(net.predict(Tensor::zeros({3, 5})), dim_error);
}

TEST_CASE("mlp_new rejects bad widths") {
  CHECK_THROWS_AS(Mlp({4}, OutputHead::identity, false, 1), config_error);
  CHECK_THROWS_AS(Mlp({4, 0, 2}, OutputHead::identity, false, 1), config_error);
}

TEST_CASE("scaled sigmoid head maps preactivation 0 to 0") {
  // zero-final makes every preactivation 0; head output is 2*sigma(0)-1 = 0
  Mlp net({4, 8, 3}, OutputHead::scaled_sigmoid, true, 7);
  const Tensor y = net.predict(Tensor::zeros({2, 4}));
  for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("scaled sigmoid head stays inside (-1, 1)") {
  Mlp net({4, 16, 3}, OutputHead::scaled_sigmoid, false, 21);
  Rng rng(5);
  const Tensor y = net.predict(random_batch(rng, 20, 4));
  for (std::size_t i = 0; i < y.numel(); ++i) {
    CHECK(y[i] > -1.0);
    CHECK(y[i] < 1.0);
  }
}

TEST_CASE("bound-mix head: hardsigmoid 0.5 lands midway between bounds") {
  // zero preactivation -> hardsigmoid = 0.5 -> lo + 0.5 (hi - lo)
  Mlp net({4, 8, 2}, OutputHead::bound_mix, true, 7, 1.0, 3.0);
  const Tensor y = net.predict(Tensor::zeros({1, 4}));
  CHECK(y[0] == doctest::Approx(2.0));
  CHECK(y[1] == doctest::Approx(2.0));

  Mlp wide({4, 16, 2}, OutputHead::bound_mix, false, 8, 1.0, 3.0);
  Rng rng(5);
  const Tensor z = wide.predict(random_batch(rng, 50, 4));
  for (std::size_t i = 0; i < z.numel(); ++i) {
    CHECK(z[i] >= 1.0);
    CHECK(z[i] <= 3.0);
  }
}

TEST_CASE("predict is pure and bitwise equal to forward") {
  Mlp net({5, 32, 32, 3}, OutputHead::identity, false, 11);
  Rng rng(2);
  const Tensor x = random_batch(rng, 7, 5);
  const Tensor y1 = net.predict(x);
  const Tensor y2 = net.predict(x);
  CHECK(y1.vec() == y2.vec());
  const Tensor y3 = net.forward(x).tensor();
  CHECK(y1.vec() == y3.vec());

  Mlp sig({5, 8, 3}, OutputHead::scaled_sigmoid, false, 11);
  CHECK(sig.predict(x).vec() == sig.forward(x).tensor().vec());
  Mlp bm({5, 8, 3}, OutputHead::bound_mix, false, 11, -2.0, 2.0);
  CHECK(bm.predict(x).vec() == bm.forward(x).tensor().vec());
}

TEST_CASE("network gradient matches finite differences") {
  Mlp net({3, 6, 2}, OutputHead::identity, false, 17);
  Rng rng(4);
  const Tensor x = random_batch(rng, 4, 3);

  auto set_params = [&](Mlp& n, const std::vector<double>& flat) {
    std::size_t off = 0;
    for (auto& p : n.params()) {
      Tensor& t = p.mutable_tensor();
      for (std::size_t i = 0; i < t.numel(); ++i) t[i] = flat[off++];
    }
  };
  auto value = [&](const std::vector<double>& flat) {
    Mlp probe = net.clone();
    set_params(probe, flat);
    return ad::mean(ad::square(probe.forward(x))).item();
  };

  auto loss = ad::mean(ad::square(net.forward(x)));
  const double v0 = loss.item();
  ad::backward(loss);
  std::vector<double> g_ad;
  for (auto& p : net.params()) {
    const Tensor g = p.grad_or_zero();
    g_ad.insert(g_ad.end(), g.vec().begin(), g.vec().end());
    p.clear_grad();
  }
  const auto flat0 = net.flatten_params();
  CHECK(value(flat0) == doctest::Approx(v0));
  const auto g_fd = oracle::fd_gradient(value, flat0);
  CHECK(oracle::rel_error(g_ad, g_fd) <= 1e-5);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Mlp net({2, 4, 1}, OutputHead::identity, false, 3);
  nn::Adam opt(net.params(), 1e-3);
  const auto before = net.flatten_params();
  opt.step(net.params());  // no grads accumulated
  CHECK(net.flatten_params() == before);
}

TEST_CASE("adam: first step on unit gradient moves by about lr") {
  // single scalar parameter, g = 1: mhat = vhat = 1, step = lr/(1 + eps)
  std::vector<ad::Value> params{ad::Value::leaf(Tensor({1}, {0.5}))};
  nn::Adam opt(params, 1e-2);
  auto loss = ad::sum(params[0]);
  ad::backward(loss);
  opt.step(params);
  CHECK(params[0].tensor()[0] ==
        doctest::Approx(0.5 - 1e-2 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam moments decay toward zero once gradients stop") {
  std::vector<ad::Value> params{ad::Value::leaf(Tensor({1}, {0.5}))};
  nn::Adam opt(params, 1e-3);
  ad::backward(ad::sum(params[0]));
  opt.step(params);
  const double m1 = std::fabs(opt.m[0][0]);
  for (int i = 0; i < 50; ++i) opt.step(params);  // zero grads
  CHECK(std::fabs(opt.m[0][0]) < m1 * 1e-2);
}

TEST_CASE("one adam step decreases a 1-d convex quadratic") {
  std::vector<ad::Value> params{ad::Value::leaf(Tensor({1}, {1.0}))};
  nn::Adam opt(params, 1e-3);
  auto loss_value = [&] { return params[0].tensor()[0] * params[0].tensor()[0]; };
  const double before = loss_value();
  ad::backward(ad::sum(ad::square(params[0])));
  opt.step(params);
  CHECK(loss_value() < before);
}

TEST_CASE("lr decay fires only when validation loss worsens") {
  nn::LrSchedule sched;
  double lr = 1.0;
  lr = sched.maybe_decay(lr, 5.0);
  CHECK(lr == 1.0);
  lr = sched.maybe_decay(lr, 4.0);
  CHECK(lr == 1.0);
  lr = sched.maybe_decay(lr, 6.0);
  CHECK(lr == doctest::Approx(0.99));
  CHECK_THROWS_AS(sched.maybe_decay(lr, std::nan("")), numeric_error);

  nn::LrSchedule monotone;
  double lr2 = 1.0;
  for (double loss : {9.0, 8.0, 7.0, 6.5}) lr2 = monotone.maybe_decay(lr2, loss);
  CHECK(lr2 == 1.0);

  nn::LrSchedule repeat;
  double lr3 = 2.0;
  repeat.maybe_decay(lr3, 1.0);
  for (int k = 0; k < 5; ++k) lr3 = repeat.maybe_decay(lr3, 2.0);
  CHECK(lr3 == doctest::Approx(2.0 * std::pow(0.99, 5)));
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Mlp net({4, 10, 3}, OutputHead::scaled_sigmoid, false, 123);
  net.step_count = 77;
  const auto path = std::filesystem::temp_directory_path() / "pdl_ckpt_test.bin";
  nn::save_checkpoint(net, path);
  Mlp back = nn::load_checkpoint(path);
  CHECK(back.widths() == net.widths());
  CHECK(back.head() == net.head());
  CHECK(back.seed() == net.seed());
  CHECK(back.step_count == 77);
  CHECK(back.flatten_params() == net.flatten_params());
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects truncation and bad version") {
  Mlp net({2, 4, 1}, OutputHead::identity, false, 5);
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "pdl_ckpt_trunc.bin";
  nn::save_checkpoint(net, path);
  // truncate mid-blob
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 9);
  CHECK_THROWS_AS(nn::load_checkpoint(path), parse_error);
  std::filesystem::remove(path);

  const auto vpath = dir / "pdl_ckpt_badver.bin";
  std::ofstream out(vpath, std::ios::binary);
  out << "pdl-checkpoint 999\nblob\n";
  out.close();
  CHECK_THROWS_AS(nn::load_checkpoint(vpath), version_error);
  std::filesystem::remove(vpath);
}
