#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "polylut/config.hpp"
#include "polylut/dataset.hpp"
#include "polylut/error.hpp"
#include "polylut/trainer.hpp"

using namespace polylut;
using namespace gradcheck;

namespace {

Dataset spiral_train(std::size_t n_per_class = 100) {
  return split_normalize(gen_spirals(n_per_class, 0.1, 1.75, 7), 0.8, 11).first;
}

}  // namespace

TEST_CASE("sgdr schedule") {
  TrainConfig c;
  c.base_lr = 0.02;
  c.min_lr = 0.0;
  c.restart_period = 10.0;
  c.restart_mult = 1.0;
  CHECK(sgdr_lr(0.0, c) == 0.02);
  CHECK(sgdr_lr(5.0, c) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(sgdr_lr(10.0, c) == 0.02);
  CHECK(sgdr_lr(15.0, c) == doctest::Approx(0.01).epsilon(1e-12));
  c.restart_mult = 2.0;
  CHECK(sgdr_lr(10.0, c) == 0.02);
  CHECK(sgdr_lr(20.0, c) == doctest::Approx(0.01).epsilon(1e-12));  // second period has length 20
  CHECK(sgdr_lr(30.0, c) == 0.02);
  c.min_lr = 1e-3;
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const double t = rng.uniform(0.0, 100.0);
    const double lr = sgdr_lr(t, c);
    CHECK(lr <= c.base_lr + 1e-15);
    CHECK(lr >= c.min_lr - 1e-15);
  }
  for (double t = 0.0; t < 9.9; t += 0.1) CHECK(sgdr_lr(t + 0.1, c) <= sgdr_lr(t, c) + 1e-15);
}

TEST_CASE("adamw examples") {
  std::vector<double> w{1.0};
  AdamWState st;
  adamw_step(w, std::vector<double>{2.0}, st, 0.1, 0.0);
  CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-3));
  CHECK(st.step == 1);

  std::vector<double> p{0.5, -2.0, 3.0};
  AdamWState s2;
  const auto before = p;
  for (int i = 0; i < 5; ++i) adamw_step(p, std::vector<double>{0.0, 0.0, 0.0}, s2, 0.1, 0.0);
  CHECK(p == before);

  std::vector<double> d{1.0};
  AdamWState s3;
  adamw_step(d, std::vector<double>{0.0}, s3, 0.1, 0.1);
  CHECK(d[0] == doctest::Approx(0.99).epsilon(1e-12));
}

TEST_CASE("adamw matches a direct bias-corrected recurrence") {
  Rng rng(8);
  std::vector<double> p{0.3}, g(1);
  AdamWState st;
  double m = 0.0, v = 0.0, ref = 0.3;
  for (int t = 1; t <= 20; ++t) {
    g[0] = rng.uniform(-1.0, 1.0);
    adamw_step(p, g, st, 0.05, 0.01);
    ref -= 0.05 * 0.01 * ref;
    m = 0.9 * m + 0.1 * g[0];
    v = 0.999 * v + 0.001 * g[0] * g[0];
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    ref -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p[0] == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("losses and their logit gradients") {
  const std::vector<double> logits{1.0, 2.0, 0.5, -1.0, 0.0, 3.0};
  const std::vector<int> labels{1, 2};
  std::vector<double> g(6);
  const double loss = loss_and_grad(logits, labels, 3, LossKind::kSoftmaxCrossEntropy, g);
  auto lse = [](double a, double b, double c) { return std::log(std::exp(a) + std::exp(b) + std::exp(c)); };
  CHECK(loss == doctest::Approx(((lse(1, 2, 0.5) - 2.0) + (lse(-1, 0, 3) - 3.0)) / 2.0).epsilon(1e-12));
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double num = oracle::central_difference(
        [&](double t) {
          auto z = logits;
          z[i] = t;
          return loss_and_grad(z, labels, 3, LossKind::kSoftmaxCrossEntropy, {});
        },
        logits[i], 1e-6);
    CHECK(oracle::rel_error(g[i], num, 1e-8) < 1e-6);
  }

  const std::vector<double> z{0.3, -2.0, 40.0};
  const std::vector<int> t{1, 0, 0};
  std::vector<double> gb(3);
  const double bce = loss_and_grad(z, t, 1, LossKind::kBinaryCrossEntropy, gb);
  const double want = (std::log1p(std::exp(-0.3)) + std::log1p(std::exp(-2.0)) + 40.0 + std::log1p(std::exp(-40.0))) / 3.0;
  CHECK(bce == doctest::Approx(want).epsilon(1e-12));
  for (std::size_t i = 0; i < 3; ++i) {
    const double sig = 1.0 / (1.0 + std::exp(-z[i]));
    CHECK(gb[i] == doctest::Approx((sig - t[i]) / 3.0).epsilon(1e-12));
  }
  CHECK(loss_kind_from_string(to_string(LossKind::kBinaryCrossEntropy)) == LossKind::kBinaryCrossEntropy);
  CHECK_THROWS_AS(loss_kind_from_string("hinge"), ConfigError);
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  const auto m = oracle::random_model(probe_spec(2), 4);
  Rng rng(1);
  const auto b = random_batch(6, 2, 2, rng);
  const auto r = forward(m, b.x, b.rows);
  const auto g = backward(m, r.cache, std::vector<double>(r.logits.size(), 0.0));
  for (const auto& lg : g.layers) {
    for (double v : lg.weights) CHECK(v == 0.0);
    for (double v : lg.gamma) CHECK(v == 0.0);
    for (double v : lg.beta) CHECK(v == 0.0);
    CHECK(lg.scale == 0.0);
  }
  CHECK(g.input_scale == 0.0);
  CHECK_THROWS_AS(backward(m, r.cache, std::vector<double>(3, 0.0)), Error);
  ForwardOptions eval;
  eval.training = false;
  CHECK_THROWS_AS(backward(m, forward(m, b.x, b.rows, eval).cache, std::vector<double>(r.logits.size())), Error);
}

TEST_CASE("gradients of weights and batch-norm parameters match central differences") {
  ForwardOptions opt;
  opt.quantize_input = false;
  opt.quantize_layer = {false, false};
  Rng rng(31);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 8; ++trial) {
    const int degree = 1 + trial % 3;
    const auto m = oracle::random_model(probe_spec(degree), rng.next());
    const auto b = random_batch(6, 2, 2, rng);
    if (!hidden_relu_clear(m, b, opt)) continue;
    ++checked;
    const auto g = analytic(m, b, opt, LossKind::kSoftmaxCrossEntropy);
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
      for (std::size_t i = 0; i < m.params()[l].weights.size(); ++i) {
        const double num = numeric(m, b, opt, LossKind::kSoftmaxCrossEntropy,
                                   [&](TrainedModel& t) -> double& { return t.mutable_params()[l].weights[i]; });
        CHECK(oracle::rel_error(g.layers[l].weights[i], num, 1e-6) < 1e-4);
      }
      for (std::size_t n = 0; n < m.params()[l].bn.channels(); ++n) {
        const double ng = numeric(m, b, opt, LossKind::kSoftmaxCrossEntropy,
                                  [&](TrainedModel& t) -> double& { return t.mutable_params()[l].bn.gamma[n]; });
        const double nb = numeric(m, b, opt, LossKind::kSoftmaxCrossEntropy,
                                  [&](TrainedModel& t) -> double& { return t.mutable_params()[l].bn.beta[n]; });
        CHECK(oracle::rel_error(g.layers[l].gamma[n], ng, 1e-6) < 1e-4);
        CHECK(oracle::rel_error(g.layers[l].beta[n], nb, 1e-6) < 1e-4);
      }
    }
  }
  CHECK(checked >= 5);
}

TEST_CASE("quantizer scale gradients match central differences off rounding boundaries") {
  Rng rng(41);
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 30; ++trial) {
    const auto m = oracle::random_model(probe_spec(2), rng.next());
    const auto b = random_batch(6, 2, 2, rng);
    const std::size_t which = trial % 3;  // 0: input, 1: layer 0, 2: layer 1
    ForwardOptions opt;
    opt.quantize_input = which == 0;
    opt.quantize_layer = {which == 1, which == 2};
    if (!hidden_relu_clear(m, b, opt)) continue;
    const auto r = forward(m, b.x, b.rows, opt);
    bool clear = true;
    if (which == 0) {
      for (double x : b.x) clear = clear && off_boundary(x, m.input_quant().scale);
    } else {
      const auto& c = r.cache.layers[which - 1];
      for (double v : c.v) clear = clear && off_boundary(v, m.params()[which - 1].quant.scale);
    }
    if (!clear) continue;
    ++checked;
    const auto g = analytic(m, b, opt, LossKind::kSoftmaxCrossEntropy);
    const double num =
        which == 0 ? numeric(m, b, opt, LossKind::kSoftmaxCrossEntropy,
                             [](TrainedModel& t) -> double& { return t.mutable_input_quant().scale; }, 1e-7)
                   : numeric(m, b, opt, LossKind::kSoftmaxCrossEntropy,
                             [&](TrainedModel& t) -> double& { return t.mutable_params()[which - 1].quant.scale; },
                             1e-7);
    const double got = which == 0 ? g.input_scale : g.layers[which - 1].scale;
    CHECK(oracle::rel_error(got, num, 1e-6) < 1e-4);
  }
  CHECK(checked >= 20);
}

TEST_CASE("single output neuron at degree one reduces to the logistic-regression gradient") {
  NetworkSpec s;
  s.input_features = 3;
  s.layer_widths = {1};
  s.fan_in = 3;
  s.degree = 1;
  s.beta = 4;
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = oracle::random_model(s, rng.next());
    const auto b = random_batch(7, 3, 2, rng);
    ForwardOptions opt;
    opt.quantize_input = false;
    opt.quantize_layer = {false};
    const auto r = forward(m, b.x, b.rows, opt);
    const auto g = analytic(m, b, opt, LossKind::kBinaryCrossEntropy);
    const std::size_t B = b.rows;
    const auto& p = m.params()[0];
    const auto& mask = m.masks()[0][0];
    // design matrix with a leading ones column, in mask order
    std::vector<std::vector<double>> X(B, std::vector<double>(4, 1.0));
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < 3; ++j) X[i][j + 1] = b.x[i * 3 + mask[j]];
    std::vector<double> z(B, 0.0);
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t t = 0; t < 4; ++t) z[i] += p.weights[t] * X[i][t];
    double mu = 0.0, var = 0.0;
    for (double v : z) mu += v / B;
    for (double v : z) var += (v - mu) * (v - mu) / B;
    const double inv = 1.0 / std::sqrt(var + p.bn.epsilon);
    std::vector<double> xhat(B), resid(B);
    for (std::size_t i = 0; i < B; ++i) {
      xhat[i] = (z[i] - mu) * inv;
      const double logit = p.bn.gamma[0] * xhat[i] + p.bn.beta[0];
      CHECK(r.logits[i] == doctest::Approx(logit).epsilon(1e-12));
      resid[i] = (1.0 / (1.0 + std::exp(-logit)) - b.y[i]) / B;
    }
    double db = 0.0, dg = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      db += resid[i];
      dg += resid[i] * xhat[i];
    }
    CHECK(g.layers[0].beta[0] == doctest::Approx(db).epsilon(1e-10));
    CHECK(g.layers[0].gamma[0] == doctest::Approx(dg).epsilon(1e-10));
    for (std::size_t t = 0; t < 4; ++t) {
      double mbar = 0.0;
      for (std::size_t i = 0; i < B; ++i) mbar += X[i][t] / B;
      double proj = 0.0;
      for (std::size_t i = 0; i < B; ++i) proj += xhat[i] * (X[i][t] - mbar) / B;
      double dw = 0.0;
      for (std::size_t i = 0; i < B; ++i) dw += resid[i] * ((X[i][t] - mbar) - xhat[i] * proj);
      dw *= p.bn.gamma[0] * inv;
      CHECK(oracle::rel_error(g.layers[0].weights[t], dw, 1e-7) < 1e-8);
    }
    CHECK(std::abs(g.layers[0].weights[0]) < 1e-14);  // batch norm cancels the constant term
  }
}

TEST_CASE("inputs outside a neuron's mask never reach it") {
  NetworkSpec s;
  s.input_features = 6;
  s.layer_widths = {4, 2};
  s.fan_in = 2;
  s.degree = 2;
  s.beta = 3;
  const auto m = oracle::random_model(s, 12);
  Rng rng(3);
  auto b = random_batch(5, 6, 2, rng);
  ForwardOptions opt;
  opt.quantize_input = false;
  const auto base = forward(m, b.x, b.rows, opt);
  for (std::size_t f = 0; f < 6; ++f) {
    auto moved = b;
    for (std::size_t i = 0; i < b.rows; ++i) moved.x[i * 6 + f] += rng.uniform(-3.0, 3.0);
    const auto r = forward(m, moved.x, moved.rows, opt);
    for (std::size_t n = 0; n < 4; ++n) {
      const auto& mask = m.masks()[0][n];
      if (std::find(mask.begin(), mask.end(), f) != mask.end()) continue;
      for (std::size_t i = 0; i < b.rows; ++i) CHECK(r.cache.layers[0].z[n * b.rows + i] == base.cache.layers[0].z[n * b.rows + i]);
    }
  }
}

TEST_CASE("forward rejects bad shapes and reports divergence") {
  auto m = oracle::random_model(probe_spec(2), 4);
  CHECK_THROWS_AS(forward(m, std::vector<double>(5), 3), Error);
  ForwardOptions opt;
  opt.quantize_layer = {true};
  CHECK_THROWS_AS(forward(m, std::vector<double>(4), 2, opt), Error);
  m.mutable_params()[0].bn.running_var[0] = -1.0;
  ForwardOptions eval;
  eval.training = false;
  CHECK_THROWS_AS(forward(m, std::vector<double>{0.1, 0.2}, 1, eval), DivergenceError);
}

TEST_CASE("training is deterministic and reduces the loss") {
  const auto tr = spiral_train();
  const auto te = split_normalize(gen_spirals(100, 0.1, 1.75, 7), 0.8, 11).second;
  auto spec = profile_spec("spiral");
  TrainConfig c = profile_config("spiral").training;
  c.epochs = 30;
  const auto a = train(spec, tr, te, c);
  const auto b = train(spec, tr, te, c);
  CHECK(a.history == b.history);
  CHECK(a.model == b.model);
  REQUIRE(a.history.size() == 30);
  CHECK(a.history.back().train_loss < a.initial_loss);
  CHECK(a.history.front().lr == c.base_lr);
  c.seed += 1;
  CHECK(train(spec, tr, te, c).history != a.history);
}

TEST_CASE("degree one trains exactly like the explicit linear network") {
  const auto tr = spiral_train(60);
  const auto te = split_normalize(gen_spirals(60, 0.1, 1.75, 7), 0.8, 11).second;
  auto spec = profile_spec("spiral");
  spec.degree = 1;
  TrainConfig c = profile_config("spiral").training;
  c.epochs = 8;
  c.batch_size = 32;
  c.weight_decay = 1e-3;
  const auto init = init_model(spec, tr, c);
  oracle::LinearNet lin(init);
  const auto ref = lin.train(tr, te, c);
  const auto got = train(init, tr, te, c);
  REQUIRE(got.history.size() == ref.size());
  for (std::size_t e = 0; e < ref.size(); ++e) {
    CAPTURE(e);
    CHECK(got.history[e].lr == ref[e].lr);
    CHECK(got.history[e].batch_loss == ref[e].batch_loss);
    CHECK(got.history[e].train_loss == ref[e].train_loss);
    CHECK(got.history[e].train_accuracy == ref[e].train_accuracy);
    CHECK(got.history[e].test_accuracy == ref[e].test_accuracy);
  }
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK(validate_train_config(c).empty());
  c.epochs = 0;
  c.min_lr = 1.0;
  c.batch_size = 0;
  CHECK(validate_train_config(c).size() >= 3);
  const auto tr = spiral_train(20);
  CHECK_THROWS_AS(train(profile_spec("spiral"), tr, tr, c), ConfigError);
  auto spec = profile_spec("spiral");
  spec.input_features = 3;
  CHECK_THROWS_AS(train(spec, tr, tr, TrainConfig{}), ConfigError);
}

TEST_CASE("history csv") {
  std::vector<EpochRecord> h{{0, 0.01, 0.5, 0.75, 0.7, 0.55}, {1, 0.005, 0.25, 0.875, 0.8, 0.3}};
  std::ostringstream out;
  write_history_csv(out, h);
  const auto text = out.str();
  CHECK(text.rfind("epoch,lr,train_loss,test_accuracy,train_accuracy,batch_loss\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
