#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "polylut/trainer.hpp"

// Probe models and finite-difference plumbing for gradient checks.
namespace gradcheck {

using namespace polylut;

inline NetworkSpec probe_spec(int degree) {
  NetworkSpec s;
  s.input_features = 2;
  s.layer_widths = {2, 2};
  s.fan_in = 2;
  s.degree = degree;
  s.beta = 3;
  s.input_beta = 4;
  s.seed = 5;
  return s;
}

struct Batch {
  std::vector<double> x;
  std::vector<int> y;
  std::size_t rows = 0;
};

inline Batch random_batch(std::size_t rows, std::size_t cols, int classes, Rng& rng) {
  Batch b;
  b.rows = rows;
  for (std::size_t i = 0; i < rows * cols; ++i) b.x.push_back(rng.uniform(-1.0, 1.0));
  for (std::size_t i = 0; i < rows; ++i) b.y.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
  return b;
}

inline double batch_loss(const TrainedModel& m, const Batch& b, const ForwardOptions& opt, LossKind kind) {
  const auto r = forward(m, b.x, b.rows, opt);
  const std::size_t classes = m.spec().output_width();
  return loss_and_grad(r.logits, b.y, classes, kind, {});
}

inline Gradients analytic(const TrainedModel& m, const Batch& b, const ForwardOptions& opt, LossKind kind) {
  const auto r = forward(m, b.x, b.rows, opt);
  std::vector<double> dlog(r.logits.size());
  loss_and_grad(r.logits, b.y, m.spec().output_width(), kind, dlog);
  return backward(m, r.cache, dlog);
}

// Finite difference of the batch loss in one scalar reached through `slot`.
template <typename Slot>
double numeric(const TrainedModel& m, const Batch& b, const ForwardOptions& opt, LossKind kind,
               Slot slot, double h = 1e-5) {
  auto probe = m;
  double& ref = slot(probe);
  const double x0 = ref;
  return oracle::central_difference(
      [&](double t) {
        ref = t;
        const double v = batch_loss(probe, b, opt, kind);
        ref = x0;
        return v;
      },
      x0, h);
}

inline bool hidden_relu_clear(const TrainedModel& m, const Batch& b, const ForwardOptions& opt) {
  const auto r = forward(m, b.x, b.rows, opt);
  for (std::size_t l = 0; l + 1 < r.cache.layers.size(); ++l)
    for (double y : r.cache.layers[l].y)
      if (std::abs(y) < 1e-3) return false;
  return true;
}

inline bool off_boundary(double v, double scale) {
  const double r = v / scale;
  const double frac = std::abs(r - std::trunc(r));
  return std::abs(frac - 0.5) > 1e-2;
}

// Largest relative error over every weight, batch-norm parameter and
// quantizer scale of random probe models, with quantizers bypassed except the
// one whose scale is checked and inputs kept off rounding boundaries.
struct Summary {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // which partial gave max_rel_error
};

inline Summary probe_all(std::uint64_t seed, int models, double h = 1e-5) {
  Summary s;
  Rng rng(seed);
  std::string what;
  auto note = [&](double a, double n) {
    const double e = oracle::rel_error(a, n, 1e-6);
    if (e > s.max_rel_error) {
      s.max_rel_error = e;
      s.worst = what + " (analytic " + std::to_string(a) + ", numeric " + std::to_string(n) + ")";
    }
    ++s.checked;
  };
  int done = 0;
  while (done < models) {
    const auto m = oracle::random_model(probe_spec(1 + done % 3), rng.next());
    const auto b = random_batch(6, 2, 2, rng);
    ForwardOptions off;
    off.quantize_input = false;
    off.quantize_layer = std::vector<bool>(m.layer_count(), false);
    if (!hidden_relu_clear(m, b, off)) continue;
    const auto g = analytic(m, b, off, LossKind::kSoftmaxCrossEntropy);
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
      what = "layer " + std::to_string(l) + " weights";
      for (std::size_t i = 0; i < m.params()[l].weights.size(); ++i)
        note(g.layers[l].weights[i], numeric(m, b, off, LossKind::kSoftmaxCrossEntropy,
                                             [&](TrainedModel& t) -> double& { return t.mutable_params()[l].weights[i]; }, h));
      for (std::size_t n = 0; n < m.params()[l].bn.channels(); ++n) {
        what = "layer " + std::to_string(l) + " batch norm";
        note(g.layers[l].gamma[n], numeric(m, b, off, LossKind::kSoftmaxCrossEntropy,
                                           [&](TrainedModel& t) -> double& { return t.mutable_params()[l].bn.gamma[n]; }, h));
        note(g.layers[l].beta[n], numeric(m, b, off, LossKind::kSoftmaxCrossEntropy,
                                          [&](TrainedModel& t) -> double& { return t.mutable_params()[l].bn.beta[n]; }, h));
      }
    }
    for (std::size_t which = 0; which <= m.layer_count(); ++which) {
      ForwardOptions opt = off;
      if (which == 0) opt.quantize_input = true;
      else opt.quantize_layer[which - 1] = true;
      if (!hidden_relu_clear(m, b, opt)) continue;
      bool clear = true;
      if (which == 0) {
        for (double x : b.x) clear = clear && off_boundary(x, m.input_quant().scale);
      } else {
        const auto r = forward(m, b.x, b.rows, opt);
        for (double v : r.cache.layers[which - 1].v) clear = clear && off_boundary(v, m.params()[which - 1].quant.scale);
      }
      if (!clear) continue;
      const auto gq = analytic(m, b, opt, LossKind::kSoftmaxCrossEntropy);
      what = which == 0 ? "input scale" : "layer " + std::to_string(which - 1) + " scale";
      if (which == 0) {
        note(gq.input_scale, numeric(m, b, opt, LossKind::kSoftmaxCrossEntropy,
                                     [](TrainedModel& t) -> double& { return t.mutable_input_quant().scale; }, h));
      } else {
        note(gq.layers[which - 1].scale,
             numeric(m, b, opt, LossKind::kSoftmaxCrossEntropy,
                     [&](TrainedModel& t) -> double& { return t.mutable_params()[which - 1].quant.scale; }, h));
      }
    }
    ++done;
  }
  return s;
}

}  // namespace gradcheck
