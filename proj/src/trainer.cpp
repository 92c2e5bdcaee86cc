#include "polylut/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include "polylut/error.hpp"
#include "polylut/rng.hpp"

namespace polylut {

std::string to_string(LossKind kind) {
  return kind == LossKind::kSoftmaxCrossEntropy ? "softmax" : "bce";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "softmax" || name == "softmax_cross_entropy") return LossKind::kSoftmaxCrossEntropy;
  if (name == "bce" || name == "binary_cross_entropy") return LossKind::kBinaryCrossEntropy;
  throw ConfigError("unknown loss '" + name + "' (expected softmax or bce)");
}

std::vector<std::string> validate_train_config(const TrainConfig& c) {
  std::vector<std::string> v;
  if (c.epochs < 1) v.push_back("epochs must be >= 1");
  if (c.batch_size < 1) v.push_back("batch_size must be >= 1");
  if (!(c.min_lr > 0.0 && c.min_lr <= c.base_lr)) v.push_back("need 0 < min_lr <= base_lr");
  if (c.weight_decay < 0.0) v.push_back("weight_decay must be >= 0");
  if (!(c.restart_period > 0.0)) v.push_back("restart_period must be positive");
  if (!(c.restart_mult >= 1.0)) v.push_back("restart_mult must be >= 1");
  if (!(c.bn_momentum > 0.0 && c.bn_momentum <= 1.0)) v.push_back("bn_momentum must be in (0, 1]");
  if (!(c.scale_lr_mult >= 0.0)) v.push_back("scale_lr_mult must be >= 0");
  return v;
}

double sgdr_lr(double t, const TrainConfig& c) {
  double period = c.restart_period;
  double cur = std::max(t, 0.0);
  if (c.restart_mult == 1.0) {
    cur = std::fmod(cur, period);
  } else {
    while (cur >= period) {
      cur -= period;
      period *= c.restart_mult;
    }
  }
  return c.min_lr + (c.base_lr - c.min_lr) * (1.0 + std::cos(std::numbers::pi * cur / period)) / 2.0;
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& s, double lr,
                double weight_decay) {
  if (s.m.size() != params.size()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    params[i] -= lr * weight_decay * params[i];
    const double mhat = s.m[i] / bc1;
    const double vhat = s.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}

double loss_and_grad(std::span<const double> logits, std::span<const int> labels,
                     std::size_t classes, LossKind kind, std::span<double> dlogits) {
  const std::size_t rows = labels.size();
  const double inv = 1.0 / static_cast<double>(rows);
  const bool want_grad = !dlogits.empty();
  double total = 0.0;
  if (kind == LossKind::kBinaryCrossEntropy) {
    if (classes != 1) throw Error("binary cross-entropy needs a single output");
    for (std::size_t b = 0; b < rows; ++b) {
      const double l = logits[b];
      const double y = labels[b] > 0 ? 1.0 : 0.0;
      total += std::max(l, 0.0) - l * y + std::log1p(std::exp(-std::abs(l)));
      if (want_grad) dlogits[b] = (1.0 / (1.0 + std::exp(-l)) - y) * inv;
    }
    return total * inv;
  }
  for (std::size_t b = 0; b < rows; ++b) {
    const double* row = logits.data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(row[k] - mx);
    const auto y = static_cast<std::size_t>(labels[b]);
    total += std::log(sum) + mx - row[y];
    if (want_grad) {
      for (std::size_t k = 0; k < classes; ++k) {
        const double p = std::exp(row[k] - mx) / sum;
        dlogits[b * classes + k] = (p - (k == y ? 1.0 : 0.0)) * inv;
      }
    }
  }
  return total * inv;
}

ForwardResult forward(const TrainedModel& model, std::span<const double> batch, std::size_t rows,
                      const ForwardOptions& options) {
  const auto& spec = model.spec();
  const std::size_t d = spec.input_features;
  if (batch.size() != rows * d) {
    throw Error("forward: batch has " + std::to_string(batch.size()) + " values, expected " +
                std::to_string(rows) + " x " + std::to_string(d));
  }
  if (!options.quantize_layer.empty() && options.quantize_layer.size() != model.layer_count()) {
    throw Error("forward: quantize_layer must name every layer");
  }
  ForwardResult res;
  ForwardCache& cache = res.cache;
  cache.batch = rows;
  cache.training = options.training;
  cache.input_quantized = options.quantize_input;
  cache.input.resize(d * rows);
  cache.a0.resize(d * rows);
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t f = 0; f < d; ++f) {
      const double x = batch[b * d + f];
      cache.input[f * rows + b] = x;
      cache.a0[f * rows + b] =
          options.quantize_input ? quantize(x, model.input_quant()) * model.input_quant().scale : x;
    }
  }

  const std::size_t layers = model.layer_count();
  cache.layers.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& p = model.params()[l];
    const auto& mask = model.masks()[l];
    const auto& basis = model.basis(l);
    const std::vector<double>& prev = l == 0 ? cache.a0 : cache.layers[l - 1].a;
    const bool hidden = l + 1 < layers;

    LayerCache& c = cache.layers[l];
    c.width = mask.size();
    c.fan_in = static_cast<std::size_t>(spec.layer_fan_in(l));
    c.terms = basis.size();
    c.quantized = options.layer_quantized(l);
    c.x.resize(c.width * rows * c.fan_in);
    c.m.resize(c.width * rows * c.terms);
    c.z.resize(c.width * rows);
    c.xhat.resize(c.width * rows);
    c.y.resize(c.width * rows);
    c.v.resize(c.width * rows);
    c.a.resize(c.width * rows);
    c.stats.assign(c.width, {});

    for (std::size_t n = 0; n < c.width; ++n) {
      const auto w = p.row(n);
      for (std::size_t b = 0; b < rows; ++b) {
        const std::span<double> x(c.x.data() + (n * rows + b) * c.fan_in, c.fan_in);
        for (std::size_t j = 0; j < c.fan_in; ++j) x[j] = prev[mask[n][j] * rows + b];
        const std::span<double> m(c.m.data() + (n * rows + b) * c.terms, c.terms);
        basis.expand(x, m);
        c.z[n * rows + b] = weighted_sum(w, m);
      }
      const std::span<const double> z(c.z.data() + n * rows, rows);
      const std::span<double> xhat(c.xhat.data() + n * rows, rows);
      const std::span<double> y(c.y.data() + n * rows, rows);
      if (options.training) {
        c.stats[n] = bn_batch_forward(z, p.bn.gamma[n], p.bn.beta[n], p.bn.epsilon, xhat, y);
      } else {
        for (std::size_t b = 0; b < rows; ++b) y[b] = bn_apply(z[b], p.bn, n);
      }
      for (std::size_t b = 0; b < rows; ++b) {
        const std::size_t i = n * rows + b;
        const double v = hidden ? std::max(c.y[i], 0.0) : c.y[i];
        if (!std::isfinite(v)) {
          throw DivergenceError("non-finite activation in layer " + std::to_string(l) +
                                    ", neuron " + std::to_string(n),
                                -1);
        }
        c.v[i] = v;
        c.a[i] = c.quantized ? quantize(v, p.quant) * p.quant.scale : v;
      }
    }
  }

  const auto& last = cache.layers.back();
  const std::size_t classes = last.width;
  res.logits.resize(rows * classes);
  for (std::size_t b = 0; b < rows; ++b)
    for (std::size_t k = 0; k < classes; ++k) res.logits[b * classes + k] = last.a[k * rows + b];
  return res;
}

Gradients backward(const TrainedModel& model, const ForwardCache& cache,
                   std::span<const double> dlogits) {
  if (!cache.training) throw Error("backward: needs a training-mode forward cache");
  const std::size_t rows = cache.batch;
  const std::size_t layers = model.layer_count();
  if (cache.layers.size() != layers) throw Error("backward: cache does not match model");
  const std::size_t classes = cache.layers.back().width;
  if (dlogits.size() != rows * classes) {
    throw Error("backward: gradient has " + std::to_string(dlogits.size()) + " values, expected " +
                std::to_string(rows * classes));
  }

  Gradients g;
  g.layers.resize(layers);
  std::vector<double> da(classes * rows);
  for (std::size_t b = 0; b < rows; ++b)
    for (std::size_t k = 0; k < classes; ++k) da[k * rows + b] = dlogits[b * classes + k];

  std::vector<double> dv(rows), dz(rows), jac;
  for (std::size_t l = layers; l-- > 0;) {
    const auto& p = model.params()[l];
    const auto& c = cache.layers[l];
    const auto& mask = model.masks()[l];
    const auto& basis = model.basis(l);
    const bool hidden = l + 1 < layers;
    LayerGrads& lg = g.layers[l];
    lg.weights.assign(p.weights.size(), 0.0);
    lg.gamma.assign(c.width, 0.0);
    lg.beta.assign(c.width, 0.0);

    const std::size_t prev_width = l == 0 ? model.spec().input_features : cache.layers[l - 1].width;
    std::vector<double> da_prev(prev_width * rows, 0.0);
    jac.resize(c.terms * c.fan_in);

    for (std::size_t n = 0; n < c.width; ++n) {
      for (std::size_t b = 0; b < rows; ++b) {
        const std::size_t i = n * rows + b;
        double d = da[i];
        if (c.quantized) {
          lg.scale += d * scale_grad(c.v[i], p.quant);
          d = ste_backward(d, c.v[i], p.quant);
        }
        if (hidden && !(c.y[i] > 0.0)) d = 0.0;
        dv[b] = d;
      }
      bn_batch_backward(dv, std::span<const double>(c.xhat.data() + n * rows, rows), p.bn.gamma[n],
                        c.stats[n].inv_std, dz, lg.gamma[n], lg.beta[n]);

      const auto w = p.row(n);
      double* dw = lg.weights.data() + n * c.terms;
      for (std::size_t b = 0; b < rows; ++b) {
        const double* m = c.m.data() + (n * rows + b) * c.terms;
        for (std::size_t t = 0; t < c.terms; ++t) dw[t] += dz[b] * m[t];
      }
      for (std::size_t b = 0; b < rows; ++b) {
        const std::span<const double> x(c.x.data() + (n * rows + b) * c.fan_in, c.fan_in);
        basis.expand_grad(x, jac);
        for (std::size_t j = 0; j < c.fan_in; ++j) {
          double dx = 0.0;
          for (std::size_t t = 0; t < c.terms; ++t) dx += (dz[b] * w[t]) * jac[t * c.fan_in + j];
          da_prev[mask[n][j] * rows + b] += dx;
        }
      }
    }
    da = std::move(da_prev);
  }

  if (cache.input_quantized) {
    const auto& q = model.input_quant();
    for (std::size_t i = 0; i < da.size(); ++i) g.input_scale += da[i] * scale_grad(cache.input[i], q);
  }
  return g;
}

EvalResult evaluate(const TrainedModel& model, const Dataset& data, LossKind kind) {
  EvalResult r;
  if (data.rows == 0) return r;
  const auto& out_q = model.params().back().quant;
  const std::size_t classes = model.spec().output_width();
  std::vector<double> logits(data.rows * classes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    const auto codes = model.output_codes(model.quantize_inputs(data.row(i)));
    for (std::size_t k = 0; k < classes; ++k) logits[i * classes + k] = dequantize(codes[k], out_q);
    if (TrainedModel::classify(codes) == data.labels[i]) ++correct;
  }
  r.loss = loss_and_grad(logits, data.labels, classes, kind, {});
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.rows);
  return r;
}

namespace {

double scale_for(double max_abs, const Quantizer& q) {
  const double denom = std::max(1, q.max_code());
  return max_abs > 0.0 ? max_abs / denom : 1.0;
}

void check_data(const NetworkSpec& spec, const Dataset& ds, const char* which, LossKind kind) {
  if (ds.cols != spec.input_features) {
    throw ConfigError(std::string(which) + " set has " + std::to_string(ds.cols) +
                      " features, network expects " + std::to_string(spec.input_features));
  }
  const auto classes = static_cast<int>(spec.output_width());
  for (int y : ds.labels) {
    const bool ok = kind == LossKind::kBinaryCrossEntropy ? (y == 0 || y == 1) : (y >= 0 && y < classes);
    if (!ok) throw ConfigError(std::string(which) + " set label " + std::to_string(y) + " out of range");
  }
}

}  // namespace

TrainedModel init_model(const NetworkSpec& spec, const Dataset& train_set, const TrainConfig& config) {
  TrainedModel model = TrainedModel::zeros(spec);
  check_data(spec, train_set, "training", config.loss);
  if (train_set.rows == 0) throw ConfigError("training set is empty");
  Rng rng(config.seed);
  for (auto& p : model.mutable_params()) {
    const double bound = std::sqrt(1.0 / static_cast<double>(p.terms));
    for (auto& w : p.weights) w = rng.uniform(-bound, bound);
  }

  const std::size_t rows = std::min(config.batch_size, train_set.rows);
  const std::span<const double> warm(train_set.features.data(), rows * train_set.cols);
  double max_in = 0.0;
  for (double x : warm) max_in = std::max(max_in, std::abs(x));
  model.mutable_input_quant().scale = scale_for(max_in, model.input_quant());

  const std::size_t layers = model.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    ForwardOptions opt;
    opt.training = rows > 1;
    opt.quantize_layer.assign(layers, false);
    for (std::size_t k = 0; k < l; ++k) opt.quantize_layer[k] = true;
    const auto res = forward(model, warm, rows, opt);
    double mx = 0.0;
    for (double v : res.cache.layers[l].v) mx = std::max(mx, std::abs(v));
    auto& q = model.mutable_params()[l].quant;
    q.scale = scale_for(mx, q);
  }
  return model;
}

namespace {

struct ParamStates {
  std::vector<AdamWState> weights, gamma, beta, scale;
  AdamWState input_scale;
};

constexpr double kMinScale = 1e-6;

}  // namespace

TrainResult train(const TrainedModel& initial, const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& config) {
  if (const auto v = validate_train_config(config); !v.empty()) throw ConfigError("train config: " + v.front());
  const auto& spec = initial.spec();
  check_data(spec, train_set, "training", config.loss);
  if (test_set.rows > 0) check_data(spec, test_set, "test", config.loss);
  if (train_set.rows < 2) throw ConfigError("training set needs at least two rows");

  TrainResult result{initial, 0.0, {}};
  TrainedModel& model = result.model;
  const std::size_t layers = model.layer_count();
  const std::size_t d = spec.input_features;
  const std::size_t classes = spec.output_width();

  ParamStates st;
  st.weights.resize(layers);
  st.gamma.resize(layers);
  st.beta.resize(layers);
  st.scale.resize(layers);

  result.initial_loss = evaluate(model, train_set, config.loss).loss;

  std::vector<std::size_t> order(train_set.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffler(shuffle_seed(config));
  const std::size_t bs = config.batch_size;
  const std::size_t n_batches = (train_set.rows + bs - 1) / bs;
  std::vector<double> xb;
  std::vector<int> yb;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffler.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    const double epoch_lr = sgdr_lr(epoch, config);
    for (std::size_t bi = 0; bi < n_batches; ++bi) {
      const std::size_t begin = bi * bs;
      const std::size_t rows = std::min(bs, train_set.rows - begin);
      if (rows < 2) continue;
      xb.resize(rows * d);
      yb.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const auto src = train_set.row(order[begin + r]);
        std::copy(src.begin(), src.end(), xb.begin() + static_cast<std::ptrdiff_t>(r * d));
        yb[r] = train_set.labels[order[begin + r]];
      }
      const double lr =
          sgdr_lr(epoch + static_cast<double>(bi) / static_cast<double>(n_batches), config);

      ForwardResult fr;
      try {
        fr = forward(model, xb, rows);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch), epoch);
      }
      std::vector<double> dlogits(rows * classes);
      const double loss = loss_and_grad(fr.logits, yb, classes, config.loss, dlogits);
      if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch), epoch);
      }
      loss_sum += loss;
      ++loss_count;
      const Gradients g = backward(model, fr.cache, dlogits);

      for (std::size_t l = 0; l < layers; ++l) {
        auto& p = model.mutable_params()[l];
        const auto& lg = g.layers[l];
        adamw_step(p.weights, lg.weights, st.weights[l], lr, config.weight_decay);
        adamw_step(p.bn.gamma, lg.gamma, st.gamma[l], lr, 0.0);
        adamw_step(p.bn.beta, lg.beta, st.beta[l], lr, 0.0);
        adamw_step(std::span<double>(&p.quant.scale, 1), std::span<const double>(&lg.scale, 1),
                   st.scale[l], lr * config.scale_lr_mult, 0.0);
        p.quant.scale = std::max(p.quant.scale, kMinScale);
        for (std::size_t n = 0; n < p.bn.channels(); ++n) {
          bn_update_running(p.bn, n, fr.cache.layers[l].stats[n], rows, config.bn_momentum);
        }
      }
      auto& iq = model.mutable_input_quant();
      adamw_step(std::span<double>(&iq.scale, 1), std::span<const double>(&g.input_scale, 1),
                 st.input_scale, lr * config.scale_lr_mult, 0.0);
      iq.scale = std::max(iq.scale, kMinScale);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = epoch_lr;
    const EvalResult tr = evaluate(model, train_set, config.loss);
    if (!std::isfinite(tr.loss)) {
      throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch), epoch);
    }
    rec.train_loss = tr.loss;
    rec.train_accuracy = tr.accuracy;
    rec.test_accuracy = test_set.rows > 0 ? evaluate(model, test_set, config.loss).accuracy : 0.0;
    rec.batch_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    result.history.push_back(rec);
  }
  return result;
}

TrainResult train(const NetworkSpec& spec, const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& config) {
  return train(init_model(spec, train_set, config), train_set, test_set, config);
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,lr,train_loss,test_accuracy,train_accuracy,batch_loss\n";
  out.precision(17);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.test_accuracy << ','
        << r.train_accuracy << ',' << r.batch_loss << '\n';
  }
}

}  // namespace polylut
