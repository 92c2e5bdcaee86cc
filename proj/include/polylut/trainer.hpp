#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "polylut/dataset.hpp"
#include "polylut/network.hpp"

namespace polylut {

enum class LossKind { kSoftmaxCrossEntropy, kBinaryCrossEntropy };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// Hyper-parameters of quantization-aware training. The learning rate follows
/// cosine annealing with warm restarts; `restart_period` is measured in
/// epochs and may be fractional.
struct TrainConfig {
  int epochs = 1000;
  std::size_t batch_size = 1024;
  double base_lr = 2e-2;
  double min_lr = 1e-4;
  double weight_decay = 1e-4;
  double restart_period = 50.0;
  double restart_mult = 1.0;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kSoftmaxCrossEntropy;
  double bn_momentum = 0.1;
  // Quantizer scales step at lr * scale_lr_mult; at the full rate Adam moves
  // a scale by ~lr per step, enough to push every code to zero.
  double scale_lr_mult = 0.1;

  bool operator==(const TrainConfig&) const = default;
};

std::vector<std::string> validate_train_config(const TrainConfig& config);

/// Learning rate at fractional epoch `t` >= 0.
double sgdr_lr(double t, const TrainConfig& config);

/// Adam moments for one parameter tensor.
struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One AdamW update. The decay shrinks the parameters directly
/// (p -= lr * weight_decay * p) before the moment-based step.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                double lr, double weight_decay);

/// Mean loss over a batch of logits (rows x classes, row-major); writes
/// dLoss/dlogit into `dlogits` when it is non-empty.
double loss_and_grad(std::span<const double> logits, std::span<const int> labels,
                     std::size_t classes, LossKind kind, std::span<double> dlogits);

/// Which quantizers are active in a forward pass. An inactive quantizer passes
/// its input through unchanged (the ReLU of hidden layers stays).
struct ForwardOptions {
  bool training = true;  // batch statistics in batch norm
  bool quantize_input = true;
  std::vector<bool> quantize_layer;  // empty: all layers quantized

  bool layer_quantized(std::size_t l) const {
    return quantize_layer.empty() || quantize_layer.at(l);
  }
};

/// Intermediate values of one layer, neuron-major ([neuron][row]...).
struct LayerCache {
  std::size_t width = 0;
  std::size_t fan_in = 0;
  std::size_t terms = 0;
  bool quantized = true;
  std::vector<double> x;  // gathered inputs   [n][b][j]
  std::vector<double> m;  // monomials         [n][b][i]
  std::vector<double> z;  // weighted sums     [n][b]
  std::vector<double> xhat;
  std::vector<double> y;  // batch-norm output [n][b]
  std::vector<double> v;  // value entering the quantizer
  std::vector<double> a;  // layer output      [n][b]
  std::vector<BnBatchStats> stats;
};

struct ForwardCache {
  std::size_t batch = 0;
  bool training = true;
  bool input_quantized = true;
  std::vector<double> input;  // raw features    [feature][b]
  std::vector<double> a0;     // primary signals [feature][b]
  std::vector<LayerCache> layers;
};

struct ForwardResult {
  std::vector<double> logits;  // rows x output width
  ForwardCache cache;
};

/// Batched forward pass over `rows` feature vectors (row-major). Throws
/// DivergenceError (epoch -1) naming the layer on a non-finite activation.
ForwardResult forward(const TrainedModel& model, std::span<const double> batch, std::size_t rows,
                      const ForwardOptions& options = {});

struct LayerGrads {
  std::vector<double> weights;
  std::vector<double> gamma;
  std::vector<double> beta;
  double scale = 0.0;
};

struct Gradients {
  std::vector<LayerGrads> layers;
  double input_scale = 0.0;
};

/// Back-propagates dLoss/dlogits through a training-mode forward cache.
Gradients backward(const TrainedModel& model, const ForwardCache& cache,
                   std::span<const double> dlogits);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Loss and accuracy of the integer reference path (running batch-norm
/// statistics, every quantizer active).
EvalResult evaluate(const TrainedModel& model, const Dataset& data, LossKind kind);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double batch_loss = 0.0;  // mean training-mode loss over the epoch's batches

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  TrainedModel model;
  double initial_loss = 0.0;
  std::vector<EpochRecord> history;
};

/// Random initialization: weights uniform in +-sqrt(1 / terms) drawn from a
/// generator seeded with `config.seed` (layer by layer, neuron by neuron),
/// identity batch norm, then quantizer scales set to max|v| / max_code over
/// the first `batch_size` training rows.
TrainedModel init_model(const NetworkSpec& spec, const Dataset& train_set, const TrainConfig& config);

/// Seed of the generator that shuffles each epoch's row order.
inline std::uint64_t shuffle_seed(const TrainConfig& config) { return config.seed + 1; }

/// Mini-batch training. Rows are reshuffled every epoch; a trailing batch
/// with a single row is skipped. Throws DivergenceError carrying the epoch on
/// a non-finite loss.
TrainResult train(const TrainedModel& initial, const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& config);
TrainResult train(const NetworkSpec& spec, const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& config);

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

}  // namespace polylut
