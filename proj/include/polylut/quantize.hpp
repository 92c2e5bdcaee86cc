#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace polylut {

/// Uniform quantizer with a learned scale.
///
/// Unsigned codes span [0, 2^bits - 1]; signed codes span
/// [-2^(bits-1), 2^(bits-1) - 1]. A code c represents the real value c * scale.
struct Quantizer {
  int bits = 1;
  bool is_signed = false;
  double scale = 1.0;

  int min_code() const noexcept { return is_signed ? -(1 << (bits - 1)) : 0; }
  int max_code() const noexcept { return is_signed ? (1 << (bits - 1)) - 1 : (1 << bits) - 1; }
  int code_count() const noexcept { return 1 << bits; }

  bool operator==(const Quantizer&) const = default;
};

/// clamp(round(v / scale)) with rounding half away from zero.
int quantize(double v, const Quantizer& q);

/// c * scale. Throws Error if c lies outside the code range.
double dequantize(int code, const Quantizer& q);

/// Straight-through estimator: passes `upstream` when round(v / scale) is
/// inside the code range, zero when the clamp is active.
double ste_backward(double upstream, double v, const Quantizer& q);

/// d(code(v) * scale) / d scale with the code held fixed: the (clamped) code.
double scale_grad(double v, const Quantizer& q);

/// Two's-complement bit pattern of `code` in the low `bits` bits.
std::uint32_t encode_code(int code, int bits);
/// Inverse of encode_code for the given signedness.
int decode_code(std::uint32_t raw, int bits, bool is_signed);

/// Per-channel batch normalization parameters and running statistics.
struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = 1e-5;

  static BatchNormParams identity(std::size_t channels, double epsilon = 1e-5);
  std::size_t channels() const noexcept { return gamma.size(); }

  bool operator==(const BatchNormParams&) const = default;
};

/// Inference-mode normalization with running statistics.
double bn_apply(double x, const BatchNormParams& p, std::size_t channel);

/// Batch statistics of one channel from a training-mode forward pass.
struct BnBatchStats {
  double mean = 0.0;
  double var = 0.0;  // biased
  double inv_std = 0.0;
};

/// Training-mode normalization of one channel over a batch. Writes the
/// normalized values to `xhat` and the affine output to `y`.
BnBatchStats bn_batch_forward(std::span<const double> z, double gamma, double beta, double epsilon,
                              std::span<double> xhat, std::span<double> y);

/// Backward pass matching bn_batch_forward. Writes dL/dz and accumulates the
/// gamma/beta gradients.
void bn_batch_backward(std::span<const double> dy, std::span<const double> xhat, double gamma,
                       double inv_std, std::span<double> dz, double& dgamma, double& dbeta);

/// Exponential running-average update; the variance update uses the unbiased
/// batch variance.
void bn_update_running(BatchNormParams& p, std::size_t channel, const BnBatchStats& stats,
                       std::size_t batch_size, double momentum);

}  // namespace polylut
