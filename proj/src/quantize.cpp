#include "polylut/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "polylut/error.hpp"

namespace polylut {

namespace {

double rounded_clamped(double v, const Quantizer& q) {
  const double r = std::round(v / q.scale);
  return std::clamp(r, static_cast<double>(q.min_code()), static_cast<double>(q.max_code()));
}

}  // namespace

int quantize(double v, const Quantizer& q) { return static_cast<int>(rounded_clamped(v, q)); }

double dequantize(int code, const Quantizer& q) {
  if (code < q.min_code() || code > q.max_code()) {
    throw Error("dequantize: code " + std::to_string(code) + " outside [" +
                std::to_string(q.min_code()) + ", " + std::to_string(q.max_code()) + "]");
  }
  return static_cast<double>(code) * q.scale;
}

double ste_backward(double upstream, double v, const Quantizer& q) {
  const double r = std::round(v / q.scale);
  return (r >= q.min_code() && r <= q.max_code()) ? upstream : 0.0;
}

double scale_grad(double v, const Quantizer& q) { return rounded_clamped(v, q); }

std::uint32_t encode_code(int code, int bits) {
  const std::uint32_t mask = (bits >= 32) ? 0xffffffffu : ((1u << bits) - 1u);
  return static_cast<std::uint32_t>(code) & mask;
}

int decode_code(std::uint32_t raw, int bits, bool is_signed) {
  if (!is_signed) return static_cast<int>(raw);
  const std::uint32_t sign = 1u << (bits - 1);
  return (raw & sign) ? static_cast<int>(raw) - (1 << bits) : static_cast<int>(raw);
}

BatchNormParams BatchNormParams::identity(std::size_t channels, double epsilon) {
  BatchNormParams p;
  p.gamma.assign(channels, 1.0);
  p.beta.assign(channels, 0.0);
  p.running_mean.assign(channels, 0.0);
  p.running_var.assign(channels, 1.0);
  p.epsilon = epsilon;
  return p;
}

double bn_apply(double x, const BatchNormParams& p, std::size_t channel) {
  return p.gamma[channel] * (x - p.running_mean[channel]) /
             std::sqrt(p.running_var[channel] + p.epsilon) +
         p.beta[channel];
}

BnBatchStats bn_batch_forward(std::span<const double> z, double gamma, double beta, double epsilon,
                              std::span<double> xhat, std::span<double> y) {
  const auto n = static_cast<double>(z.size());
  BnBatchStats s;
  for (double v : z) s.mean += v;
  s.mean /= n;
  for (double v : z) s.var += (v - s.mean) * (v - s.mean);
  s.var /= n;
  s.inv_std = 1.0 / std::sqrt(s.var + epsilon);
  for (std::size_t i = 0; i < z.size(); ++i) {
    xhat[i] = (z[i] - s.mean) * s.inv_std;
    y[i] = gamma * xhat[i] + beta;
  }
  return s;
}

void bn_batch_backward(std::span<const double> dy, std::span<const double> xhat, double gamma,
                       double inv_std, std::span<double> dz, double& dgamma, double& dbeta) {
  const auto n = static_cast<double>(dy.size());
  double sum_dxhat = 0.0;
  double sum_dxhat_xhat = 0.0;
  for (std::size_t i = 0; i < dy.size(); ++i) {
    dgamma += dy[i] * xhat[i];
    dbeta += dy[i];
    const double dxhat = dy[i] * gamma;
    sum_dxhat += dxhat;
    sum_dxhat_xhat += dxhat * xhat[i];
  }
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const double dxhat = dy[i] * gamma;
    dz[i] = inv_std / n * (n * dxhat - sum_dxhat - xhat[i] * sum_dxhat_xhat);
  }
}

void bn_update_running(BatchNormParams& p, std::size_t channel, const BnBatchStats& stats,
                       std::size_t batch_size, double momentum) {
  const double unbiased =
      batch_size > 1 ? stats.var * static_cast<double>(batch_size) / static_cast<double>(batch_size - 1)
                     : stats.var;
  p.running_mean[channel] = (1.0 - momentum) * p.running_mean[channel] + momentum * stats.mean;
  p.running_var[channel] = (1.0 - momentum) * p.running_var[channel] + momentum * unbiased;
}

}  // namespace polylut
