#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polylut/poly_basis.hpp"
#include "polylut/quantize.hpp"

namespace polylut {

/// Default enumeration guard: a neuron's truth table may address at most
/// 2^24 entries.
inline constexpr int kDefaultMaxTableBits = 24;

/// Compile-time description of a sparse polynomial LUT network.
///
/// Layer 0 reads the `input_features` primary inputs; every later layer reads
/// the previous layer's outputs. `input_beta` / `input_fan_in` override the
/// bit width of the primary inputs and the fan-in of layer 0.
struct NetworkSpec {
  std::size_t input_features = 0;
  std::vector<std::size_t> layer_widths;
  int beta = 2;
  int fan_in = 2;
  int degree = 1;
  std::optional<int> input_beta;
  std::optional<int> input_fan_in;
  std::uint64_t seed = 0;
  double clock_period_ns = 1.6;
  int max_table_bits = kDefaultMaxTableBits;

  std::size_t layer_count() const noexcept { return layer_widths.size(); }
  /// Bits per primary input code.
  int primary_beta() const noexcept { return input_beta.value_or(beta); }
  int layer_fan_in(std::size_t layer) const noexcept {
    return layer == 0 ? input_fan_in.value_or(fan_in) : fan_in;
  }
  /// Bits per code feeding `layer`.
  int layer_input_beta(std::size_t layer) const noexcept {
    return layer == 0 ? primary_beta() : beta;
  }
  /// Number of signals `layer` can draw its inputs from.
  std::size_t layer_source_count(std::size_t layer) const noexcept {
    return layer == 0 ? input_features : layer_widths[layer - 1];
  }
  /// Address width of each truth table in `layer`.
  int table_input_bits(std::size_t layer) const noexcept {
    return layer_input_beta(layer) * layer_fan_in(layer);
  }
  std::size_t output_width() const noexcept { return layer_widths.empty() ? 0 : layer_widths.back(); }
  std::size_t neuron_count() const noexcept;

  bool operator==(const NetworkSpec&) const = default;
};

/// Returns every violated invariant (empty when the spec is valid).
std::vector<std::string> validate_spec(const NetworkSpec& spec);
/// Throws ConfigError listing all violations.
void require_valid(const NetworkSpec& spec);

/// Bundled architectures: jsc-m, jsc-m-lite, jsc-xl, nid-lite, hdr, spiral.
NetworkSpec profile_spec(std::string_view name);
std::vector<std::string> profile_names();

/// Per neuron, the sorted distinct indices of the signals it reads.
using SparsityMask = std::vector<std::vector<std::uint32_t>>;

/// Draws fixed fan-in masks for every layer from a generator seeded with
/// `seed`. Each neuron samples its sources uniformly without replacement.
/// When fan_in * width(l) >= width(l-1), every source of the previous layer is
/// guaranteed to feed at least one neuron.
std::vector<SparsityMask> build_masks(const NetworkSpec& spec, std::uint64_t seed);

/// Trained parameters of one layer.
struct LayerParams {
  std::size_t terms = 0;        // monomials per neuron
  std::vector<double> weights;  // width x terms, row-major
  BatchNormParams bn;
  Quantizer quant;  // output activation quantizer

  std::span<const double> row(std::size_t neuron) const {
    return std::span<const double>(weights).subspan(neuron * terms, terms);
  }
  std::span<double> row(std::size_t neuron) {
    return std::span<double>(weights).subspan(neuron * terms, terms);
  }

  bool operator==(const LayerParams&) const = default;
};

/// Output quantizer for `layer`: unsigned (quantized ReLU) for hidden layers,
/// signed for the output layer.
Quantizer layer_quantizer(const NetworkSpec& spec, std::size_t layer, double scale = 1.0);
/// Signed quantizer for the primary inputs.
Quantizer input_quantizer(const NetworkSpec& spec, double scale = 1.0);

/// Sum of w_i * m_i(x) accumulated in basis order from zero.
double weighted_sum(std::span<const double> weights, std::span<const double> monomials);

/// A sparse polynomial network with every parameter fixed.
///
/// infer_codes() and neuron_code() are the reference integer semantics that
/// truth tables, the netlist simulator and the emitted RTL reproduce.
class TrainedModel {
 public:
  TrainedModel() = default;
  TrainedModel(NetworkSpec spec, std::vector<SparsityMask> masks, std::vector<LayerParams> params,
               Quantizer input_quantizer);

  /// Fresh model: masks from spec.seed, zero weights, identity batch norm,
  /// unit scales.
  static TrainedModel zeros(const NetworkSpec& spec);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const std::vector<SparsityMask>& masks() const noexcept { return masks_; }
  const std::vector<LayerParams>& params() const noexcept { return params_; }
  std::vector<LayerParams>& mutable_params() noexcept { return params_; }
  const Quantizer& input_quant() const noexcept { return input_quant_; }
  Quantizer& mutable_input_quant() noexcept { return input_quant_; }
  const MonomialBasis& basis(std::size_t layer) const { return bases_.at(layer); }
  std::size_t layer_count() const noexcept { return params_.size(); }

  /// Quantizer of the codes that feed `layer`.
  const Quantizer& source_quant(std::size_t layer) const {
    return layer == 0 ? input_quant_ : params_[layer - 1].quant;
  }

  /// Pre-activation of one neuron for already-dequantized inputs.
  double preactivation(std::size_t layer, std::size_t neuron, std::span<const double> inputs) const;
  /// Output code of one neuron for already-dequantized inputs.
  int neuron_code(std::size_t layer, std::size_t neuron, std::span<const double> inputs) const;

  /// Primary-input codes for a real feature vector.
  std::vector<int> quantize_inputs(std::span<const double> features) const;
  /// Per-layer output codes for the given primary-input codes.
  std::vector<std::vector<int>> infer_codes(std::span<const int> input_codes) const;
  std::vector<int> output_codes(std::span<const int> input_codes) const;
  /// Class prediction from output codes: argmax (first maximum) for several
  /// outputs, code > 0 for a single output.
  static int classify(std::span<const int> output_codes);
  int predict(std::span<const double> features) const;

  bool operator==(const TrainedModel& other) const;

 private:
  NetworkSpec spec_;
  std::vector<SparsityMask> masks_;
  std::vector<LayerParams> params_;
  Quantizer input_quant_;
  std::vector<MonomialBasis> bases_;
};

/// Versioned little-endian binary checkpoint.
void write_checkpoint(std::ostream& out, const TrainedModel& model);
TrainedModel read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const TrainedModel& model);
TrainedModel load_checkpoint(const std::string& path);

}  // namespace polylut
