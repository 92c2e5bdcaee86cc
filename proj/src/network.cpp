#include "polylut/network.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <utility>

#include "polylut/error.hpp"
#include "polylut/rng.hpp"

namespace polylut {

std::size_t NetworkSpec::neuron_count() const noexcept {
  return std::accumulate(layer_widths.begin(), layer_widths.end(), std::size_t{0});
}

std::vector<std::string> validate_spec(const NetworkSpec& spec) {
  std::vector<std::string> v;
  auto add = [&v](std::string s) { v.push_back(std::move(s)); };

  if (spec.input_features < 1) add("input_features must be >= 1");
  if (spec.layer_widths.empty()) add("layer_widths must name at least one layer");
  for (std::size_t l = 0; l < spec.layer_widths.size(); ++l) {
    if (spec.layer_widths[l] < 1) add("layer_widths[" + std::to_string(l) + "] must be >= 1");
  }
  if (spec.beta < 1 || spec.beta > 8) add("beta must be in [1, 8], got " + std::to_string(spec.beta));
  if (spec.input_beta && (*spec.input_beta < 1 || *spec.input_beta > 8)) {
    add("input_beta must be in [1, 8], got " + std::to_string(*spec.input_beta));
  }
  if (spec.fan_in < 1) add("fan_in must be >= 1, got " + std::to_string(spec.fan_in));
  if (spec.input_fan_in && *spec.input_fan_in < 1) {
    add("input_fan_in must be >= 1, got " + std::to_string(*spec.input_fan_in));
  }
  if (spec.degree < 1) add("degree must be >= 1, got " + std::to_string(spec.degree));
  if (!(spec.clock_period_ns > 0.0)) add("clock_period_ns must be positive");
  if (spec.max_table_bits < 1 || spec.max_table_bits > 30) {
    add("max_table_bits must be in [1, 30], got " + std::to_string(spec.max_table_bits));
  }

  for (std::size_t l = 0; l < spec.layer_widths.size(); ++l) {
    const int f = spec.layer_fan_in(l);
    if (f < 1) continue;
    const std::size_t sources = spec.layer_source_count(l);
    if (sources >= 1 && static_cast<std::size_t>(f) > sources) {
      add("layer " + std::to_string(l) + ": fan_in " + std::to_string(f) + " exceeds " +
          std::to_string(sources) + " available sources");
    }
    const int bits = spec.table_input_bits(l);
    if (bits > spec.max_table_bits && spec.layer_input_beta(l) >= 1) {
      add("layer " + std::to_string(l) + ": enumeration guard: beta*F = " + std::to_string(bits) +
          " exceeds " + std::to_string(spec.max_table_bits));
    }
    if (spec.degree >= 1) {
      try {
        if (count_monomials(f, spec.degree) > kDefaultMaxTerms) {
          add("layer " + std::to_string(l) + ": monomial count exceeds cap");
        }
      } catch (const Error&) {
        add("layer " + std::to_string(l) + ": monomial count overflows");
      }
    }
  }
  return v;
}

void require_valid(const NetworkSpec& spec) {
  const auto violations = validate_spec(spec);
  if (violations.empty()) return;
  std::string msg = "invalid network spec:";
  for (const auto& s : violations) msg += "\n  - " + s;
  throw ConfigError(msg);
}

NetworkSpec profile_spec(std::string_view name) {
  NetworkSpec s;
  s.seed = 1;
  s.clock_period_ns = 1.6;
  if (name == "jsc-m") {
    s.input_features = 16;
    s.layer_widths = {64, 32, 32, 32, 5};
    s.beta = 3;
    s.fan_in = 4;
  } else if (name == "jsc-m-lite") {
    s.input_features = 16;
    s.layer_widths = {64, 32, 5};
    s.beta = 3;
    s.fan_in = 4;
  } else if (name == "jsc-xl") {
    s.input_features = 16;
    s.layer_widths = {128, 64, 64, 64, 5};
    s.beta = 5;
    s.fan_in = 3;
    s.input_beta = 7;
    s.input_fan_in = 2;
  } else if (name == "nid-lite") {
    s.input_features = 49;
    s.layer_widths = {686, 147, 98, 49, 1};
    s.beta = 2;
    s.fan_in = 7;
    s.input_beta = 1;
  } else if (name == "hdr") {
    s.input_features = 784;
    s.layer_widths = {256, 100, 100, 100, 100, 10};
    s.beta = 2;
    s.fan_in = 6;
  } else if (name == "spiral") {
    s.input_features = 2;
    s.layer_widths = {32, 32, 2};
    s.beta = 3;
    s.fan_in = 3;
    s.input_beta = 6;
    s.input_fan_in = 2;
    s.degree = 3;
  } else {
    throw ConfigError("unknown profile '" + std::string(name) + "'");
  }
  return s;
}

std::vector<std::string> profile_names() {
  return {"jsc-m", "jsc-m-lite", "jsc-xl", "nid-lite", "hdr", "spiral"};
}

namespace {

// Replaces duplicated sources with uncovered ones until every source feeds a
// neuron. Needs fan_in * width >= sources; returns false if it gets stuck.
bool repair_coverage(SparsityMask& mask, std::size_t sources, Rng& rng) {
  std::vector<std::size_t> uses(sources, 0);
  for (const auto& row : mask)
    for (auto s : row) ++uses[s];

  std::vector<std::uint32_t> uncovered;
  for (std::size_t s = 0; s < sources; ++s)
    if (uses[s] == 0) uncovered.push_back(static_cast<std::uint32_t>(s));

  for (auto u : uncovered) {
    // Candidate slots hold a source that some other neuron also reads.
    std::vector<std::pair<std::size_t, std::size_t>> slots;
    for (std::size_t n = 0; n < mask.size(); ++n)
      for (std::size_t j = 0; j < mask[n].size(); ++j)
        if (uses[mask[n][j]] >= 2) slots.emplace_back(n, j);
    if (slots.empty()) return false;
    const auto [n, j] = slots[rng.below(slots.size())];
    --uses[mask[n][j]];
    mask[n][j] = u;
    ++uses[u];
  }
  for (auto& row : mask) std::sort(row.begin(), row.end());
  return true;
}

}  // namespace

std::vector<SparsityMask> build_masks(const NetworkSpec& spec, std::uint64_t seed) {
  require_valid(spec);
  constexpr int kRetries = 32;
  Rng rng(seed);
  std::vector<SparsityMask> masks;
  masks.reserve(spec.layer_count());

  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t sources = spec.layer_source_count(l);
    const std::size_t width = spec.layer_widths[l];
    const auto f = static_cast<std::size_t>(spec.layer_fan_in(l));
    const bool need_cover = f * width >= sources;

    std::vector<std::uint32_t> pool(sources);
    std::iota(pool.begin(), pool.end(), 0u);

    SparsityMask mask;
    bool ok = false;
    for (int attempt = 0; attempt < kRetries && !ok; ++attempt) {
      mask.assign(width, {});
      for (auto& row : mask) {
        // Partial Fisher-Yates: the first f entries are a uniform draw
        // without replacement.
        for (std::size_t j = 0; j < f; ++j) {
          const auto k = j + static_cast<std::size_t>(rng.below(sources - j));
          std::swap(pool[j], pool[k]);
        }
        row.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(f));
        std::sort(row.begin(), row.end());
      }
      ok = !need_cover || repair_coverage(mask, sources, rng);
    }
    if (!ok) {
      throw ConfigError("build_masks: layer " + std::to_string(l) +
                        ": could not cover every source within the retry budget");
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

Quantizer layer_quantizer(const NetworkSpec& spec, std::size_t layer, double scale) {
  const bool is_output = layer + 1 == spec.layer_count();
  return Quantizer{spec.beta, is_output, scale};
}

Quantizer input_quantizer(const NetworkSpec& spec, double scale) {
  return Quantizer{spec.primary_beta(), true, scale};
}

double weighted_sum(std::span<const double> weights, std::span<const double> monomials) {
  double z = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * monomials[i];
  return z;
}

TrainedModel::TrainedModel(NetworkSpec spec, std::vector<SparsityMask> masks,
                           std::vector<LayerParams> params, Quantizer input_quantizer)
    : spec_(std::move(spec)),
      masks_(std::move(masks)),
      params_(std::move(params)),
      input_quant_(input_quantizer) {
  require_valid(spec_);
  const std::size_t layers = spec_.layer_count();
  if (masks_.size() != layers || params_.size() != layers) {
    throw ConfigError("model: mask/param layer count does not match spec");
  }
  bases_.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    bases_.push_back(enumerate_basis(spec_.layer_fan_in(l), spec_.degree));
    const std::size_t width = spec_.layer_widths[l];
    const auto& p = params_[l];
    if (p.terms != bases_[l].size() || p.weights.size() != width * p.terms) {
      throw ConfigError("model: layer " + std::to_string(l) + " weight shape mismatch");
    }
    if (p.bn.channels() != width || p.bn.beta.size() != width || p.bn.running_mean.size() != width ||
        p.bn.running_var.size() != width) {
      throw ConfigError("model: layer " + std::to_string(l) + " batch-norm shape mismatch");
    }
    if (!(p.quant.scale > 0.0)) {
      throw ConfigError("model: layer " + std::to_string(l) + " quantizer scale must be positive");
    }
    if (masks_[l].size() != width) {
      throw ConfigError("model: layer " + std::to_string(l) + " mask width mismatch");
    }
    for (const auto& row : masks_[l]) {
      if (row.size() != static_cast<std::size_t>(spec_.layer_fan_in(l))) {
        throw ConfigError("model: layer " + std::to_string(l) + " mask arity mismatch");
      }
      for (auto s : row) {
        if (s >= spec_.layer_source_count(l)) {
          throw ConfigError("model: layer " + std::to_string(l) + " mask index out of range");
        }
      }
    }
  }
  if (!(input_quant_.scale > 0.0)) throw ConfigError("model: input scale must be positive");
}

TrainedModel TrainedModel::zeros(const NetworkSpec& spec) {
  auto masks = build_masks(spec, spec.seed);
  std::vector<LayerParams> params;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    LayerParams p;
    p.terms = static_cast<std::size_t>(count_monomials(spec.layer_fan_in(l), spec.degree));
    p.weights.assign(spec.layer_widths[l] * p.terms, 0.0);
    p.bn = BatchNormParams::identity(spec.layer_widths[l]);
    p.quant = layer_quantizer(spec, l);
    params.push_back(std::move(p));
  }
  return TrainedModel(spec, std::move(masks), std::move(params), input_quantizer(spec));
}

double TrainedModel::preactivation(std::size_t layer, std::size_t neuron,
                                   std::span<const double> inputs) const {
  const auto& basis = bases_[layer];
  thread_local std::vector<double> m;
  m.resize(basis.size());
  basis.expand(inputs, m);
  return weighted_sum(params_[layer].row(neuron), m);
}

int TrainedModel::neuron_code(std::size_t layer, std::size_t neuron,
                              std::span<const double> inputs) const {
  const auto& p = params_[layer];
  double y = bn_apply(preactivation(layer, neuron, inputs), p.bn, neuron);
  const bool hidden = layer + 1 < params_.size();
  if (hidden && y < 0.0) y = 0.0;
  return quantize(y, p.quant);
}

std::vector<int> TrainedModel::quantize_inputs(std::span<const double> features) const {
  if (features.size() != spec_.input_features) {
    throw Error("quantize_inputs: expected " + std::to_string(spec_.input_features) +
                " features, got " + std::to_string(features.size()));
  }
  std::vector<int> codes(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) codes[i] = quantize(features[i], input_quant_);
  return codes;
}

std::vector<std::vector<int>> TrainedModel::infer_codes(std::span<const int> input_codes) const {
  if (input_codes.size() != spec_.input_features) {
    throw Error("infer_codes: expected " + std::to_string(spec_.input_features) + " codes, got " +
                std::to_string(input_codes.size()));
  }
  std::vector<std::vector<int>> trace;
  trace.reserve(params_.size());
  std::vector<double> x;
  for (std::size_t l = 0; l < params_.size(); ++l) {
    std::span<const int> prev = l == 0 ? input_codes : std::span<const int>(trace.back());
    const Quantizer& src_q = source_quant(l);
    std::vector<int> out(masks_[l].size());
    for (std::size_t n = 0; n < masks_[l].size(); ++n) {
      const auto& row = masks_[l][n];
      x.resize(row.size());
      for (std::size_t j = 0; j < row.size(); ++j) x[j] = dequantize(prev[row[j]], src_q);
      out[n] = neuron_code(l, n, x);
    }
    trace.push_back(std::move(out));
  }
  return trace;
}

std::vector<int> TrainedModel::output_codes(std::span<const int> input_codes) const {
  return infer_codes(input_codes).back();
}

int TrainedModel::classify(std::span<const int> output_codes) {
  if (output_codes.size() == 1) return output_codes[0] > 0 ? 1 : 0;
  return static_cast<int>(std::max_element(output_codes.begin(), output_codes.end()) -
                          output_codes.begin());
}

int TrainedModel::predict(std::span<const double> features) const {
  const auto codes = quantize_inputs(features);
  return classify(output_codes(codes));
}

bool TrainedModel::operator==(const TrainedModel& other) const {
  return spec_ == other.spec_ && masks_ == other.masks_ && params_ == other.params_ &&
         input_quant_ == other.input_quant_ && bases_ == other.bases_;
}

}  // namespace polylut
