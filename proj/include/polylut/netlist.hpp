#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polylut/dataset.hpp"
#include "polylut/network.hpp"
#include "polylut/tabulate.hpp"

namespace polylut {

/// One logical LUT. Sources index the previous layer's nodes (or the primary
/// inputs for layer 0), in table-address order.
struct LutNode {
  std::size_t layer = 0;
  std::size_t index = 0;
  TruthTable table;
  std::vector<std::uint32_t> sources;

  bool operator==(const LutNode&) const = default;
};

struct NetlistLayer {
  int input_bits_per_source = 0;
  int output_bits = 0;
  bool output_signed = false;
  std::vector<LutNode> nodes;

  bool operator==(const NetlistLayer&) const = default;
};

/// Strictly layered LUT DAG; each layer is one pipeline stage.
struct Netlist {
  std::size_t input_count = 0;
  int input_bits = 0;
  bool input_signed = true;
  std::vector<NetlistLayer> layers;
  double clock_period_ns = 1.6;

  std::size_t node_count() const noexcept;
  std::size_t output_count() const noexcept { return layers.empty() ? 0 : layers.back().nodes.size(); }
  int output_bits() const noexcept { return layers.empty() ? 0 : layers.back().output_bits; }
  bool output_signed() const noexcept { return !layers.empty() && layers.back().output_signed; }

  bool operator==(const Netlist&) const = default;
};

/// Wires tables according to the model's masks. Throws Error on a missing
/// table or a mask/table arity mismatch.
Netlist build_netlist(const TrainedModel& model, const std::vector<std::vector<TruthTable>>& tables);

/// Checks the structural invariants (layering, arity, widths); throws Error.
void validate_netlist(const Netlist& net);

struct SimResult {
  std::vector<std::uint32_t> outputs;             // raw output-layer patterns
  std::vector<std::vector<std::uint32_t>> trace;  // per layer
};

/// Integer-only evaluation from raw primary-input bit patterns. Throws Error
/// when an input does not fit in the input width.
SimResult simulate(const Netlist& net, std::span<const std::uint32_t> inputs);

/// Decodes raw output patterns to class id (argmax, or code > 0 for a single
/// output), matching TrainedModel::classify.
int netlist_classify(const Netlist& net, std::span<const std::uint32_t> outputs);

struct Mismatch {
  std::size_t vector = 0;  // index into the checked vectors
  std::size_t layer = 0;   // first disagreeing node, in layer order
  std::size_t node = 0;
};

struct EquivalenceOptions {
  /// Exhaustive when input_count * input_bits <= this many bits.
  int exhaustive_limit_bits = 20;
  std::size_t random_budget = 10000;
  std::uint64_t seed = 0;
  std::size_t max_reported = 16;
};

struct EquivalenceReport {
  bool exhaustive = false;
  std::uint64_t vectors = 0;
  std::uint64_t mismatch_count = 0;
  std::vector<Mismatch> mismatches;  // first max_reported
  std::size_t labelled_rows = 0;
  double model_accuracy = 0.0;
  double netlist_accuracy = 0.0;
};

/// Compares simulate() against TrainedModel::infer_codes node by node.
/// Checks every input combination when small enough, otherwise the
/// dataset's rows (quantized) plus `random_budget` random input vectors.
EquivalenceReport equivalence_check(const Netlist& net, const TrainedModel& model,
                                    const Dataset* data, const EquivalenceOptions& options = {});

/// Estimated physical K-LUTs for one output bit of an N-input function:
/// 1 when N <= K, otherwise 2^(N-K) leaf LUTs plus a 2:1 mux tree of
/// 2^(N-K) - 1 nodes, i.e. 2^(N-K+1) - 1.
std::uint64_t lut_cost(int input_bits, int k = 6);

struct LayerCost {
  std::size_t nodes = 0;
  int input_bits = 0;
  int output_bits = 0;
  std::uint64_t luts = 0;
};

struct CostReport {
  std::vector<LayerCost> layers;
  std::uint64_t total_luts = 0;
  std::size_t cycles = 0;
  double clock_period_ns = 0.0;
  double latency_ns = 0.0;
  int k = 6;
};

CostReport report(const Netlist& net, int k = 6);
std::string format_report(const CostReport& r);
void write_report_csv(std::ostream& out, const CostReport& r);

/// Text export:
///
///   polylut-netlist v1
///   inputs <count> bits <b> signed|unsigned
///   clock_ns <period>
///   layers <L>
///   layer <l> nodes <n> source_bits <b> output_bits <o> signed|unsigned tables <file>
///   node <l> <k> sources <s0> ... <sF-1>
///   ...
///
/// Tables live in per-layer dump files next to the netlist.
void write_netlist(const std::string& dir, const Netlist& net);
Netlist read_netlist(const std::string& dir);
inline constexpr const char* kNetlistFile = "netlist.txt";

}  // namespace polylut
