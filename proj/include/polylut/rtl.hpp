#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polylut/netlist.hpp"
#include "polylut/tabulate.hpp"

namespace polylut {

/// 64-bit FNV-1a over the table's widths and entries.
std::uint64_t table_hash(const TruthTable& table);

/// Verilog-2001 module for one truth table: a synchronous case-statement ROM
/// with a registered output. Address bit order follows the tabulation
/// packing (input 0 in the least significant slice).
std::string emit_neuron(const TruthTable& table, const std::string& name);

/// Hands out neuron modules and rejects duplicate module names.
class RtlEmitter {
 public:
  std::string emit_neuron(const TruthTable& table, const std::string& name);

 private:
  std::set<std::string> names_;
};

std::string neuron_module_name(std::size_t layer, std::size_t index);

/// Top module instantiating every node. Wiring follows the node sources; each
/// layer is one register stage. in_data packs input i at bits
/// [i*b, (i+1)*b); out_data packs output k likewise.
std::string emit_top(const Netlist& net, const std::string& name = "top");

/// Packed primary-input word for `inputs` as hex, most significant digit first.
std::string pack_hex(std::span<const std::uint32_t> values, int bits_per_value);
std::vector<std::uint32_t> unpack_hex(const std::string& hex, std::size_t count, int bits_per_value);

struct GoldenVector {
  std::vector<std::uint32_t> inputs;
  std::vector<std::uint32_t> outputs;
  bool operator==(const GoldenVector&) const = default;
};

/// Runs each input vector through simulate() and renders one
/// "<input hex> <output hex>" line per transaction.
std::vector<GoldenVector> golden_vectors(const Netlist& net,
                                         const std::vector<std::vector<std::uint32_t>>& inputs);
std::string emit_golden_vectors(const Netlist& net, const std::vector<GoldenVector>& vectors);
std::vector<GoldenVector> parse_golden_vectors(const Netlist& net, const std::string& text);

/// Every input combination when the primary inputs span at most
/// `exhaustive_limit_bits` bits, otherwise `count` seeded random vectors.
std::vector<std::vector<std::uint32_t>> stimulus(const Netlist& net, int exhaustive_limit_bits,
                                                 std::size_t count, std::uint64_t seed);

/// Self-checking testbench that replays vectors.hex against the top module.
std::string emit_testbench(const Netlist& net, const std::string& top = "top");

struct RtlBundle {
  std::vector<std::pair<std::string, std::string>> modules;  // file name, text
  std::string top;
  std::string testbench;
  std::string vectors;
  std::string manifest;
};

RtlBundle emit_bundle(const Netlist& net, const std::vector<GoldenVector>& vectors);
void write_bundle(const std::string& dir, const RtlBundle& bundle);
RtlBundle read_bundle(const std::string& dir);

// Structural checker over our own emission.

struct NeuronModuleInfo {
  std::string name;
  int input_width = 0;
  int output_width = 0;
  bool registered = false;
  bool has_default = false;
  std::size_t arms = 0;
  std::vector<std::uint32_t> table;  // by address; entries absent from the case read as 0
  std::vector<std::string> errors;
};

NeuronModuleInfo parse_neuron_module(const std::string& text);

struct InstanceInfo {
  std::string module;
  std::string instance;
  std::string input_bus;                  // bus the address slices come from
  std::vector<std::pair<int, int>> slices;  // (msb, lsb) per address slice, LSB slice first
  std::string output_bus;
  int output_msb = 0;
  int output_lsb = 0;
};

struct TopInfo {
  std::string name;
  int input_width = 0;
  int output_width = 0;
  std::vector<std::pair<std::string, int>> buses;  // declared wires and widths
  std::vector<InstanceInfo> instances;
  std::string output_assign;  // bus driving out_data
  std::vector<std::string> errors;
};

TopInfo parse_top(const std::string& text);

/// Confirms entry counts, port widths, registered outputs, unique names,
/// mask-faithful wiring, pipeline depth, table hashes and golden vectors.
/// Returns a list of problems (empty when the bundle is sound).
std::vector<std::string> check_bundle(const RtlBundle& bundle, const Netlist& net);

}  // namespace polylut
