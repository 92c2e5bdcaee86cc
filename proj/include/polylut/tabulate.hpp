#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "polylut/network.hpp"

namespace polylut {

/// Truth table of one neuron (one logical LUT).
///
/// The address packs the neuron's F input codes: input j occupies bits
/// [j * beta_in, (j + 1) * beta_in), input 0 in the least significant slice.
/// Signed codes are stored in two's complement within their slice. Entries
/// hold the output code's bit pattern in the low `output_bits` bits.
struct TruthTable {
  int input_bits = 0;
  int output_bits = 0;
  std::vector<std::uint8_t> entries;

  std::size_t size() const noexcept { return entries.size(); }
  std::uint32_t at(std::uint32_t address) const { return entries.at(address); }
  bool operator==(const TruthTable&) const = default;
};

/// Bytes a table of `input_bits` address bits and `output_bits` outputs
/// occupies: 2^input_bits * ceil(output_bits / 8).
std::uint64_t table_bytes(int input_bits, int output_bits);

/// Packs per-input bit patterns into a table address.
std::uint32_t pack_address(const std::vector<std::uint32_t>& raw_codes, int bits_per_input);

/// Exhaustively evaluates neuron `neuron` of `layer` over every input
/// combination. Throws ConfigError if the address width exceeds the spec's
/// enumeration guard.
TruthTable tabulate_neuron(const TrainedModel& model, std::size_t layer, std::size_t neuron);

/// Tables of every neuron of a layer. Neurons are split across up to
/// `threads` workers (0: hardware concurrency); output is independent of the
/// worker count.
std::vector<TruthTable> tabulate_layer(const TrainedModel& model, std::size_t layer,
                                       unsigned threads = 0);
std::vector<std::vector<TruthTable>> tabulate_model(const TrainedModel& model, unsigned threads = 0);

/// Addresses whose entry disagrees with TrainedModel::neuron_code.
struct TableCheck {
  std::uint64_t checked = 0;
  std::vector<std::uint32_t> mismatches;
};

/// Re-evaluates `sample_count` random addresses (all of them when the table
/// has at most 2^16 entries) through the model and reports disagreements.
TableCheck verify_table(const TruthTable& table, const TrainedModel& model, std::size_t layer,
                        std::size_t neuron, std::size_t sample_count, std::uint64_t seed = 0);

/// Per-layer text dump:
///
///   polylut-tables v1
///   layer <l> neurons <n> input_bits <b> output_bits <o>
///   neuron <k>
///   <entries as hex digits, 32 per line, ceil(o/4) digits each, space separated>
///   ...
void write_table_dump(std::ostream& out, std::size_t layer, const std::vector<TruthTable>& tables);
std::vector<TruthTable> read_table_dump(std::istream& in, std::size_t& layer);
std::string table_dump_filename(std::size_t layer);

}  // namespace polylut
