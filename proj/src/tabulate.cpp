#include "polylut/tabulate.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "polylut/error.hpp"
#include "polylut/rng.hpp"

namespace polylut {

std::uint64_t table_bytes(int input_bits, int output_bits) {
  return (std::uint64_t{1} << input_bits) * static_cast<std::uint64_t>((output_bits + 7) / 8);
}

std::uint32_t pack_address(const std::vector<std::uint32_t>& raw_codes, int bits_per_input) {
  std::uint32_t addr = 0;
  for (std::size_t j = 0; j < raw_codes.size(); ++j) {
    addr |= raw_codes[j] << (static_cast<int>(j) * bits_per_input);
  }
  return addr;
}

namespace {

void check_guard(const NetworkSpec& spec, std::size_t layer) {
  const int bits = spec.table_input_bits(layer);
  if (bits > spec.max_table_bits) {
    throw ConfigError("layer " + std::to_string(layer) + ": enumeration guard: " +
                      std::to_string(bits) + " address bits exceed " +
                      std::to_string(spec.max_table_bits) + " (" +
                      std::to_string(table_bytes(bits, spec.beta)) + " bytes)");
  }
}

// Output code of `neuron` at `address`, decoding each input slice with the
// source quantizer.
int evaluate_address(const TrainedModel& model, std::size_t layer, std::size_t neuron,
                     std::uint32_t address, std::vector<double>& x) {
  const Quantizer& src = model.source_quant(layer);
  const int f = model.spec().layer_fan_in(layer);
  const std::uint32_t slice_mask = (1u << src.bits) - 1u;
  x.resize(static_cast<std::size_t>(f));
  for (int j = 0; j < f; ++j) {
    const std::uint32_t raw = (address >> (j * src.bits)) & slice_mask;
    x[static_cast<std::size_t>(j)] = dequantize(decode_code(raw, src.bits, src.is_signed), src);
  }
  return model.neuron_code(layer, neuron, x);
}

}  // namespace

TruthTable tabulate_neuron(const TrainedModel& model, std::size_t layer, std::size_t neuron) {
  const auto& spec = model.spec();
  if (layer >= model.layer_count() || neuron >= spec.layer_widths[layer]) {
    throw Error("tabulate_neuron: no neuron " + std::to_string(neuron) + " in layer " +
                std::to_string(layer));
  }
  check_guard(spec, layer);
  TruthTable t;
  t.input_bits = spec.table_input_bits(layer);
  const Quantizer& out_q = model.params()[layer].quant;
  t.output_bits = out_q.bits;
  const std::uint32_t count = 1u << t.input_bits;
  t.entries.resize(count);
  std::vector<double> x;
  for (std::uint32_t a = 0; a < count; ++a) {
    const int code = evaluate_address(model, layer, neuron, a, x);
    t.entries[a] = static_cast<std::uint8_t>(encode_code(code, out_q.bits));
  }
  return t;
}

std::vector<TruthTable> tabulate_layer(const TrainedModel& model, std::size_t layer,
                                       unsigned threads) {
  if (layer >= model.layer_count()) throw Error("tabulate_layer: no layer " + std::to_string(layer));
  check_guard(model.spec(), layer);
  const std::size_t width = model.spec().layer_widths[layer];
  std::vector<TruthTable> tables(width);
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, width));
  if (workers <= 1) {
    for (std::size_t n = 0; n < width; ++n) tables[n] = tabulate_neuron(model, layer, n);
    return tables;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t n = w; n < width; n += workers) tables[n] = tabulate_neuron(model, layer, n);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return tables;
}

std::vector<std::vector<TruthTable>> tabulate_model(const TrainedModel& model, unsigned threads) {
  std::vector<std::vector<TruthTable>> out;
  for (std::size_t l = 0; l < model.layer_count(); ++l) out.push_back(tabulate_layer(model, l, threads));
  return out;
}

TableCheck verify_table(const TruthTable& table, const TrainedModel& model, std::size_t layer,
                        std::size_t neuron, std::size_t sample_count, std::uint64_t seed) {
  TableCheck report;
  std::vector<double> x;
  const int out_bits = model.params()[layer].quant.bits;
  auto check = [&](std::uint32_t a) {
    ++report.checked;
    const int code = evaluate_address(model, layer, neuron, a, x);
    if (table.entries[a] != encode_code(code, out_bits)) report.mismatches.push_back(a);
  };
  const std::uint64_t count = table.entries.size();
  if (count <= (std::uint64_t{1} << 16)) {
    for (std::uint32_t a = 0; a < count; ++a) check(a);
  } else {
    Rng rng(seed);
    for (std::size_t s = 0; s < sample_count; ++s) check(static_cast<std::uint32_t>(rng.below(count)));
    std::sort(report.mismatches.begin(), report.mismatches.end());
    report.mismatches.erase(std::unique(report.mismatches.begin(), report.mismatches.end()),
                            report.mismatches.end());
  }
  return report;
}

std::string table_dump_filename(std::size_t layer) {
  return "tables_layer" + std::to_string(layer) + ".txt";
}

void write_table_dump(std::ostream& out, std::size_t layer, const std::vector<TruthTable>& tables) {
  const int in_bits = tables.empty() ? 0 : tables.front().input_bits;
  const int out_bits = tables.empty() ? 0 : tables.front().output_bits;
  const int digits = std::max(1, (out_bits + 3) / 4);
  out << "polylut-tables v1\n";
  out << "layer " << layer << " neurons " << tables.size() << " input_bits " << in_bits
      << " output_bits " << out_bits << "\n";
  char buf[16];
  for (std::size_t n = 0; n < tables.size(); ++n) {
    if (tables[n].input_bits != in_bits || tables[n].output_bits != out_bits) {
      throw Error("write_table_dump: tables of one layer must share widths");
    }
    out << "neuron " << n << "\n";
    const auto& e = tables[n].entries;
    for (std::size_t i = 0; i < e.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%0*x", std::min(digits, 2), static_cast<unsigned>(e[i]));
      out << buf << ((i % 32 == 31 || i + 1 == e.size()) ? '\n' : ' ');
    }
  }
}

std::vector<TruthTable> read_table_dump(std::istream& in, std::size_t& layer) {
  std::string line;
  if (!std::getline(in, line) || line != "polylut-tables v1") {
    throw ParseError("table dump: missing 'polylut-tables v1' header");
  }
  std::string k1, k2, k3, k4;
  std::size_t neurons = 0;
  int in_bits = 0, out_bits = 0;
  if (!std::getline(in, line)) throw ParseError("table dump: missing layer line");
  std::istringstream hdr(line);
  if (!(hdr >> k1 >> layer >> k2 >> neurons >> k3 >> in_bits >> k4 >> out_bits) || k1 != "layer" ||
      k2 != "neurons" || k3 != "input_bits" || k4 != "output_bits") {
    throw ParseError("table dump: malformed layer line '" + line + "'");
  }
  if (in_bits < 1 || in_bits > 30 || out_bits < 1 || out_bits > 8) {
    throw ParseError("table dump: widths out of range");
  }
  std::vector<TruthTable> tables(neurons);
  const std::size_t count = std::size_t{1} << in_bits;
  for (std::size_t n = 0; n < neurons; ++n) {
    std::string word;
    std::size_t idx = 0;
    if (!(in >> word >> idx) || word != "neuron" || idx != n) {
      throw ParseError("table dump: expected 'neuron " + std::to_string(n) + "'");
    }
    TruthTable& t = tables[n];
    t.input_bits = in_bits;
    t.output_bits = out_bits;
    t.entries.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::string hex;
      if (!(in >> hex)) throw ParseError("table dump: neuron " + std::to_string(n) + " truncated");
      unsigned long v = 0;
      try {
        std::size_t used = 0;
        v = std::stoul(hex, &used, 16);
        if (used != hex.size()) throw std::invalid_argument(hex);
      } catch (const std::exception&) {
        throw ParseError("table dump: bad hex entry '" + hex + "'");
      }
      if (v >= (1ul << out_bits)) throw ParseError("table dump: entry exceeds output width");
      t.entries[i] = static_cast<std::uint8_t>(v);
    }
  }
  return tables;
}

}  // namespace polylut
