#include "polylut/netlist.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "polylut/error.hpp"
#include "polylut/rng.hpp"

namespace polylut {

std::size_t Netlist::node_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.nodes.size();
  return n;
}

Netlist build_netlist(const TrainedModel& model, const std::vector<std::vector<TruthTable>>& tables) {
  const auto& spec = model.spec();
  if (tables.size() != model.layer_count()) {
    throw Error("build_netlist: expected tables for " + std::to_string(model.layer_count()) +
                " layers, got " + std::to_string(tables.size()));
  }
  Netlist net;
  net.input_count = spec.input_features;
  net.input_bits = model.input_quant().bits;
  net.input_signed = model.input_quant().is_signed;
  net.clock_period_ns = spec.clock_period_ns;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const auto& mask = model.masks()[l];
    const auto& q = model.params()[l].quant;
    if (tables[l].size() != mask.size()) {
      throw Error("build_netlist: layer " + std::to_string(l) + " has " +
                  std::to_string(tables[l].size()) + " tables for " + std::to_string(mask.size()) +
                  " neurons (missing table)");
    }
    NetlistLayer layer;
    layer.input_bits_per_source = model.source_quant(l).bits;
    layer.output_bits = q.bits;
    layer.output_signed = q.is_signed;
    for (std::size_t n = 0; n < mask.size(); ++n) {
      const auto& t = tables[l][n];
      const int want = layer.input_bits_per_source * static_cast<int>(mask[n].size());
      if (t.input_bits != want || t.output_bits != q.bits || t.entries.size() != (std::size_t{1} << want)) {
        throw Error("build_netlist: layer " + std::to_string(l) + " node " + std::to_string(n) +
                    ": table shape does not match mask arity");
      }
      layer.nodes.push_back(LutNode{l, n, t, mask[n]});
    }
    net.layers.push_back(std::move(layer));
  }
  validate_netlist(net);
  return net;
}

void validate_netlist(const Netlist& net) {
  if (net.layers.empty()) throw Error("netlist: no layers");
  if (net.input_bits < 1 || net.input_bits > 8) throw Error("netlist: input width out of range");
  std::size_t prev_count = net.input_count;
  int prev_bits = net.input_bits;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    if (layer.input_bits_per_source != prev_bits) {
      throw Error("netlist: layer " + std::to_string(l) + " source width disagrees with layer below");
    }
    if (layer.nodes.empty()) throw Error("netlist: layer " + std::to_string(l) + " is empty");
    const std::size_t arity = layer.nodes.front().sources.size();
    for (std::size_t n = 0; n < layer.nodes.size(); ++n) {
      const auto& node = layer.nodes[n];
      if (node.layer != l || node.index != n) throw Error("netlist: node ids out of order");
      if (node.sources.size() != arity) throw Error("netlist: ragged fan-in in layer " + std::to_string(l));
      for (auto s : node.sources) {
        if (s >= prev_count) {
          throw Error("netlist: layer " + std::to_string(l) + " node " + std::to_string(n) +
                      " reads missing source " + std::to_string(s));
        }
      }
      const int bits = prev_bits * static_cast<int>(arity);
      if (node.table.input_bits != bits || node.table.output_bits != layer.output_bits ||
          node.table.entries.size() != (std::size_t{1} << bits)) {
        throw Error("netlist: layer " + std::to_string(l) + " node " + std::to_string(n) +
                    " table shape mismatch");
      }
      const std::uint32_t out_limit = 1u << layer.output_bits;
      for (auto e : node.table.entries) {
        if (e >= out_limit) {
          throw Error("netlist: layer " + std::to_string(l) + " node " + std::to_string(n) +
                      " entry exceeds " + std::to_string(layer.output_bits) + " output bits");
        }
      }
    }
    prev_count = layer.nodes.size();
    prev_bits = layer.output_bits;
  }
}

SimResult simulate(const Netlist& net, std::span<const std::uint32_t> inputs) {
  if (inputs.size() != net.input_count) {
    throw Error("simulate: expected " + std::to_string(net.input_count) + " inputs, got " +
                std::to_string(inputs.size()));
  }
  const std::uint32_t limit = 1u << net.input_bits;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i] >= limit) {
      throw Error("simulate: input " + std::to_string(i) + " value " + std::to_string(inputs[i]) +
                  " does not fit in " + std::to_string(net.input_bits) + " bits");
    }
  }
  SimResult r;
  r.trace.reserve(net.layers.size());
  std::span<const std::uint32_t> prev = inputs;
  for (const auto& layer : net.layers) {
    std::vector<std::uint32_t> out(layer.nodes.size());
    for (std::size_t n = 0; n < layer.nodes.size(); ++n) {
      const auto& node = layer.nodes[n];
      std::uint32_t addr = 0;
      for (std::size_t j = 0; j < node.sources.size(); ++j) {
        addr |= prev[node.sources[j]] << (static_cast<int>(j) * layer.input_bits_per_source);
      }
      out[n] = node.table.entries[addr];
    }
    r.trace.push_back(std::move(out));
    prev = r.trace.back();
  }
  r.outputs = r.trace.back();
  return r;
}

int netlist_classify(const Netlist& net, std::span<const std::uint32_t> outputs) {
  std::vector<int> codes(outputs.size());
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    codes[k] = decode_code(outputs[k], net.output_bits(), net.output_signed());
  }
  return TrainedModel::classify(codes);
}

EquivalenceReport equivalence_check(const Netlist& net, const TrainedModel& model,
                                    const Dataset* data, const EquivalenceOptions& options) {
  EquivalenceReport rep;
  const int bits = net.input_bits;
  const std::uint32_t slice = (1u << bits) - 1u;
  const bool in_signed = net.input_signed;
  std::vector<std::uint32_t> raw(net.input_count);
  std::vector<int> codes(net.input_count);

  // Returns true when the two paths agree on every node.
  auto check = [&](std::size_t vec) {
    for (std::size_t i = 0; i < raw.size(); ++i) codes[i] = decode_code(raw[i], bits, in_signed);
    const auto expect = model.infer_codes(codes);
    const auto got = simulate(net, raw);
    ++rep.vectors;
    for (std::size_t l = 0; l < expect.size(); ++l) {
      const int ob = net.layers[l].output_bits;
      for (std::size_t n = 0; n < expect[l].size(); ++n) {
        if (encode_code(expect[l][n], ob) != got.trace[l][n]) {
          ++rep.mismatch_count;
          if (rep.mismatches.size() < options.max_reported) rep.mismatches.push_back({vec, l, n});
          return std::pair{false, std::pair{expect.back(), got.outputs}};
        }
      }
    }
    return std::pair{true, std::pair{expect.back(), got.outputs}};
  };

  const auto total_bits = static_cast<std::uint64_t>(net.input_count) * static_cast<std::uint64_t>(bits);
  if (total_bits <= static_cast<std::uint64_t>(options.exhaustive_limit_bits)) {
    rep.exhaustive = true;
    const std::uint64_t combos = std::uint64_t{1} << total_bits;
    for (std::uint64_t v = 0; v < combos; ++v) {
      for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = static_cast<std::uint32_t>(v >> (i * static_cast<std::size_t>(bits))) & slice;
      }
      check(static_cast<std::size_t>(v));
    }
  } else {
    Rng rng(options.seed);
    for (std::size_t v = 0; v < options.random_budget; ++v) {
      for (auto& r : raw) r = static_cast<std::uint32_t>(rng.below(std::uint64_t{1} << bits));
      check(v);
    }
  }

  if (data != nullptr && data->rows > 0) {
    std::size_t model_ok = 0, net_ok = 0;
    const std::size_t base = static_cast<std::size_t>(rep.vectors);
    for (std::size_t i = 0; i < data->rows; ++i) {
      const auto c = model.quantize_inputs(data->row(i));
      for (std::size_t k = 0; k < raw.size(); ++k) raw[k] = encode_code(c[k], bits);
      const auto [same, outs] = check(base + i);
      (void)same;
      if (TrainedModel::classify(outs.first) == data->labels[i]) ++model_ok;
      if (netlist_classify(net, outs.second) == data->labels[i]) ++net_ok;
    }
    rep.labelled_rows = data->rows;
    rep.model_accuracy = static_cast<double>(model_ok) / static_cast<double>(data->rows);
    rep.netlist_accuracy = static_cast<double>(net_ok) / static_cast<double>(data->rows);
  }
  return rep;
}

std::uint64_t lut_cost(int input_bits, int k) {
  if (input_bits < 1 || k < 2) throw Error("lut_cost: need N >= 1 and K >= 2");
  if (input_bits <= k) return 1;
  return (std::uint64_t{1} << (input_bits - k + 1)) - 1;
}

CostReport report(const Netlist& net, int k) {
  CostReport r;
  r.k = k;
  for (const auto& layer : net.layers) {
    LayerCost c;
    c.nodes = layer.nodes.size();
    c.input_bits = layer.nodes.empty() ? 0 : layer.nodes.front().table.input_bits;
    c.output_bits = layer.output_bits;
    c.luts = static_cast<std::uint64_t>(c.nodes) * lut_cost(c.input_bits, k) *
             static_cast<std::uint64_t>(c.output_bits);
    r.total_luts += c.luts;
    r.layers.push_back(c);
  }
  r.cycles = net.layers.size();
  r.clock_period_ns = net.clock_period_ns;
  r.latency_ns = static_cast<double>(r.cycles) * net.clock_period_ns;
  return r;
}

std::string format_report(const CostReport& r) {
  std::ostringstream os;
  os << "layer  nodes  in_bits  out_bits  est_luts\n";
  for (std::size_t l = 0; l < r.layers.size(); ++l) {
    const auto& c = r.layers[l];
    os << std::setw(5) << l << std::setw(7) << c.nodes << std::setw(9) << c.input_bits
       << std::setw(10) << c.output_bits << std::setw(10) << c.luts << "\n";
  }
  os << "estimated P-LUTs (K=" << r.k << "): " << r.total_luts << "\n";
  os << "FF/BRAM/DSP: n/a (external tools)\n";
  os << "cycles: " << r.cycles << "\n";
  os << "clock period: " << r.clock_period_ns << " ns\n";
  os << "latency: " << r.latency_ns << " ns\n";
  return os.str();
}

void write_report_csv(std::ostream& out, const CostReport& r) {
  out << "layer,nodes,input_bits,output_bits,est_luts\n";
  for (std::size_t l = 0; l < r.layers.size(); ++l) {
    const auto& c = r.layers[l];
    out << l << ',' << c.nodes << ',' << c.input_bits << ',' << c.output_bits << ',' << c.luts << '\n';
  }
  out << "total,,,," << r.total_luts << '\n';
  out << "cycles,,,," << r.cycles << '\n';
  out << "latency_ns,,,," << r.latency_ns << '\n';
}

namespace {

const char* signedness(bool s) { return s ? "signed" : "unsigned"; }

bool parse_signedness(const std::string& s) {
  if (s == "signed") return true;
  if (s == "unsigned") return false;
  throw ParseError("netlist: expected signed|unsigned, got '" + s + "'");
}

template <typename T>
T expect_field(std::istringstream& in, const char* key, const std::string& line) {
  std::string word;
  T v{};
  if (!(in >> word) || word != key || !(in >> v)) {
    throw ParseError("netlist: expected '" + std::string(key) + " <value>' in '" + line + "'");
  }
  return v;
}

}  // namespace

void write_netlist(const std::string& dir, const Netlist& net) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / kNetlistFile);
  if (!out) throw Error("cannot write netlist into '" + dir + "'");
  out << "polylut-netlist v1\n";
  out << "inputs " << net.input_count << " bits " << net.input_bits << ' '
      << signedness(net.input_signed) << '\n';
  char clock[64];
  std::snprintf(clock, sizeof clock, "%.17g", net.clock_period_ns);
  out << "clock_ns " << clock << '\n';
  out << "layers " << net.layers.size() << '\n';
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    out << "layer " << l << " nodes " << layer.nodes.size() << " source_bits "
        << layer.input_bits_per_source << " output_bits " << layer.output_bits << ' '
        << signedness(layer.output_signed) << " tables " << table_dump_filename(l) << '\n';
    for (const auto& node : layer.nodes) {
      out << "node " << l << ' ' << node.index << " sources";
      for (auto s : node.sources) out << ' ' << s;
      out << '\n';
    }
    std::vector<TruthTable> tables;
    for (const auto& node : layer.nodes) tables.push_back(node.table);
    std::ofstream tf(fs::path(dir) / table_dump_filename(l));
    if (!tf) throw Error("cannot write table dump into '" + dir + "'");
    write_table_dump(tf, l, tables);
  }
}

Netlist read_netlist(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / kNetlistFile);
  if (!in) throw ParseError("cannot open '" + (fs::path(dir) / kNetlistFile).string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "polylut-netlist v1") {
    throw ParseError("netlist: missing 'polylut-netlist v1' header");
  }
  Netlist net;
  std::getline(in, line);
  {
    std::istringstream ls(line);
    net.input_count = expect_field<std::size_t>(ls, "inputs", line);
    net.input_bits = expect_field<int>(ls, "bits", line);
    std::string s;
    ls >> s;
    net.input_signed = parse_signedness(s);
  }
  std::getline(in, line);
  {
    std::istringstream ls(line);
    net.clock_period_ns = expect_field<double>(ls, "clock_ns", line);
  }
  std::getline(in, line);
  std::size_t layer_count = 0;
  {
    std::istringstream ls(line);
    layer_count = expect_field<std::size_t>(ls, "layers", line);
  }
  for (std::size_t l = 0; l < layer_count; ++l) {
    if (!std::getline(in, line)) throw ParseError("netlist: missing layer " + std::to_string(l));
    std::istringstream ls(line);
    NetlistLayer layer;
    if (expect_field<std::size_t>(ls, "layer", line) != l) throw ParseError("netlist: layers out of order");
    const auto nodes = expect_field<std::size_t>(ls, "nodes", line);
    layer.input_bits_per_source = expect_field<int>(ls, "source_bits", line);
    layer.output_bits = expect_field<int>(ls, "output_bits", line);
    std::string s;
    ls >> s;
    layer.output_signed = parse_signedness(s);
    const auto table_file = expect_field<std::string>(ls, "tables", line);

    std::ifstream tf(fs::path(dir) / table_file);
    if (!tf) throw ParseError("netlist: missing table file '" + table_file + "'");
    std::size_t dumped_layer = 0;
    auto tables = read_table_dump(tf, dumped_layer);
    if (dumped_layer != l || tables.size() != nodes) {
      throw ParseError("netlist: table file '" + table_file + "' does not match layer " + std::to_string(l));
    }
    for (std::size_t n = 0; n < nodes; ++n) {
      if (!std::getline(in, line)) throw ParseError("netlist: missing node line");
      std::istringstream ns(line);
      std::string word;
      std::size_t nl = 0, ni = 0;
      if (!(ns >> word >> nl >> ni) || word != "node" || nl != l || ni != n) {
        throw ParseError("netlist: malformed node line '" + line + "'");
      }
      ns >> word;
      if (word != "sources") throw ParseError("netlist: malformed node line '" + line + "'");
      LutNode node{l, n, std::move(tables[n]), {}};
      std::uint32_t s2;
      while (ns >> s2) node.sources.push_back(s2);
      layer.nodes.push_back(std::move(node));
    }
    net.layers.push_back(std::move(layer));
  }
  try {
    validate_netlist(net);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
  return net;
}

}  // namespace polylut
