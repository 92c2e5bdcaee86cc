#include "polylut/rtl.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "polylut/error.hpp"
#include "polylut/rng.hpp"

namespace polylut {

namespace {

std::string hex_digits(std::uint64_t v, int width_bits) {
  const int digits = std::max(1, (width_bits + 3) / 4);
  char buf[16];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, 16);
  std::string s(buf, r.ptr);
  if (static_cast<int>(s.size()) < digits) s.insert(0, static_cast<std::size_t>(digits) - s.size(), '0');
  return s;
}

std::string range(int msb, int lsb) {
  return "[" + std::to_string(msb) + ":" + std::to_string(lsb) + "]";
}

std::string bus_name(std::size_t layer) { return "l" + std::to_string(layer) + "_data"; }

}  // namespace

std::uint64_t table_hash(const TruthTable& table) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 0x100000001b3ull;
  };
  mix(static_cast<std::uint8_t>(table.input_bits));
  mix(static_cast<std::uint8_t>(table.output_bits));
  for (auto e : table.entries) mix(e);
  return h;
}

std::string neuron_module_name(std::size_t layer, std::size_t index) {
  return "layer" + std::to_string(layer) + "_n" + std::to_string(index);
}

std::string emit_neuron(const TruthTable& table, const std::string& name) {
  const int in = table.input_bits;
  const int out = table.output_bits;
  std::string s;
  s.reserve(64 + table.entries.size() * 32);
  s += "// " + name + ": " + std::to_string(in) + "-bit address, " + std::to_string(out) +
       "-bit registered output\n";
  s += "module " + name + " (\n";
  s += "    input  wire clk,\n";
  s += "    input  wire " + range(in - 1, 0) + " addr,\n";
  s += "    output reg  " + range(out - 1, 0) + " data\n";
  s += ");\n\n";
  s += "  always @(posedge clk) begin\n";
  s += "    case (addr)\n";
  const std::string in_prefix = "      " + std::to_string(in) + "'h";
  const std::string out_prefix = ": data <= " + std::to_string(out) + "'h";
  for (std::size_t a = 0; a < table.entries.size(); ++a) {
    s += in_prefix;
    s += hex_digits(a, in);
    s += out_prefix;
    s += hex_digits(table.entries[a], out);
    s += ";\n";
  }
  s += "      default: data <= " + std::to_string(out) + "'h" + hex_digits(0, out) + ";\n";
  s += "    endcase\n";
  s += "  end\n\n";
  s += "endmodule\n";
  return s;
}

std::string RtlEmitter::emit_neuron(const TruthTable& table, const std::string& name) {
  if (!names_.insert(name).second) throw Error("rtl: duplicate module name '" + name + "'");
  return polylut::emit_neuron(table, name);
}

std::string emit_top(const Netlist& net, const std::string& name) {
  validate_netlist(net);
  const int in_width = static_cast<int>(net.input_count) * net.input_bits;
  const int out_width = static_cast<int>(net.output_count()) * net.output_bits();
  std::ostringstream s;
  s << "// " << name << ": " << net.layers.size() << " pipeline stages, " << net.node_count()
    << " LUT nodes\n";
  s << "module " << name << " (\n";
  s << "    input  wire clk,\n";
  s << "    input  wire " << range(in_width - 1, 0) << " in_data,\n";
  s << "    output wire " << range(out_width - 1, 0) << " out_data\n";
  s << ");\n";
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    const int ob = layer.output_bits;
    const int sb = layer.input_bits_per_source;
    const std::string src_bus = l == 0 ? "in_data" : bus_name(l - 1);
    const std::size_t src_count = l == 0 ? net.input_count : net.layers[l - 1].nodes.size();
    s << "\n  // stage " << l << "\n";
    s << "  wire " << range(static_cast<int>(layer.nodes.size()) * ob - 1, 0) << ' ' << bus_name(l)
      << ";\n";
    for (const auto& node : layer.nodes) {
      for (auto src : node.sources) {
        if (src >= src_count) {
          throw Error("rtl: dangling wire: " + neuron_module_name(l, node.index) + " reads source " +
                      std::to_string(src));
        }
      }
      const std::string mod = neuron_module_name(l, node.index);
      s << "  " << mod << " u_" << mod << " (.clk(clk), .addr({";
      for (std::size_t j = node.sources.size(); j-- > 0;) {
        const int lsb = static_cast<int>(node.sources[j]) * sb;
        s << src_bus << range(lsb + sb - 1, lsb);
        if (j > 0) s << ", ";
      }
      const int olsb = static_cast<int>(node.index) * ob;
      s << "}), .data(" << bus_name(l) << range(olsb + ob - 1, olsb) << "));\n";
    }
  }
  s << "\n  assign out_data = " << bus_name(net.layers.size() - 1) << ";\n\n";
  s << "endmodule\n";
  return s.str();
}

std::string pack_hex(std::span<const std::uint32_t> values, int bits_per_value) {
  const std::size_t total = values.size() * static_cast<std::size_t>(bits_per_value);
  const std::size_t digits = std::max<std::size_t>(1, (total + 3) / 4);
  std::string hex(digits, '0');
  for (std::size_t d = 0; d < digits; ++d) {
    unsigned nibble = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      const std::size_t bit = d * 4 + b;
      if (bit >= total) break;
      const std::size_t v = bit / static_cast<std::size_t>(bits_per_value);
      const std::size_t off = bit % static_cast<std::size_t>(bits_per_value);
      nibble |= ((values[v] >> off) & 1u) << b;
    }
    hex[digits - 1 - d] = "0123456789abcdef"[nibble];
  }
  return hex;
}

std::vector<std::uint32_t> unpack_hex(const std::string& hex, std::size_t count, int bits_per_value) {
  const std::size_t total = count * static_cast<std::size_t>(bits_per_value);
  const std::size_t digits = std::max<std::size_t>(1, (total + 3) / 4);
  if (hex.size() != digits) {
    throw ParseError("hex word '" + hex + "' should have " + std::to_string(digits) + " digits");
  }
  std::vector<std::uint32_t> values(count, 0);
  for (std::size_t d = 0; d < digits; ++d) {
    const char c = hex[digits - 1 - d];
    unsigned nibble;
    if (c >= '0' && c <= '9') nibble = static_cast<unsigned>(c - '0');
    else if (c >= 'a' && c <= 'f') nibble = static_cast<unsigned>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') nibble = static_cast<unsigned>(c - 'A' + 10);
    else throw ParseError("bad hex digit in '" + hex + "'");
    for (std::size_t b = 0; b < 4; ++b) {
      const std::size_t bit = d * 4 + b;
      if (!((nibble >> b) & 1u)) continue;
      if (bit >= total) throw ParseError("hex word '" + hex + "' has bits beyond its width");
      values[bit / static_cast<std::size_t>(bits_per_value)] |=
          1u << (bit % static_cast<std::size_t>(bits_per_value));
    }
  }
  return values;
}

std::vector<GoldenVector> golden_vectors(const Netlist& net,
                                         const std::vector<std::vector<std::uint32_t>>& inputs) {
  std::vector<GoldenVector> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back({in, simulate(net, in).outputs});
  return out;
}

std::string emit_golden_vectors(const Netlist& net, const std::vector<GoldenVector>& vectors) {
  std::string s;
  for (const auto& v : vectors) {
    s += pack_hex(v.inputs, net.input_bits);
    s += ' ';
    s += pack_hex(v.outputs, net.output_bits());
    s += '\n';
  }
  return s;
}

std::vector<GoldenVector> parse_golden_vectors(const Netlist& net, const std::string& text) {
  std::vector<GoldenVector> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b, extra;
    if (!(ls >> a >> b) || (ls >> extra)) {
      throw ParseError("vectors line " + std::to_string(lineno) + ": expected '<in> <out>'");
    }
    out.push_back({unpack_hex(a, net.input_count, net.input_bits),
                   unpack_hex(b, net.output_count(), net.output_bits())});
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> stimulus(const Netlist& net, int exhaustive_limit_bits,
                                                 std::size_t count, std::uint64_t seed) {
  std::vector<std::vector<std::uint32_t>> vecs;
  const auto total = static_cast<std::uint64_t>(net.input_count) * static_cast<std::uint64_t>(net.input_bits);
  const std::uint32_t slice = (1u << net.input_bits) - 1u;
  if (total <= static_cast<std::uint64_t>(exhaustive_limit_bits)) {
    const std::uint64_t combos = std::uint64_t{1} << total;
    for (std::uint64_t v = 0; v < combos; ++v) {
      std::vector<std::uint32_t> in(net.input_count);
      for (std::size_t i = 0; i < in.size(); ++i) {
        in[i] = static_cast<std::uint32_t>(v >> (i * static_cast<std::size_t>(net.input_bits))) & slice;
      }
      vecs.push_back(std::move(in));
    }
    return vecs;
  }
  Rng rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    std::vector<std::uint32_t> in(net.input_count);
    for (auto& x : in) x = static_cast<std::uint32_t>(rng.below(std::uint64_t{1} << net.input_bits));
    vecs.push_back(std::move(in));
  }
  return vecs;
}

std::string emit_testbench(const Netlist& net, const std::string& top) {
  const int in_width = static_cast<int>(net.input_count) * net.input_bits;
  const int out_width = static_cast<int>(net.output_count()) * net.output_bits();
  std::ostringstream s;
  s << "// Replays vectors.hex through " << top << "; each vector waits " << net.layers.size()
    << " cycles.\n";
  s << "`timescale 1ns / 1ps\n";
  s << "module tb_" << top << ";\n";
  s << "  reg clk = 1'b0;\n";
  s << "  reg  " << range(in_width - 1, 0) << " in_data;\n";
  s << "  wire " << range(out_width - 1, 0) << " out_data;\n";
  s << "  reg  " << range(out_width - 1, 0) << " expected;\n";
  s << "  integer fd, n, errors, count;\n\n";
  s << "  " << top << " dut (.clk(clk), .in_data(in_data), .out_data(out_data));\n\n";
  s << "  always #" << net.clock_period_ns / 2.0 << " clk = ~clk;\n\n";
  s << "  initial begin\n";
  s << "    errors = 0;\n";
  s << "    count = 0;\n";
  s << "    fd = $fopen(\"vectors.hex\", \"r\");\n";
  s << "    if (fd == 0) begin\n";
  s << "      $display(\"cannot open vectors.hex\");\n";
  s << "      $finish;\n";
  s << "    end\n";
  s << "    while (!$feof(fd)) begin\n";
  s << "      n = $fscanf(fd, \"%h %h\\n\", in_data, expected);\n";
  s << "      if (n == 2) begin\n";
  s << "        repeat (" << net.layers.size() << ") @(posedge clk);\n";
  s << "        #0.1;\n";
  s << "        if (out_data !== expected) begin\n";
  s << "          errors = errors + 1;\n";
  s << "          $display(\"mismatch: in=%h got=%h expected=%h\", in_data, out_data, expected);\n";
  s << "        end\n";
  s << "        count = count + 1;\n";
  s << "      end\n";
  s << "    end\n";
  s << "    $fclose(fd);\n";
  s << "    $display(\"%0d vectors, %0d mismatches\", count, errors);\n";
  s << "    $finish;\n";
  s << "  end\n";
  s << "endmodule\n";
  return s.str();
}

RtlBundle emit_bundle(const Netlist& net, const std::vector<GoldenVector>& vectors) {
  validate_netlist(net);
  RtlBundle b;
  RtlEmitter emitter;
  nlohmann::ordered_json manifest;
  manifest["format"] = "polylut-rtl v1";
  manifest["top"] = "top";
  manifest["layers"] = net.layers.size();
  manifest["clock_period_ns"] = net.clock_period_ns;
  manifest["input_count"] = net.input_count;
  manifest["input_bits"] = net.input_bits;
  manifest["output_count"] = net.output_count();
  manifest["output_bits"] = net.output_bits();
  manifest["output_signed"] = net.output_signed();
  manifest["vectors"] = vectors.size();
  auto modules = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (const auto& node : net.layers[l].nodes) {
      const std::string name = neuron_module_name(l, node.index);
      b.modules.emplace_back(name + ".v", emitter.emit_neuron(node.table, name));
      nlohmann::ordered_json m;
      m["name"] = name;
      m["file"] = name + ".v";
      m["layer"] = l;
      m["index"] = node.index;
      m["input_bits"] = node.table.input_bits;
      m["output_bits"] = node.table.output_bits;
      m["entries"] = node.table.entries.size();
      m["table_hash"] = hex_digits(table_hash(node.table), 64);
      modules.push_back(std::move(m));
    }
  }
  manifest["modules"] = std::move(modules);
  b.top = emit_top(net);
  b.testbench = emit_testbench(net);
  b.vectors = emit_golden_vectors(net, vectors);
  b.manifest = manifest.dump(2) + "\n";
  return b;
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + p.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

void write_bundle(const std::string& dir, const RtlBundle& bundle) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& [file, text] : bundle.modules) write_file(fs::path(dir) / file, text);
  write_file(fs::path(dir) / "top.v", bundle.top);
  write_file(fs::path(dir) / "tb_top.v", bundle.testbench);
  write_file(fs::path(dir) / "vectors.hex", bundle.vectors);
  write_file(fs::path(dir) / "manifest.json", bundle.manifest);
}

RtlBundle read_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  RtlBundle b;
  b.manifest = read_text(fs::path(dir) / "manifest.json");
  b.top = read_text(fs::path(dir) / "top.v");
  b.testbench = read_text(fs::path(dir) / "tb_top.v");
  b.vectors = read_text(fs::path(dir) / "vectors.hex");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(b.manifest);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest.json: ") + e.what());
  }
  for (const auto& mod : m.at("modules")) {
    const std::string file = mod.at("file").get<std::string>();
    b.modules.emplace_back(file, read_text(fs::path(dir) / file));
  }
  return b;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Width of "[msb:0]" at the start of `s`, or -1.
int bracket_width(const std::string& s) {
  int msb = 0, lsb = 0;
  if (std::sscanf(s.c_str(), "[%d:%d]", &msb, &lsb) != 2 || lsb != 0) return -1;
  return msb + 1;
}

bool parse_hex_literal(const std::string& lit, int& width, std::uint32_t& value) {
  const auto q = lit.find("'h");
  if (q == std::string::npos) return false;
  try {
    std::size_t used = 0;
    width = std::stoi(lit.substr(0, q), &used);
    if (used != q) return false;
    const std::string digits = lit.substr(q + 2);
    value = static_cast<std::uint32_t>(std::stoul(digits, &used, 16));
    return used == digits.size() && !digits.empty();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

NeuronModuleInfo parse_neuron_module(const std::string& text) {
  NeuronModuleInfo info;
  std::istringstream in(text);
  std::string raw;
  bool in_always = false;
  bool in_case = false;
  bool saw_posedge = false;
  bool saw_output_reg = false;
  std::vector<bool> seen;
  while (std::getline(in, raw)) {
    const std::string line = trim(raw);
    if (line.empty() || line.rfind("//", 0) == 0) continue;
    if (line.rfind("module ", 0) == 0) {
      std::istringstream ls(line.substr(7));
      ls >> info.name;
      continue;
    }
    if (line.rfind("input  wire [", 0) == 0 || line.rfind("input wire [", 0) == 0) {
      const auto br = line.find('[');
      info.input_width = bracket_width(line.substr(br));
      if (line.find(" addr") == std::string::npos) info.errors.push_back("address port not named addr");
      seen.assign(info.input_width > 0 && info.input_width <= 30 ? (std::size_t{1} << info.input_width) : 0,
                  false);
      info.table.assign(seen.size(), 0);
      continue;
    }
    if (line.rfind("output reg", 0) == 0) {
      saw_output_reg = true;
      info.output_width = bracket_width(line.substr(line.find('[')));
      continue;
    }
    if (line.rfind("output", 0) == 0) {
      info.output_width = bracket_width(line.substr(line.find('[')));
      continue;
    }
    if (line == "always @(posedge clk) begin") {
      in_always = true;
      saw_posedge = true;
      continue;
    }
    if (line == "case (addr)") {
      if (!in_always) info.errors.push_back("case outside clocked block");
      in_case = true;
      continue;
    }
    if (line == "endcase") {
      in_case = false;
      continue;
    }
    if (in_case) {
      const auto colon = line.find(':');
      if (colon == std::string::npos) {
        info.errors.push_back("unparsed case line '" + line + "'");
        continue;
      }
      const std::string label = trim(line.substr(0, colon));
      std::string rhs = trim(line.substr(colon + 1));
      if (rhs.rfind("data <= ", 0) != 0 || rhs.back() != ';') {
        info.errors.push_back("case arm is not a registered assignment: '" + line + "'");
        continue;
      }
      rhs = rhs.substr(8, rhs.size() - 9);
      int vw = 0;
      std::uint32_t value = 0;
      if (!parse_hex_literal(rhs, vw, value) || vw != info.output_width) {
        info.errors.push_back("bad data literal '" + rhs + "'");
        continue;
      }
      if (value >= (1u << vw)) info.errors.push_back("data literal exceeds width");
      if (label == "default") {
        info.has_default = true;
        continue;
      }
      int aw = 0;
      std::uint32_t addr = 0;
      if (!parse_hex_literal(label, aw, addr) || aw != info.input_width) {
        info.errors.push_back("bad address literal '" + label + "'");
        continue;
      }
      if (addr >= seen.size()) {
        info.errors.push_back("address " + label + " out of range");
        continue;
      }
      if (seen[addr]) info.errors.push_back("duplicate address " + label);
      seen[addr] = true;
      info.table[addr] = value;
      ++info.arms;
    }
  }
  info.registered = saw_output_reg && saw_posedge;
  if (info.name.empty()) info.errors.push_back("no module header");
  return info;
}

TopInfo parse_top(const std::string& text) {
  TopInfo info;
  static const std::regex module_re(R"(^module\s+(\w+)\s*\($)");
  static const std::regex port_re(R"(^(input|output)\s+wire\s+\[(\d+):0\]\s+(\w+),?$)");
  static const std::regex wire_re(R"(^wire\s+\[(\d+):0\]\s+(\w+);$)");
  static const std::regex inst_re(
      R"(^(\w+)\s+(\w+)\s*\(\.clk\(clk\),\s*\.addr\(\{([^}]*)\}\),\s*\.data\((\w+)\[(\d+):(\d+)\]\)\);$)");
  static const std::regex slice_re(R"(^(\w+)\[(\d+):(\d+)\]$)");
  static const std::regex assign_re(R"(^assign\s+out_data\s*=\s*(\w+);$)");

  std::istringstream in(text);
  std::string raw;
  std::smatch m;
  while (std::getline(in, raw)) {
    const std::string line = trim(raw);
    if (line.empty() || line.rfind("//", 0) == 0) continue;
    if (std::regex_match(line, m, module_re)) {
      info.name = m[1];
    } else if (std::regex_match(line, m, port_re)) {
      const int w = std::stoi(m[2]) + 1;
      if (m[3] == "in_data") info.input_width = w;
      else if (m[3] == "out_data") info.output_width = w;
    } else if (std::regex_match(line, m, wire_re)) {
      info.buses.emplace_back(m[2], std::stoi(m[1]) + 1);
    } else if (std::regex_match(line, m, inst_re)) {
      InstanceInfo inst;
      inst.module = m[1];
      inst.instance = m[2];
      inst.output_bus = m[4];
      inst.output_msb = std::stoi(m[5]);
      inst.output_lsb = std::stoi(m[6]);
      // Concatenation lists the most significant slice first.
      std::vector<std::pair<int, int>> slices;
      std::istringstream parts(m[3].str());
      std::string part;
      while (std::getline(parts, part, ',')) {
        std::smatch sm;
        const std::string p = trim(part);
        if (!std::regex_match(p, sm, slice_re)) {
          info.errors.push_back("instance " + inst.instance + ": bad slice '" + p + "'");
          continue;
        }
        if (inst.input_bus.empty()) inst.input_bus = sm[1];
        else if (inst.input_bus != sm[1]) {
          info.errors.push_back("instance " + inst.instance + " mixes source buses");
        }
        slices.emplace_back(std::stoi(sm[2]), std::stoi(sm[3]));
      }
      inst.slices.assign(slices.rbegin(), slices.rend());
      info.instances.push_back(std::move(inst));
    } else if (std::regex_match(line, m, assign_re)) {
      info.output_assign = m[1];
    }
  }
  if (info.name.empty()) info.errors.push_back("no top module header");
  return info;
}

std::vector<std::string> check_bundle(const RtlBundle& bundle, const Netlist& net) {
  std::vector<std::string> issues;
  auto fail = [&issues](std::string s) { issues.push_back(std::move(s)); };

  std::map<std::string, NeuronModuleInfo> modules;
  for (const auto& [file, text] : bundle.modules) {
    auto info = parse_neuron_module(text);
    for (const auto& e : info.errors) fail(file + ": " + e);
    if (file != info.name + ".v") fail(file + ": module name '" + info.name + "' does not match file");
    if (!modules.emplace(info.name, std::move(info)).second) fail("duplicate module name in " + file);
  }

  std::map<std::string, std::string> manifest_hash;
  try {
    const auto m = nlohmann::json::parse(bundle.manifest);
    for (const auto& mod : m.at("modules")) {
      manifest_hash[mod.at("name").get<std::string>()] = mod.at("table_hash").get<std::string>();
    }
    if (m.at("layers").get<std::size_t>() != net.layers.size()) fail("manifest: layer count mismatch");
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("manifest: ") + e.what());
  }

  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (const auto& node : net.layers[l].nodes) {
      const std::string name = neuron_module_name(l, node.index);
      const auto it = modules.find(name);
      if (it == modules.end()) {
        fail("missing module " + name);
        continue;
      }
      const auto& info = it->second;
      const std::size_t expect_entries = std::size_t{1} << node.table.input_bits;
      if (info.input_width != node.table.input_bits) fail(name + ": address width mismatch");
      if (info.output_width != node.table.output_bits) fail(name + ": data width mismatch");
      if (info.arms != expect_entries) {
        fail(name + ": " + std::to_string(info.arms) + " case entries, expected " +
             std::to_string(expect_entries));
      }
      if (!info.registered) fail(name + ": output is not registered");
      if (!info.has_default) fail(name + ": case has no default arm");
      TruthTable parsed{info.input_width, info.output_width, {}};
      for (auto v : info.table) parsed.entries.push_back(static_cast<std::uint8_t>(v));
      if (parsed.entries != node.table.entries) fail(name + ": ROM contents differ from table");
      const auto h = manifest_hash.find(name);
      if (h == manifest_hash.end()) {
        fail("manifest: no entry for " + name);
      } else if (h->second != hex_digits(table_hash(node.table), 64) ||
                 h->second != hex_digits(table_hash(parsed), 64)) {
        fail("manifest: hash mismatch for " + name);
      }
    }
  }
  if (modules.size() != net.node_count()) fail("bundle module count differs from node count");

  const TopInfo top = parse_top(bundle.top);
  for (const auto& e : top.errors) fail("top.v: " + e);
  if (top.input_width != static_cast<int>(net.input_count) * net.input_bits) fail("top.v: in_data width mismatch");
  if (top.output_width != static_cast<int>(net.output_count()) * net.output_bits()) {
    fail("top.v: out_data width mismatch");
  }
  std::map<std::string, int> bus_width(top.buses.begin(), top.buses.end());
  std::map<std::string, const InstanceInfo*> by_module;
  for (const auto& inst : top.instances) {
    if (!by_module.emplace(inst.module, &inst).second) fail("top.v: module " + inst.module + " instantiated twice");
    if (modules.find(inst.module) == modules.end()) fail("top.v: instance of unknown module " + inst.module);
  }
  if (top.instances.size() != net.node_count()) fail("top.v: instance count differs from node count");

  // Stage l must read stage l-1's bus, which makes the register depth equal
  // to the layer count.
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    const std::string src_bus = l == 0 ? "in_data" : bus_name(l - 1);
    const int sb = layer.input_bits_per_source;
    const int ob = layer.output_bits;
    const auto bw = bus_width.find(bus_name(l));
    if (bw == bus_width.end() || bw->second != static_cast<int>(layer.nodes.size()) * ob) {
      fail("top.v: bus " + bus_name(l) + " missing or wrong width");
    }
    for (const auto& node : layer.nodes) {
      const std::string name = neuron_module_name(l, node.index);
      const auto it = by_module.find(name);
      if (it == by_module.end()) {
        fail("top.v: no instance of " + name);
        continue;
      }
      const InstanceInfo& inst = *it->second;
      if (inst.input_bus != src_bus) fail("top.v: " + name + " reads " + inst.input_bus + ", expected " + src_bus);
      std::vector<std::uint32_t> sources;
      for (const auto& [msb, lsb] : inst.slices) {
        if (msb - lsb + 1 != sb || lsb % sb != 0) {
          fail("top.v: " + name + " has a misaligned source slice");
          continue;
        }
        sources.push_back(static_cast<std::uint32_t>(lsb / sb));
      }
      if (sources != node.sources) fail("top.v: " + name + " wiring differs from the mask");
      const int olsb = static_cast<int>(node.index) * ob;
      if (inst.output_bus != bus_name(l) || inst.output_lsb != olsb || inst.output_msb != olsb + ob - 1) {
        fail("top.v: " + name + " drives the wrong output slice");
      }
    }
  }
  if (top.output_assign != bus_name(net.layers.size() - 1)) fail("top.v: out_data not driven by the last stage");

  try {
    const auto vecs = parse_golden_vectors(net, bundle.vectors);
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      if (simulate(net, vecs[i].inputs).outputs != vecs[i].outputs) {
        fail("vectors.hex: line " + std::to_string(i + 1) + " disagrees with the simulator");
        break;
      }
    }
  } catch (const Error& e) {
    fail(std::string("vectors.hex: ") + e.what());
  }
  return issues;
}

}  // namespace polylut
