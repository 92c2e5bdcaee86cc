// Binary checkpoint layout (all integers and reals little-endian):
//
//   magic      8 bytes  "PLUTCKPT"
//   version    u32      = 1
//   spec       u64 input_features, u32 L, u64 width[L], i32 beta, i32 fan_in,
//              i32 degree, u8 has_input_beta, i32 input_beta,
//              u8 has_input_fan_in, i32 input_fan_in, u64 seed,
//              f64 clock_period_ns, i32 max_table_bits
//   input q    i32 bits, u8 signed, f64 scale
//   L times:   u32 mask[width * F]                 (neuron-major)
//              u64 terms, f64 weights[width * terms]
//              f64 epsilon, f64 gamma[width], f64 beta[width],
//              f64 running_mean[width], f64 running_var[width]
//              i32 bits, u8 signed, f64 scale      (output quantizer)
//   trailer    4 bytes  "END."

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "polylut/error.hpp"
#include "polylut/network.hpp"

namespace polylut {

namespace {

constexpr char kMagic[8] = {'P', 'L', 'U', 'T', 'C', 'K', 'P', 'T'};
constexpr char kTrailer[4] = {'E', 'N', 'D', '.'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void f64s(const std::vector<double>& v) {
    for (double d : v) f64(d);
  }

 private:
  void le(std::uint64_t v, int n) {
    char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, n);
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw ParseError("checkpoint: truncated");
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(le(4))); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::vector<double> f64s(std::size_t n) {
    std::vector<double> v(n);
    for (auto& d : v) d = f64();
    return v;
  }
  std::size_t count(std::uint64_t limit, const char* what) {
    const std::uint64_t n = u64();
    if (n > limit) throw ParseError(std::string("checkpoint: implausible ") + what);
    return static_cast<std::size_t>(n);
  }

 private:
  std::uint64_t le(int n) {
    unsigned char buf[8];
    bytes(reinterpret_cast<char*>(buf), static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
};

void write_quantizer(Writer& w, const Quantizer& q) {
  w.i32(q.bits);
  w.u8(q.is_signed ? 1 : 0);
  w.f64(q.scale);
}

Quantizer read_quantizer(Reader& r) {
  Quantizer q;
  q.bits = r.i32();
  q.is_signed = r.u8() != 0;
  q.scale = r.f64();
  if (q.bits < 1 || q.bits > 8) throw ParseError("checkpoint: quantizer bits out of range");
  return q;
}

constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

}  // namespace

void write_checkpoint(std::ostream& out, const TrainedModel& model) {
  Writer w(out);
  const auto& s = model.spec();
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u64(s.input_features);
  w.u32(static_cast<std::uint32_t>(s.layer_widths.size()));
  for (auto width : s.layer_widths) w.u64(width);
  w.i32(s.beta);
  w.i32(s.fan_in);
  w.i32(s.degree);
  w.u8(s.input_beta ? 1 : 0);
  w.i32(s.input_beta.value_or(0));
  w.u8(s.input_fan_in ? 1 : 0);
  w.i32(s.input_fan_in.value_or(0));
  w.u64(s.seed);
  w.f64(s.clock_period_ns);
  w.i32(s.max_table_bits);
  write_quantizer(w, model.input_quant());
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    for (const auto& row : model.masks()[l])
      for (auto src : row) w.u32(src);
    const auto& p = model.params()[l];
    w.u64(p.terms);
    w.f64s(p.weights);
    w.f64(p.bn.epsilon);
    w.f64s(p.bn.gamma);
    w.f64s(p.bn.beta);
    w.f64s(p.bn.running_mean);
    w.f64s(p.bn.running_var);
    write_quantizer(w, p.quant);
  }
  w.bytes(kTrailer, sizeof kTrailer);
  if (!out) throw Error("checkpoint: write failed");
}

TrainedModel read_checkpoint(std::istream& in) {
  Reader r(in);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ParseError("checkpoint: bad magic");
  if (const auto v = r.u32(); v != kVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(v));
  }
  NetworkSpec s;
  s.input_features = r.count(kMaxCount, "input count");
  const std::uint32_t layers = r.u32();
  if (layers > 4096) throw ParseError("checkpoint: implausible layer count");
  for (std::uint32_t l = 0; l < layers; ++l) s.layer_widths.push_back(r.count(kMaxCount, "width"));
  s.beta = r.i32();
  s.fan_in = r.i32();
  s.degree = r.i32();
  const bool has_ib = r.u8() != 0;
  const int ib = r.i32();
  if (has_ib) s.input_beta = ib;
  const bool has_if = r.u8() != 0;
  const int inf = r.i32();
  if (has_if) s.input_fan_in = inf;
  s.seed = r.u64();
  s.clock_period_ns = r.f64();
  s.max_table_bits = r.i32();
  if (const auto violations = validate_spec(s); !violations.empty()) {
    throw ParseError("checkpoint: stored spec invalid: " + violations.front());
  }
  const Quantizer input_q = read_quantizer(r);

  std::vector<SparsityMask> masks;
  std::vector<LayerParams> params;
  for (std::size_t l = 0; l < s.layer_count(); ++l) {
    const std::size_t width = s.layer_widths[l];
    const auto f = static_cast<std::size_t>(s.layer_fan_in(l));
    SparsityMask mask(width, std::vector<std::uint32_t>(f));
    for (auto& row : mask)
      for (auto& src : row) src = r.u32();
    masks.push_back(std::move(mask));

    LayerParams p;
    p.terms = r.count(kMaxCount, "term count");
    if (p.terms != count_monomials(s.layer_fan_in(l), s.degree)) {
      throw ParseError("checkpoint: layer " + std::to_string(l) + " term count mismatch");
    }
    p.weights = r.f64s(width * p.terms);
    p.bn.epsilon = r.f64();
    p.bn.gamma = r.f64s(width);
    p.bn.beta = r.f64s(width);
    p.bn.running_mean = r.f64s(width);
    p.bn.running_var = r.f64s(width);
    p.quant = read_quantizer(r);
    params.push_back(std::move(p));
  }
  char trailer[4];
  r.bytes(trailer, sizeof trailer);
  if (std::memcmp(trailer, kTrailer, sizeof kTrailer) != 0) throw ParseError("checkpoint: bad trailer");
  try {
    return TrainedModel(std::move(s), std::move(masks), std::move(params), input_q);
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_checkpoint(out, model);
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace polylut
