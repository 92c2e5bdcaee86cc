#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "polylut/error.hpp"
#include "polylut/network.hpp"
#include "polylut/rng.hpp"

using namespace polylut;

namespace {

NetworkSpec small_spec() {
  NetworkSpec s;
  s.input_features = 6;
  s.layer_widths = {8, 4, 3};
  s.beta = 2;
  s.fan_in = 3;
  s.degree = 2;
  s.input_beta = 3;
  s.input_fan_in = 2;
  s.seed = 17;
  return s;
}

bool contains(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(), [&](const auto& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("bundled profiles") {
  const auto m = profile_spec("jsc-m");
  CHECK(m.layer_widths == std::vector<std::size_t>{64, 32, 32, 32, 5});
  CHECK(m.beta == 3);
  CHECK(m.fan_in == 4);
  CHECK(validate_spec(m).empty());
  CHECK(m.neuron_count() == 165);

  const auto xl = profile_spec("jsc-xl");
  CHECK(xl.layer_widths == std::vector<std::size_t>{128, 64, 64, 64, 5});
  CHECK(xl.beta == 5);
  CHECK(xl.fan_in == 3);
  CHECK(xl.primary_beta() == 7);
  CHECK(xl.layer_fan_in(0) == 2);
  CHECK(xl.table_input_bits(0) == 14);
  CHECK(xl.table_input_bits(1) == 15);

  const auto nid = profile_spec("nid-lite");
  CHECK(nid.layer_widths == std::vector<std::size_t>{686, 147, 98, 49, 1});
  CHECK(nid.table_input_bits(0) == 7);  // beta0 = 1, F = 7
  CHECK(nid.table_input_bits(1) == 14);

  const auto hdr = profile_spec("hdr");
  CHECK(hdr.input_features == 784);
  CHECK(hdr.layer_widths == std::vector<std::size_t>{256, 100, 100, 100, 100, 10});
  CHECK(hdr.table_input_bits(2) == 12);

  for (const auto& name : profile_names()) {
    CAPTURE(name);
    CHECK(validate_spec(profile_spec(name)).empty());
  }
  CHECK_THROWS_AS(profile_spec("nope"), ConfigError);
}

TEST_CASE("validate_spec reports every violation") {
  NetworkSpec s = small_spec();
  CHECK(validate_spec(s).empty());
  s.beta = 5;
  s.fan_in = 6;
  auto v = validate_spec(s);
  CHECK(contains(v, "enumeration guard"));
  CHECK(contains(v, "fan_in"));  // 6 > width 4 of layer 1's sources
  s = small_spec();
  s.degree = 0;
  s.layer_widths = {8, 0, 3};
  s.input_beta = 9;
  v = validate_spec(s);
  CHECK(v.size() >= 3);
  CHECK_THROWS_AS(require_valid(s), ConfigError);
  s = small_spec();
  s.beta = 3;
  s.fan_in = 4;
  s.layer_widths = {8, 4, 3};
  CHECK(!contains(validate_spec(s), "enumeration guard"));
  s.max_table_bits = 8;
  CHECK(contains(validate_spec(s), "enumeration guard"));
}

TEST_CASE("masks: fixed fan-in, sorted distinct in-range indices") {
  const auto s = small_spec();
  const auto masks = build_masks(s, 5);
  REQUIRE(masks.size() == 3);
  for (std::size_t l = 0; l < masks.size(); ++l) {
    CHECK(masks[l].size() == s.layer_widths[l]);
    for (const auto& row : masks[l]) {
      CHECK(row.size() == static_cast<std::size_t>(s.layer_fan_in(l)));
      CHECK(std::is_sorted(row.begin(), row.end()));
      CHECK(std::adjacent_find(row.begin(), row.end()) == row.end());
      for (auto i : row) CHECK(i < s.layer_source_count(l));
    }
  }
}

TEST_CASE("masks: deterministic in (spec, seed)") {
  const auto s = small_spec();
  CHECK(build_masks(s, 5) == build_masks(s, 5));
  CHECK(build_masks(s, 5) != build_masks(s, 6));
}

TEST_CASE("masks: only possible draw") {
  NetworkSpec s;
  s.input_features = 2;
  s.layer_widths = {5, 1};
  s.fan_in = 2;
  s.beta = 2;
  const auto masks = build_masks(s, 1);
  for (const auto& row : masks[0]) CHECK(row == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("masks: coverage whenever F * width >= sources") {
  NetworkSpec s;
  s.input_features = 16;
  s.layer_widths = {8, 2};
  s.fan_in = 4;
  s.beta = 2;
  const auto m = build_masks(s, 7);
  std::set<std::uint32_t> used;
  for (const auto& row : m[0]) used.insert(row.begin(), row.end());
  CHECK(used.size() == 16);

  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    NetworkSpec t;
    t.input_features = 1 + rng.below(40);
    t.layer_widths = {1 + rng.below(30), 1 + rng.below(10)};
    t.fan_in = 1 + static_cast<int>(rng.below(5));
    t.beta = 1;
    if (!validate_spec(t).empty()) continue;
    const auto mm = build_masks(t, rng.next());
    for (std::size_t l = 0; l < 2; ++l) {
      const auto src = t.layer_source_count(l);
      if (static_cast<std::size_t>(t.layer_fan_in(l)) * t.layer_widths[l] < src) continue;
      std::set<std::uint32_t> u;
      for (const auto& row : mm[l]) u.insert(row.begin(), row.end());
      CHECK(u.size() == src);
    }
  }
}

TEST_CASE("zeros model: shapes and all-zero weights give quantize(relu(bn(0)))") {
  const auto s = small_spec();
  const auto m = TrainedModel::zeros(s);
  REQUIRE(m.layer_count() == 3);
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& p = m.params()[l];
    CHECK(p.terms == count_monomials(s.layer_fan_in(l), s.degree));
    CHECK(p.weights.size() == p.terms * s.layer_widths[l]);
    CHECK(p.quant.bits == s.beta);
    CHECK(p.quant.is_signed == (l == 2));
  }
  CHECK(m.input_quant().bits == 3);
  CHECK(m.input_quant().is_signed);
  const std::vector<int> in(6, 1);
  for (const auto& layer : m.infer_codes(in)) {
    for (int c : layer) CHECK(c == 0);
  }
}

TEST_CASE("neuron_code composes basis, batch norm, relu and quantizer") {
  NetworkSpec s;
  s.input_features = 2;
  s.layer_widths = {2, 1};
  s.fan_in = 2;
  s.degree = 2;
  s.beta = 4;
  auto m = TrainedModel::zeros(s);
  // weights chosen so the pre-activation is x0 * x1
  auto& p = m.mutable_params()[0];
  std::fill(p.weights.begin(), p.weights.end(), 0.0);
  p.weights[4] = 1.0;
  p.quant.scale = 0.5;
  const std::vector<double> x{1.5, 2.0};
  CHECK(m.preactivation(0, 0, x) == 3.0);
  CHECK(m.neuron_code(0, 0, x) == 6);
  const std::vector<double> neg{-1.5, 2.0};
  CHECK(m.neuron_code(0, 0, neg) == 0);  // hidden layer: relu
  m.mutable_params()[1].weights = {-2.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(m.neuron_code(1, 0, std::vector<double>{0.0, 0.0}) == -2);  // output layer keeps the sign
}

TEST_CASE("classify") {
  CHECK(TrainedModel::classify(std::vector<int>{1, 3, 3, 2}) == 1);
  CHECK(TrainedModel::classify(std::vector<int>{-2, -4}) == 0);
  CHECK(TrainedModel::classify(std::vector<int>{1}) == 1);
  CHECK(TrainedModel::classify(std::vector<int>{0}) == 0);
  CHECK(TrainedModel::classify(std::vector<int>{-1}) == 0);
}

TEST_CASE("checkpoint round-trips every field bit-exactly") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = small_spec();
    s.seed = rng.next();
    s.degree = 1 + static_cast<int>(rng.below(3));
    s.clock_period_ns = rng.uniform(0.5, 3.0);
    if (trial % 2) s.input_beta.reset();
    const auto m = oracle::random_model(s, rng.next());
    std::stringstream buf;
    write_checkpoint(buf, m);
    const auto back = read_checkpoint(buf);
    CHECK(back == m);
    std::stringstream again;
    write_checkpoint(again, back);
    std::stringstream first;
    write_checkpoint(first, m);
    CHECK(again.str() == first.str());
  }
}

TEST_CASE("checkpoint reader rejects damaged input") {
  const auto m = oracle::random_model(small_spec(), 3);
  std::stringstream buf;
  write_checkpoint(buf, m);
  const std::string bytes = buf.str();

  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(read_checkpoint(truncated), ParseError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream bm(bad_magic);
  CHECK_THROWS_AS(read_checkpoint(bm), ParseError);
  std::string no_trailer = bytes.substr(0, bytes.size() - 1);
  std::stringstream nt(no_trailer);
  CHECK_THROWS_AS(read_checkpoint(nt), ParseError);
  std::stringstream empty;
  CHECK_THROWS_AS(read_checkpoint(empty), ParseError);
  CHECK_THROWS(load_checkpoint("/nonexistent/model.ckpt"));
}

TEST_CASE("TrainedModel constructor validates shapes") {
  const auto s = small_spec();
  auto m = TrainedModel::zeros(s);
  auto params = m.params();
  params[1].weights.pop_back();
  CHECK_THROWS_AS(TrainedModel(s, m.masks(), params, m.input_quant()), Error);
  auto masks = m.masks();
  masks[0].pop_back();
  CHECK_THROWS_AS(TrainedModel(s, masks, m.params(), m.input_quant()), Error);
}
