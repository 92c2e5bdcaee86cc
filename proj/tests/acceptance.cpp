// Acceptance suite: one PASS/FAIL line per criterion.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "polylut/config.hpp"
#include "polylut/dataset.hpp"
#include "polylut/error.hpp"
#include "polylut/netlist.hpp"
#include "polylut/pareto.hpp"
#include "polylut/poly_basis.hpp"
#include "polylut/rtl.hpp"
#include "polylut/tabulate.hpp"
#include "polylut/trainer.hpp"
#include "test_util.hpp"

using namespace polylut;
using namespace testutil;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome basis_counts() {
  const auto start = Clock::now();
  bool ok = true;
  for (int f = 1; f <= 8; ++f)
    for (int d = 0; d <= 6; ++d) ok = ok && count_monomials(f, d) == oracle::brute_monomials(f, d).size();
  const std::vector<ExponentVector> listing = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1},
                                               {0, 2}, {3, 0}, {2, 1}, {1, 2}, {0, 3}};
  const bool order = enumerate_basis(2, 3).terms() == listing && count_monomials(2, 3) == 10;
  const double secs = since(start);
  return {ok && order && secs < 1.0,
          std::string("counts ") + (ok ? "match" : "differ") + ", (2,3) listing " + (order ? "matches" : "differs") +
              ", " + fmt("%.3f s", secs)};
}

Outcome linear_equivalence() {
  auto cfg = profile_config("spiral");
  auto spec = cfg.network;
  spec.degree = 1;
  cfg.training.epochs = 50;
  const auto [tr, te] = load_dataset(cfg);
  const auto init = init_model(spec, tr, cfg.training);
  oracle::LinearNet lin(init);
  const auto ref = lin.train(tr, te, cfg.training);
  const auto got = train(init, tr, te, cfg.training);
  std::size_t same = 0;
  for (std::size_t e = 0; e < std::min(ref.size(), got.history.size()); ++e) {
    const auto& g = got.history[e];
    const auto& r = ref[e];
    if (g.lr == r.lr && g.batch_loss == r.batch_loss && g.train_loss == r.train_loss &&
        g.train_accuracy == r.train_accuracy && g.test_accuracy == r.test_accuracy)
      ++same;
  }
  return {same == 50 && ref.size() == 50 && got.history.size() == 50,
          std::to_string(same) + "/50 epochs bitwise identical, final loss " +
              fmt("%.6f", got.history.empty() ? 0.0 : got.history.back().train_loss)};
}

Outcome bit_exact() {
  const auto start = Clock::now();
  auto cfg = profile_config("spiral");
  cfg.network.beta = 2;
  cfg.network.fan_in = 2;
  cfg.network.input_beta = 2;
  cfg.network.input_fan_in = 2;
  cfg.training.epochs = 40;
  const auto [tr, te] = load_dataset(cfg);
  const auto model = train(cfg.network, tr, te, cfg.training).model;
  const auto net = build_netlist(model, tabulate_model(model));
  const auto small = equivalence_check(net, model, &te);

  auto hdr = profile_spec("hdr");
  const auto big_model = oracle::random_model(hdr, 21);
  const auto big_net = build_netlist(big_model, tabulate_model(big_model));
  EquivalenceOptions opt;
  opt.random_budget = 10000;
  opt.seed = 5;
  const auto big = equivalence_check(big_net, big_model, nullptr, opt);
  const double secs = since(start);
  const bool ok = small.exhaustive && small.vectors == 16 + te.rows && small.mismatch_count == 0 && !big.exhaustive &&
                  big.vectors == 10000 && big.mismatch_count == 0 && secs < 60.0;
  return {ok, "spiral 3-layer exhaustive 16 combinations + " + std::to_string(te.rows) + " test rows, " +
                  std::to_string(small.mismatch_count) + " mismatches; hdr " + std::to_string(big_net.node_count()) +
                  " nodes, " + std::to_string(big.vectors) + " random vectors, " +
                  std::to_string(big.mismatch_count) + " mismatches; " + fmt("%.1f s", secs)};
}

Outcome gradients() {
  const auto s = gradcheck::probe_all(77, 12);
  return {s.max_rel_error < 1e-4 && s.checked > 100,
          std::to_string(s.checked) + " partials, max relative error " + fmt("%.2e", s.max_rel_error) +
              (s.max_rel_error < 1e-4 ? "" : " at " + s.worst)};
}

Outcome degree_benefit() {
  const auto start = Clock::now();
  const auto cfg = profile_config("spiral");
  const auto [tr, te] = load_dataset(cfg);
  double loss[4][4] = {}, acc[4][4] = {};
  for (std::size_t depth : {2, 3}) {
    for (int d : {1, 2, 3}) {
      auto spec = with_depth(cfg.network, depth);
      spec.degree = d;
      const auto r = train(spec, tr, te, cfg.training);
      loss[depth][d] = r.history.back().train_loss;
      acc[depth][d] = 100.0 * r.history.back().train_accuracy;
    }
  }
  const double secs = since(start);
  const double gain = acc[3][3] - acc[3][1];
  const bool ok = gain >= 5.0 && loss[2][2] <= loss[2][1] && loss[3][2] <= loss[3][1] && secs < 300.0;
  std::ostringstream d;
  d << "3 layers: D3 " << fmt("%.1f%%", acc[3][3]) << " vs D1 " << fmt("%.1f%%", acc[3][1]) << " ("
    << fmt("%+.1f", gain) << " pts); loss D1/D2 depth 2 " << fmt("%.4f", loss[2][1]) << "/" << fmt("%.4f", loss[2][2])
    << ", depth 3 " << fmt("%.4f", loss[3][1]) << "/" << fmt("%.4f", loss[3][2]) << "; " << fmt("%.1f s", secs);
  return {ok, d.str()};
}

Outcome tabulation_scale() {
  const auto model = oracle::random_model(profile_spec("jsc-m-lite"), 3);
  const auto start = Clock::now();
  const auto layer = tabulate_layer(model, 0);
  const double secs = since(start);
  const bool ok = layer.size() == 64 && layer[0].size() == 4096 && layer[0].input_bits == 12 && secs < 10.0;
  return {ok, std::to_string(layer.size()) + " neurons x " + std::to_string(layer[0].size()) + " entries in " +
                  fmt("%.2f s", secs)};
}

Outcome latency_model() {
  bool ok = true;
  std::string detail;
  for (std::size_t layers = 1; layers <= 5; ++layers) {
    auto spec = with_depth(profile_spec("jsc-m"), layers);
    spec.clock_period_ns = 1.6;
    const auto r = report(build_netlist(TrainedModel::zeros(spec), tabulate_model(TrainedModel::zeros(spec))));
    ok = ok && r.cycles == layers && std::abs(r.latency_ns - 1.6 * static_cast<double>(layers)) < 1e-9;
    if (layers == 5) detail = std::to_string(r.cycles) + " cycles, " + fmt("%.1f ns", r.latency_ns);
  }
  return {ok, detail + " at 1.6 ns; linear in layer count for 1..5"};
}

Outcome rtl_suite() {
  auto cfg = profile_config("spiral");
  cfg.training.epochs = 10;
  const auto [tr, te] = load_dataset(cfg);
  auto emit_once = [&](const std::string& dir) {
    const auto model = train(cfg.network, tr, te, cfg.training).model;
    const auto net = build_netlist(model, tabulate_model(model));
    const auto bundle = emit_bundle(net, golden_vectors(net, stimulus(net, 12, 256, 1)));
    write_bundle(dir, bundle);
    return check_bundle(read_bundle(dir), net);
  };
  TempDir a, b;
  const auto issues = emit_once(a.path.string());
  emit_once(b.path.string());
  std::size_t files = 0, identical = 0;
  for (const auto& e : std::filesystem::directory_iterator(a.path)) {
    const auto name = e.path().filename().string();
    ++files;
    if (std::filesystem::exists(b / name) && read_bytes(a / name) == read_bytes(b / name)) ++identical;
  }
  std::size_t other = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(b.path)) ++other;
  const bool ok = issues.empty() && files > 0 && identical == files && other == files;
  return {ok, std::to_string(issues.size()) + " structural issues" + (issues.empty() ? "" : " (" + issues[0] + ")") +
                  ", " + std::to_string(identical) + "/" + std::to_string(files) + " files byte-identical"};
}

Outcome pareto() {
  Rng rng(2024);
  std::size_t agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<DesignPoint> pts;
    const std::size_t n = rng.below(60);
    const bool coarse = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = coarse ? static_cast<double>(rng.below(12)) : rng.uniform(0.0, 10.0);
      const double e = coarse ? static_cast<double>(rng.below(12)) : rng.uniform(0.0, 10.0);
      pts.push_back({c, e, std::to_string(i)});
    }
    if (pareto_front(pts) == oracle::brute_front(pts)) ++agree;
  }
  const std::vector<std::pair<double, double>> fig = {
      {2.476, 30.27}, {4.797, 28.6},  {6.38, 28.22},  {8.9, 28.14},   {2.624, 29.09}, {4.659, 27.85},
      {7.456, 27.61}, {11.285, 27.7}, {2.784, 28.21}, {4.884, 27.9},  {6.692, 27.57}, {11.63, 27.68},
      {3.08, 28.58},  {4.854, 27.73}, {7.092, 27.58}, {9.755, 27.54}, {2.724, 28.36}, {4.716, 27.99},
      {7.644, 27.63}, {10.44, 27.59}, {2.684, 28.64}, {4.647, 27.71}, {7.248, 27.67}, {9.4, 27.54}};
  std::vector<DesignPoint> pts;
  for (const auto& [c, e] : fig) pts.push_back({c, e, ""});
  const auto front = pareto_front(pts);
  auto on_front = [&](double c, double e) {
    for (const auto& p : front)
      if (p.cost == c && p.error == e) return true;
    return false;
  };
  const bool a = on_front(2.476, 30.27), b = on_front(2.784, 28.21);
  return {agree == 1000 && a && b, std::to_string(agree) + "/1000 random sets agree; 24-point set front has " +
                                       std::to_string(front.size()) + " points, (2.476, 30.27) " +
                                       (a ? "on" : "off") + ", (2.784, 28.21) " + (b ? "on" : "off")};
}

template <typename F>
bool fails_with(F f, const std::string& needle) {
  try {
    f();
  } catch (const Error& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

Outcome parsers() {
  int ok = 0, total = 0;
  auto tally = [&](bool b) {
    ++total;
    if (b) ++ok;
  };
  const auto csv = load_csv(fixture("small.csv"), "label", {"pt", "mass, GeV"});
  tally(format_csv(csv) == read_text(fixture("small.csv")));
  const auto idx = load_idx(fixture("two_images.idx3-ubyte"), fixture("two_labels.idx1-ubyte"));
  const auto [img, lab] = format_idx(idx);
  tally(img == read_bytes(fixture("two_images.idx3-ubyte")));
  tally(lab == read_bytes(fixture("two_labels.idx1-ubyte")));
  tally(idx.rows == 2 && idx.cols == 784 && idx.features[784 + 5] == 1.0);

  tally(fails_with([] { parse_csv("a,b\n1,2\n", "b", {}); }, "empty feature selection"));
  tally(fails_with([] { parse_csv("a,b\n1,2\n", "b", {"z"}); }, "missing column 'z'"));
  tally(fails_with([] { parse_csv("a,b\n1,2\nx,3\n", "b", {"a"}); }, "line 3"));
  tally(fails_with([] { parse_csv("a,b\n1,2\n3\n", "b", {"a"}); }, "line 3: expected"));
  const auto labels = read_bytes(fixture("two_labels.idx1-ubyte"));
  const auto images = read_bytes(fixture("two_images.idx3-ubyte"));
  tally(fails_with([&] { parse_idx(images, images); }, "bad magic 0x00000803"));
  auto cut = images;
  cut.pop_back();
  tally(fails_with([&] { parse_idx(cut, labels); }, "truncated payload"));
  auto one_label = labels;
  one_label.pop_back();
  one_label[7] = 1;
  tally(fails_with([&] { parse_idx(images, one_label); }, "2 images but 1"));
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " round-trip and malformed-input checks"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"basis correctness", basis_counts},      {"strict generalization", linear_equivalence},
      {"bit-exact equivalence", bit_exact},     {"gradient checks", gradients},
      {"degree benefit", degree_benefit},       {"tabulation scale", tabulation_scale},
      {"latency model", latency_model},         {"rtl structural suite", rtl_suite},
      {"pareto front", pareto},                 {"parsers", parsers},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %zu (%s): %s - %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
