#include "polylut/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "polylut/config.hpp"
#include "polylut/error.hpp"
#include "polylut/netlist.hpp"
#include "polylut/pareto.hpp"
#include "polylut/rtl.hpp"
#include "polylut/tabulate.hpp"
#include "polylut/trainer.hpp"

namespace polylut {

namespace fs = std::filesystem;

FaultSpec parse_fault(const std::string& text) {
  FaultSpec f;
  std::size_t* fields[] = {&f.layer, &f.node, &f.address};
  const char* p = text.data();
  const char* end = p + text.size();
  for (int i = 0; i < 3; ++i) {
    const auto [next, ec] = std::from_chars(p, end, *fields[i]);
    if (ec != std::errc() || next == p) throw ConfigError("--inject-fault: expected layer:node:address");
    p = next;
    if (i < 2) {
      if (p == end || *p != ':') throw ConfigError("--inject-fault: expected layer:node:address");
      ++p;
    }
  }
  if (p != end) throw ConfigError("--inject-fault: trailing text in '" + text + "'");
  return f;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  auto number = [&](const std::string& s) {
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v < 1) {
      throw ConfigError("bad list element '" + s + "' in '" + text + "'");
    }
    return v;
  };
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(number(item));
    } else {
      const int lo = number(item.substr(0, dash));
      const int hi = number(item.substr(dash + 1));
      if (hi < lo) throw ConfigError("empty range '" + item + "'");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::string file_hash(const std::vector<std::string>& paths) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path + "'");
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
      for (std::streamsize i = 0; i < in.gcount(); ++i) {
        h ^= static_cast<unsigned char>(buf[i]);
        h *= 0x100000001b3ull;
      }
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

namespace {

struct Overrides {
  std::string config;
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::optional<int> degree;
  std::optional<int> layers;
  std::optional<double> clock_ns;
  std::optional<int> epochs;
  std::optional<std::size_t> spiral_n;
  std::optional<double> spiral_noise;
  std::optional<double> spiral_turns;
};

void add_config_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON experiment config");
  cmd->add_option("--profile", o.profile, "bundled profile")
      ->check(CLI::IsMember(profile_names()));
  cmd->add_option("--seed", o.seed, "seed for masks, initialization and shuffling");
  cmd->add_option("--degree", o.degree, "polynomial degree D");
  cmd->add_option("--layers", o.layers, "keep this many layers (trailing hidden layers dropped)");
  cmd->add_option("--clock-ns", o.clock_ns, "clock period for latency");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--spiral-n", o.spiral_n, "spiral points per class (selects the spiral generator)");
  cmd->add_option("--spiral-noise", o.spiral_noise, "spiral radial noise sd");
  cmd->add_option("--spiral-turns", o.spiral_turns, "spiral turns");
}

ExperimentConfig resolve_config(const Overrides& o) {
  if (!o.config.empty() && !o.profile.empty()) {
    throw ConfigError("give either --config or --profile, not both");
  }
  ExperimentConfig c;
  if (!o.config.empty()) c = load_config(o.config);
  else if (!o.profile.empty()) c = profile_config(o.profile);
  else throw ConfigError("one of --config or --profile is required");
  if (o.seed) {
    c.network.seed = *o.seed;
    c.training.seed = *o.seed;
  }
  if (o.degree) c.network.degree = *o.degree;
  if (o.layers) c.network = with_depth(c.network, static_cast<std::size_t>(*o.layers));
  if (o.clock_ns) c.network.clock_period_ns = *o.clock_ns;
  if (o.epochs) c.training.epochs = *o.epochs;
  if (o.spiral_n || o.spiral_noise || o.spiral_turns) {
    if (c.dataset.kind != "spirals") {
      c.dataset = DatasetConfig{};
      c.dataset.kind = "spirals";
    }
    if (o.spiral_n) c.dataset.n_per_class = *o.spiral_n;
    if (o.spiral_noise) c.dataset.noise_sd = *o.spiral_noise;
    if (o.spiral_turns) c.dataset.turns = *o.spiral_turns;
  }
  if (const auto v = validate_spec(c.network); !v.empty()) throw ConfigError("network: " + v.front());
  if (const auto v = validate_train_config(c.training); !v.empty()) {
    throw ConfigError("training: " + v.front());
  }
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

int cmd_train(const Overrides& o, const std::string& out_dir, std::ostream& out) {
  const ExperimentConfig c = resolve_config(o);
  const auto [train_set, test_set] = load_dataset(c);
  const std::string hash = config_hash(c);
  fs::create_directories(out_dir);

  const TrainResult r = train(c.network, train_set, test_set, c.training);
  const fs::path dir(out_dir);
  save_checkpoint((dir / "model.ckpt").string(), r.model);
  {
    std::ofstream h(dir / "history.csv");
    write_history_csv(h, r.history);
  }
  write_text(dir / "config.json", config_to_json(c));

  std::ostringstream s;
  s << "config_hash: " << hash << "\n";
  s << "profile: " << (c.profile.empty() ? "-" : c.profile) << "\n";
  s << "layers: " << c.network.layer_count() << "\n";
  s << "degree: " << c.network.degree << "\n";
  s << "neurons: " << c.network.neuron_count() << "\n";
  s << "train_rows: " << train_set.rows << "\n";
  s << "test_rows: " << test_set.rows << "\n";
  s << "epochs: " << r.history.size() << "\n";
  s << "initial_loss: " << fmt(r.initial_loss) << "\n";
  if (!r.history.empty()) {
    const auto& last = r.history.back();
    s << "final_train_loss: " << fmt(last.train_loss) << "\n";
    s << "train_accuracy: " << fmt(last.train_accuracy) << "\n";
    s << "test_accuracy: " << fmt(last.test_accuracy) << "\n";
  }
  write_text(dir / "summary.txt", s.str());
  out << s.str();
  return kExitOk;
}

struct CompileArgs {
  std::string checkpoint;
  std::string out;
  std::string config;
  std::optional<double> clock_ns;
  int exhaustive_limit = 20;
  std::size_t random_budget = 10000;
  std::vector<std::string> faults;
  unsigned threads = 0;
  std::uint64_t seed = 0;
};

int cmd_compile(const CompileArgs& a, std::ostream& out) {
  const TrainedModel model = load_checkpoint(a.checkpoint);
  std::optional<Dataset> data;
  if (!a.config.empty()) {
    ExperimentConfig c = load_config(a.config);
    data = load_dataset(c).second;
    if (data->cols != model.spec().input_features) {
      throw ConfigError("dataset has " + std::to_string(data->cols) + " features, model expects " +
                        std::to_string(model.spec().input_features));
    }
  }
  const std::string hash = file_hash({a.checkpoint});

  Netlist net = build_netlist(model, tabulate_model(model, a.threads));
  if (a.clock_ns) net.clock_period_ns = *a.clock_ns;
  for (const auto& text : a.faults) {
    const FaultSpec f = parse_fault(text);
    if (f.layer >= net.layers.size() || f.node >= net.layers[f.layer].nodes.size()) {
      throw ConfigError("--inject-fault: no node " + text);
    }
    auto& table = net.layers[f.layer].nodes[f.node].table;
    if (f.address >= table.entries.size()) throw ConfigError("--inject-fault: address out of range");
    auto& e = table.entries[f.address];
    e = static_cast<std::uint8_t>(e ^ 1u);
  }

  EquivalenceOptions opts;
  opts.exhaustive_limit_bits = a.exhaustive_limit;
  opts.random_budget = a.random_budget;
  opts.seed = a.seed;
  const EquivalenceReport eq = equivalence_check(net, model, data ? &*data : nullptr, opts);
  const CostReport cost = report(net);

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  write_netlist(a.out, net);
  std::ostringstream s;
  s << "checkpoint_hash: " << hash << "\n";
  s << format_report(cost);
  s << "equivalence: " << (eq.exhaustive ? "exhaustive" : "sampled") << ", " << eq.vectors << " vectors\n";
  if (eq.labelled_rows > 0) {
    s << "dataset rows: " << eq.labelled_rows << ", model accuracy " << fmt(eq.model_accuracy)
      << ", netlist accuracy " << fmt(eq.netlist_accuracy) << "\n";
  }
  s << "mismatches: " << eq.mismatch_count << "\n";
  for (const auto& m : eq.mismatches) {
    s << "  vector " << m.vector << ": first divergence at layer " << m.layer << " node " << m.node << "\n";
  }
  write_text(dir / "report.txt", s.str());
  {
    std::ofstream csv(dir / "report.csv");
    write_report_csv(csv, cost);
  }
  out << s.str();
  return eq.mismatch_count == 0 ? kExitOk : kExitVerifyFailed;
}

struct EmitArgs {
  std::string netlist;
  std::string out;
  int exhaustive_limit = 12;
  std::size_t vectors = 256;
  std::uint64_t seed = 0;
};

int cmd_emit(const EmitArgs& a, std::ostream& out, std::ostream& err) {
  if (!fs::exists(fs::path(a.netlist) / "netlist.txt")) {
    throw ConfigError("--netlist: no netlist.txt in '" + a.netlist + "'");
  }
  const Netlist net = read_netlist(a.netlist);
  const auto inputs = stimulus(net, a.exhaustive_limit, a.vectors, a.seed);
  RtlBundle bundle = emit_bundle(net, golden_vectors(net, inputs));

  std::vector<std::string> sources{(fs::path(a.netlist) / "netlist.txt").string()};
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    sources.push_back((fs::path(a.netlist) / table_dump_filename(l)).string());
  }
  nlohmann::ordered_json manifest = nlohmann::ordered_json::parse(bundle.manifest);
  manifest["netlist_hash"] = file_hash(sources);
  bundle.manifest = manifest.dump(2) + "\n";

  write_bundle(a.out, bundle);
  // Check what actually landed on disk.
  const auto issues = check_bundle(read_bundle(a.out), net);
  for (const auto& i : issues) err << "rtl check: " << i << "\n";
  out << "modules: " << bundle.modules.size() << "\n";
  out << "vectors: " << inputs.size() << "\n";
  out << "netlist_hash: " << manifest["netlist_hash"].get<std::string>() << "\n";
  out << "rtl check: " << (issues.empty() ? "ok" : std::to_string(issues.size()) + " issue(s)") << "\n";
  return issues.empty() ? kExitOk : kExitVerifyFailed;
}

struct SweepCell {
  int depth = 0;
  int degree = 0;
  bool ok = false;
  std::string failure;
  double initial_loss = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::uint64_t luts = 0;
  std::size_t cycles = 0;
  double latency_ns = 0.0;

  std::string label() const { return "L" + std::to_string(depth) + "-D" + std::to_string(degree); }
  double error_pct() const { return 100.0 * (1.0 - test_accuracy); }
};

SweepCell run_cell(const ExperimentConfig& base, int depth, int degree, const Dataset& train_set,
                   const Dataset& test_set) {
  SweepCell cell;
  cell.depth = depth;
  cell.degree = degree;
  try {
    NetworkSpec spec = with_depth(base.network, static_cast<std::size_t>(depth));
    spec.degree = degree;
    require_valid(spec);
    const TrainResult r = train(spec, train_set, test_set, base.training);
    cell.initial_loss = r.initial_loss;
    if (!r.history.empty()) {
      cell.train_loss = r.history.back().train_loss;
      cell.train_accuracy = r.history.back().train_accuracy;
      cell.test_accuracy = r.history.back().test_accuracy;
    }
    const CostReport cost = report(build_netlist(r.model, tabulate_model(r.model, 1)));
    cell.luts = cost.total_luts;
    cell.cycles = cost.cycles;
    cell.latency_ns = cost.latency_ns;
    cell.ok = true;
  } catch (const DivergenceError& e) {
    cell.failure = std::string("diverged: ") + e.what();
  } catch (const Error& e) {
    cell.failure = e.what();
  }
  return cell;
}

struct SweepArgs {
  std::string depths;
  std::string degrees = "1-6";
  std::string out;
  unsigned jobs = 1;
};

void write_front(const fs::path& path, const char* cost_name, const std::vector<DesignPoint>& front) {
  std::ostringstream s;
  s << "label," << cost_name << ",error_pct\n";
  for (const auto& p : front) s << p.label << "," << fmt(p.cost, 10) << "," << fmt(p.error, 10) << "\n";
  write_text(path, s.str());
}

int cmd_sweep(const Overrides& o, const SweepArgs& a, std::ostream& out, std::ostream& err) {
  const ExperimentConfig c = resolve_config(o);
  const std::size_t full = c.network.layer_count();
  std::vector<int> depths;
  if (a.depths.empty()) {
    for (std::size_t d = std::min<std::size_t>(2, full); d <= full; ++d) depths.push_back(static_cast<int>(d));
  } else {
    depths = parse_int_list(a.depths);
  }
  const std::vector<int> degrees = parse_int_list(a.degrees);
  for (int d : depths) {
    if (static_cast<std::size_t>(d) > full) {
      throw ConfigError("--depths: " + std::to_string(d) + " exceeds the " + std::to_string(full) +
                        "-layer base network");
    }
  }
  const auto [train_set, test_set] = load_dataset(c);
  fs::create_directories(a.out);

  std::vector<std::pair<int, int>> grid;
  for (int d : depths) {
    for (int deg : degrees) grid.emplace_back(d, deg);
  }
  std::vector<SweepCell> cells(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      cells[i] = run_cell(c, grid[i].first, grid[i].second, train_set, test_set);
      std::lock_guard lock(log_mu);
      err << "sweep " << cells[i].label() << ": "
          << (cells[i].ok ? "test accuracy " + fmt(cells[i].test_accuracy, 4) : "FAILED " + cells[i].failure)
          << "\n";
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(a.jobs, static_cast<unsigned>(grid.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const std::string hash = config_hash(c);
  std::ostringstream csv;
  csv << "# config_hash " << hash << "\n";
  csv << "depth,degree,status,initial_loss,train_loss,train_accuracy,test_accuracy,error_pct,luts,cycles,latency_ns\n";
  std::vector<DesignPoint> by_latency, by_luts;
  for (const auto& cell : cells) {
    csv << cell.depth << "," << cell.degree << "," << (cell.ok ? "ok" : "failed");
    if (cell.ok) {
      csv << "," << fmt(cell.initial_loss, 10) << "," << fmt(cell.train_loss, 10) << ","
          << fmt(cell.train_accuracy, 10) << "," << fmt(cell.test_accuracy, 10) << ","
          << fmt(cell.error_pct(), 10) << "," << cell.luts << "," << cell.cycles << ","
          << fmt(cell.latency_ns, 10) << "\n";
      by_latency.push_back({cell.latency_ns, cell.error_pct(), cell.label()});
      by_luts.push_back({static_cast<double>(cell.luts), cell.error_pct(), cell.label()});
    } else {
      csv << ",,,,,,,,\n";
    }
  }
  write_text(fs::path(a.out) / "sweep.csv", csv.str());
  const auto front_latency = pareto_front(by_latency);
  const auto front_luts = pareto_front(by_luts);
  write_front(fs::path(a.out) / "pareto_latency.csv", "latency_ns", front_latency);
  write_front(fs::path(a.out) / "pareto_luts.csv", "luts", front_luts);

  out << "config_hash: " << hash << "\n";
  out << "cells: " << cells.size() << " (" << by_latency.size() << " ok)\n";
  out << "pareto (latency_ns, error %):";
  for (const auto& p : front_latency) out << " " << p.label << "(" << fmt(p.cost) << ", " << fmt(p.error, 4) << ")";
  out << "\npareto (luts, error %):";
  for (const auto& p : front_luts) out << " " << p.label << "(" << fmt(p.cost) << ", " << fmt(p.error, 4) << ")";
  out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"polylut: train polynomial LUT networks and compile them to netlists and RTL"};
  app.require_subcommand(1);

  Overrides train_o;
  std::string train_out = "out";
  auto* train_cmd = app.add_subcommand("train", "train a network; writes model.ckpt, history.csv, summary.txt");
  add_config_options(train_cmd, train_o);
  train_cmd->add_option("--out", train_out, "output directory");

  CompileArgs compile_a;
  compile_a.out = "netlist";
  auto* compile_cmd = app.add_subcommand("compile", "tabulate, build the netlist, check equivalence, report cost");
  compile_cmd->add_option("--checkpoint", compile_a.checkpoint, "trained model checkpoint")->required();
  compile_cmd->add_option("--out", compile_a.out, "output directory");
  compile_cmd->add_option("--config", compile_a.config, "config whose dataset adds labelled test rows");
  compile_cmd->add_option("--clock-ns", compile_a.clock_ns, "clock period for latency");
  compile_cmd->add_option("--exhaustive-limit", compile_a.exhaustive_limit,
                          "check exhaustively up to this many primary-input bits");
  compile_cmd->add_option("--random-vectors", compile_a.random_budget, "random vectors when not exhaustive");
  compile_cmd->add_option("--inject-fault", compile_a.faults, "flip bit 0 of layer:node:address (testing)");
  compile_cmd->add_option("--threads", compile_a.threads, "tabulation threads (0 = hardware)");
  compile_cmd->add_option("--seed", compile_a.seed, "seed for random vectors");

  EmitArgs emit_a;
  emit_a.out = "rtl";
  auto* emit_cmd = app.add_subcommand("emit", "write Verilog, testbench and vectors; run the structural check");
  emit_cmd->add_option("--netlist", emit_a.netlist, "directory written by compile")->required();
  emit_cmd->add_option("--out", emit_a.out, "output directory");
  emit_cmd->add_option("--exhaustive-limit", emit_a.exhaustive_limit,
                       "enumerate all inputs up to this many bits for the vectors");
  emit_cmd->add_option("--vectors", emit_a.vectors, "random vectors otherwise");
  emit_cmd->add_option("--seed", emit_a.seed, "seed for random vectors");

  Overrides sweep_o;
  SweepArgs sweep_a;
  sweep_a.out = "sweep";
  auto* sweep_cmd = app.add_subcommand("sweep", "train every (depth, degree) cell and list Pareto fronts");
  add_config_options(sweep_cmd, sweep_o);
  sweep_cmd->add_option("--out", sweep_a.out, "output directory");
  sweep_cmd->add_option("--depths", sweep_a.depths, "layer counts, e.g. 2,3,4,5 (default 2..full)");
  sweep_cmd->add_option("--degrees", sweep_a.degrees, "degrees, e.g. 1-6");
  sweep_cmd->add_option("--jobs", sweep_a.jobs, "cells trained in parallel");

  std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_o, train_out, out);
    if (*compile_cmd) return cmd_compile(compile_a, out);
    if (*emit_cmd) return cmd_emit(emit_a, out, err);
    if (*sweep_cmd) return cmd_sweep(sweep_o, sweep_a, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerifyFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerifyFailed;
  }
  return kExitUsage;
}

}  // namespace polylut
