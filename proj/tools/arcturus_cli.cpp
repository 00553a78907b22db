// arcturus: operator entry point.
// Exit codes: 0 ok, 1 configuration or input error, 2 invariant violation.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "arcturus/cost.hpp"
#include "arcturus/lastmile.hpp"
#include "arcturus/midmile.hpp"
#include "arcturus/sim.hpp"
#include "arcturus/srheader.hpp"
#include "arcturus/telemetry.hpp"
#include "arcturus/tuner.hpp"

namespace fs = std::filesystem;
using namespace arcturus;

namespace {

constexpr int kConfigExit = 1;
constexpr int kInvariantExit = 2;

// Raised when a run completes but breaks one of its own checked properties.
class InvariantBroken : public Error {
 public:
  using Error::Error;
};

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

Level log_level() {
  const char* env = std::getenv("ARCTURUS_LOG");
  if (!env) return Level::Warn;
  const std::string v = env;
  if (v == "error") return Level::Error;
  if (v == "info") return Level::Info;
  if (v == "debug") return Level::Debug;
  return Level::Warn;
}

void log(Level level, const std::string& msg) {
  static const Level threshold = log_level();
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= threshold) std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string(), e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError(path.string(), "cannot write file");
  out << text;
}

// Options shared by every subcommand.
struct Common {
  std::uint64_t seed = 1;
  std::string out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
  sub->add_option("--out", c.out, "output directory");
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string scenario;
};

int run_simulate(const SimulateArgs& a, CLI::App* sub) {
  auto sc = sim::load_scenario(a.scenario);
  if (sub->count("--seed")) sc.seed = a.common.seed;
  log(Level::Info, "running " + sc.name + " for " + std::to_string(sc.duration_slots) + " slots, seed " +
                       std::to_string(sc.seed));
  const auto log_data = sim::run_scenario(sc);
  const auto summary = sim::summarize(log_data);
  if (!a.common.out.empty()) {
    sim::write_metrics(log_data, a.common.out);
    log(Level::Info, "metrics written to " + a.common.out);
  }
  std::cout << sim::to_json(summary).dump(2) << '\n';
  for (const auto& v : log_data.violations) log(Level::Error, v);
  if (!log_data.violations.empty())
    throw InvariantBroken(std::to_string(log_data.violations.size()) + " invariant violation(s)");
  return 0;
}

// ---------------------------------------------------------------------------

struct MidmileArgs {
  Common common;
  std::string topology;
  std::size_t generate = 0;
  double density = 0.4;
  int k = 3;
  double theta_a = 1.0;
  double theta_l = midmile::kUnbounded;
  int alpha = 2;
  double beta = 0.7;
  bool grid = false;
  std::vector<int> alphas{1, 2, 3};
  std::vector<double> betas{0.6, 0.7, 0.8};
};

int run_midmile(const MidmileArgs& a) {
  Topology topo;
  if (a.generate > 0) {
    topo = generate_topology(a.generate, a.density, a.common.seed);
  } else if (!a.topology.empty()) {
    topo = load_topology(a.topology);
  } else {
    throw ConfigError("midmile", "give a topology file or --generate N");
  }
  const auto g = midmile::transform(topo, a.k, a.theta_a, a.theta_l);
  midmile::PathSolution best;
  std::string csv;
  if (a.grid) {
    const auto r = midmile::grid_search(g, a.alphas, a.betas);
    best = r.best;
    csv = midmile::grid_csv(g, r.cells, topo.nodes.size());
    log(Level::Info, "grid search took " + std::to_string(r.elapsed_ms) + " ms");
  } else {
    const midmile::CarouselParams params{a.alpha, a.beta};
    params.validate();
    const auto start = std::chrono::steady_clock::now();
    best = midmile::carousel_greedy(g, params);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    csv = midmile::grid_csv(g, {{a.alpha, a.beta, midmile::path_diversity(best.paths), ms}}, topo.nodes.size());
  }
  if (const auto issues = midmile::validate_solution(g, best); !issues.empty()) {
    for (const auto& i : issues) log(Level::Error, i);
    throw InvariantBroken("mid-mile solution violates its constraints");
  }
  const auto solution = midmile::to_json(g, best);
  if (!a.common.out.empty()) {
    write_text(fs::path(a.common.out) / "solution.json", solution.dump(2) + "\n");
    write_text(fs::path(a.common.out) / "grid.csv", csv);
  }
  std::cout << solution.dump(2) << '\n' << csv;
  return 0;
}

// ---------------------------------------------------------------------------

struct LastmileArgs {
  Common common;
  std::string state;
  long long delta = 0;
  std::string scheduler = "bpr";
};

int run_lastmile(const LastmileArgs& a, CLI::App* sub) {
  auto file = lastmile::node_state_from_json(read_json(a.state));
  if (sub->count("--theta")) file.params.theta = sub->get_option("--theta")->as<double>();
  if (sub->count("--V")) file.params.penalty_weight = sub->get_option("--V")->as<double>();
  if (sub->count("--p")) file.params.redistribution = sub->get_option("--p")->as<double>();
  file.params.validate();
  if (file.params.penalty_weight == 0.0)
    file.params.penalty_weight = lastmile::default_penalty_weight(file.nodes, file.params.theta);
  lastmile::ScheduleDecision d;
  if (a.scheduler == "bpr")
    d = lastmile::bpr_schedule(a.delta, file.nodes, file.params);
  else if (a.scheduler == "latency_greedy")
    d = lastmile::latency_greedy_schedule(a.delta, file.nodes, file.params);
  else
    throw ConfigError("--scheduler", "must be bpr or latency_greedy");
  const auto out = lastmile::to_json(d, file.nodes);
  if (!a.common.out.empty()) write_text(fs::path(a.common.out) / "decision.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << '\n';
  if (a.scheduler == "bpr" && d.total_dpp_after > d.total_dpp_before)
    throw InvariantBroken("total DPP increased after redistribution");
  return 0;
}

// ---------------------------------------------------------------------------

int run_cost(const std::string& path, const Common& c) {
  const auto report = cost::cost_report(cost::deployment_from_json(read_json(path)));
  const auto j = cost::to_json(report);
  if (!c.out.empty()) write_text(fs::path(c.out) / "cost.json", j.dump(2) + "\n");
  std::cout << "compute per hour: " << report.compute_hourly.to_string() << '\n'
            << "bandwidth:        " << report.bandwidth.to_string() << '\n'
            << "total:            " << report.total.to_string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  Common common;
  std::size_t iterations = 100000;
  std::size_t max_hops = 16;
  std::size_t max_entries = 8;
};

int run_bench(const BenchArgs& a) {
  std::mt19937_64 rng(a.common.seed);
  std::vector<std::pair<sr::SegmentHeader, sr::MergedFrame>> cases;
  cases.reserve(a.iterations);
  for (std::size_t i = 0; i < a.iterations; ++i) {
    sr::SegmentHeader h;
    h.packet_id = rng();
    h.offset = static_cast<std::uint32_t>(rng());
    const std::size_t hops = 1 + rng() % a.max_hops;
    for (std::size_t k = 0; k < hops; ++k)
      h.hop_list.push_back({static_cast<std::uint32_t>(rng()), static_cast<std::uint16_t>(rng())});
    h.hop_counts = static_cast<std::uint8_t>(rng() % hops);
    std::vector<sr::SubRequest> subs(rng() % (a.max_entries + 1));
    for (std::size_t k = 0; k < subs.size(); ++k) {
      subs[k].packet_id = (static_cast<std::uint64_t>(i) << 8) | k;
      subs[k].bytes.resize(rng() % 256, static_cast<std::uint8_t>(k));
    }
    cases.emplace_back(std::move(h), sr::build_frame(subs));
  }
  std::size_t bytes = 0, mismatches = 0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [h, f] : cases) {
    const auto wire = sr::encode_packet(h, f);
    bytes += wire.size();
    const auto back = sr::decode_packet(wire);
    if (!(back.header == h) || !(back.frame == f) || !back.remainder.empty()) ++mismatches;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const nlohmann::json j = {{"iterations", a.iterations},
                            {"bytes", bytes},
                            {"seconds", secs},
                            {"packets_per_second", secs > 0 ? static_cast<double>(a.iterations) / secs : 0.0},
                            {"mismatches", mismatches}};
  if (!a.common.out.empty()) write_text(fs::path(a.common.out) / "bench_codec.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n';
  if (mismatches > 0) throw InvariantBroken("codec round-trip mismatches");
  return 0;
}

// ---------------------------------------------------------------------------

struct TuneArgs {
  Common common;
  int rounds = 500;
  double alpha = 1.0;
  double offered_rps = 20000.0;
};

int run_tune(const TuneArgs& a) {
  tuner::Tuner t(a.alpha);
  tuner::TunnelModel model;
  model.offered_rps = a.offered_rps;
  std::mt19937_64 rng(a.common.seed);
  std::ostringstream csv;
  csv << "round,S_p,C_p,T_p,cpu,rps,rqpt,art,reward\n";
  tunnel::TunnelParams params = t.step(model.observe(tunnel::TunnelParams{}, rng));
  for (int r = 0; r < a.rounds; ++r) {
    const auto counters = model.observe(params, rng);
    const auto next = t.step(counters);
    csv << r << ',' << params.sessions << ',' << params.concurrency << ',' << params.merge_timeout_ms << ',' << counters.cpu
        << ',' << counters.rps << ',' << counters.rqpt << ',' << counters.art << ',' << t.last_reward() << '\n';
    params = next;
  }
  const nlohmann::json j = {{"rounds", a.rounds},
                            {"final", {{"S_p", params.sessions}, {"C_p", params.concurrency}, {"T_p", params.merge_timeout_ms}}},
                            {"last_reward", t.last_reward()}};
  if (!a.common.out.empty()) {
    write_text(fs::path(a.common.out) / "tune.csv", csv.str());
    write_text(fs::path(a.common.out) / "tuner_state.json", t.snapshot().dump() + "\n");
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct CompressArgs {
  Common common;
  std::size_t nodes = 50;
  double outlier_fraction = 0.02;
  int k = 5;
  double multiplier = 3.0;
};

int run_compress(const CompressArgs& a) {
  telemetry::MeshModel mesh;
  mesh.nodes = a.nodes;
  mesh.outlier_fraction = a.outlier_fraction;
  mesh.seed = a.common.seed;
  const telemetry::PartitionParams params{a.k, a.multiplier};
  params.validate();
  const auto samples = telemetry::generate_mesh(mesh);
  const auto r = telemetry::evaluate_compression(samples, params);
  const nlohmann::json j = {{"samples", r.samples},          {"singular", r.singular},
                            {"raw_bytes", r.raw_bytes},      {"digest_bytes", r.digest_bytes},
                            {"ratio", r.ratio},              {"within_tolerance", r.within_tolerance},
                            {"tolerance", r.tolerance}};
  if (!a.common.out.empty()) {
    write_text(fs::path(a.common.out) / "compress_stats.json", j.dump(2) + "\n");
    write_text(fs::path(a.common.out) / "digest.csv", telemetry::digest_csv(telemetry::compress(samples, params)));
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"arcturus: overlay acceleration toolkit"};
  app.set_config("--config", "", "TOML/INI file with option defaults; flags take precedence");
  app.require_subcommand(1);
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the fully resolved configuration before running");
  // Allow --print-config after the subcommand too.
  app.fallthrough();

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "run a scenario and write metrics");
  simulate->add_option("scenario", sim_args.scenario, "scenario JSON")->required();
  add_common(simulate, sim_args.common);

  MidmileArgs mm;
  auto* mid = app.add_subcommand("midmile", "mid-mile path selection with carousel greedy");
  mid->add_option("topology", mm.topology, "topology JSON");
  mid->add_option("--generate", mm.generate, "generate a topology with this many nodes instead");
  mid->add_option("--density", mm.density, "arc density for --generate")->capture_default_str();
  mid->add_option("--k", mm.k, "requested path count")->capture_default_str();
  mid->add_option("--theta-a", mm.theta_a, "admission threshold")->capture_default_str();
  mid->add_option("--theta-l", mm.theta_l, "latency bound, ms");
  mid->add_option("--alpha", mm.alpha, "carousel passes")->capture_default_str();
  mid->add_option("--beta", mm.beta, "carousel drop fraction")->capture_default_str();
  mid->add_flag("--grid", mm.grid, "grid search over --alphas x --betas");
  mid->add_option("--alphas", mm.alphas, "grid alphas")->capture_default_str();
  mid->add_option("--betas", mm.betas, "grid betas")->capture_default_str();
  add_common(mid, mm.common);

  LastmileArgs lm;
  auto* last = app.add_subcommand("lastmile", "one BPR scheduling decision from a node-state file");
  last->add_option("state", lm.state, "node-state JSON")->required();
  last->add_option("--delta", lm.delta, "total request increment to place")->capture_default_str();
  last->add_option("--scheduler", lm.scheduler, "bpr or latency_greedy")->capture_default_str();
  last->add_option("--theta", "target CPU, overrides the file");
  last->add_option("--V", "penalty weight, overrides the file");
  last->add_option("--p", "redistribution fraction, overrides the file");
  add_common(last, lm.common);

  std::string deployment;
  Common cost_common;
  auto* cost_cmd = app.add_subcommand("cost-report", "hourly compute and bandwidth costs");
  cost_cmd->add_option("deployment", deployment, "deployment JSON")->required();
  add_common(cost_cmd, cost_common);

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench-codec", "encode/decode throughput on random packets");
  bench_cmd->add_option("--iterations", bench.iterations)->capture_default_str();
  bench_cmd->add_option("--max-hops", bench.max_hops)->capture_default_str();
  bench_cmd->add_option("--max-entries", bench.max_entries)->capture_default_str();
  add_common(bench_cmd, bench.common);

  TuneArgs tune;
  auto* tune_cmd = app.add_subcommand("tune", "LinUCB tunnel tuning against the simulated tunnel");
  tune_cmd->add_option("--rounds", tune.rounds)->capture_default_str();
  tune_cmd->add_option("--alpha", tune.alpha, "exploration weight")->capture_default_str();
  tune_cmd->add_option("--offered-rps", tune.offered_rps)->capture_default_str();
  add_common(tune_cmd, tune.common);

  CompressArgs comp;
  auto* comp_cmd = app.add_subcommand("compress-stats", "telemetry compression ratio on a synthetic mesh");
  comp_cmd->add_option("--nodes", comp.nodes)->capture_default_str();
  comp_cmd->add_option("--outlier-fraction", comp.outlier_fraction)->capture_default_str();
  comp_cmd->add_option("--k", comp.k, "nearest neighbours")->capture_default_str();
  comp_cmd->add_option("--multiplier", comp.multiplier, "singularity multiplier")->capture_default_str();
  add_common(comp_cmd, comp.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help returns 0; every other parse failure is a configuration error.
    return app.exit(e) == 0 ? 0 : kConfigExit;
  }

  if (print_config) {
    // Emitted as a section that --config reads back.
    for (const auto* sub : app.get_subcommands())
      std::cout << "[" << sub->get_name() << "]\n" << sub->config_to_str(true, false) << std::flush;
  }

  try {
    if (*simulate) return run_simulate(sim_args, simulate);
    if (*mid) return run_midmile(mm);
    if (*last) return run_lastmile(lm, last);
    if (*cost_cmd) return run_cost(deployment, cost_common);
    if (*bench_cmd) return run_bench(bench);
    if (*tune_cmd) return run_tune(tune);
    if (*comp_cmd) return run_compress(comp);
  } catch (const InvariantBroken& e) {
    log(Level::Error, e.what());
    return kInvariantExit;
  } catch (const lastmile::DriftViolation& e) {
    log(Level::Error, e.what());
    return kInvariantExit;
  } catch (const std::exception& e) {
    log(Level::Error, e.what());
    return kConfigExit;
  }
  return 0;
}
