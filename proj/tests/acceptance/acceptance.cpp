// One line per acceptance criterion: "[PASS|FAIL] <n> <name>: <measurements>".
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "arcturus/cost.hpp"
#include "arcturus/lastmile.hpp"
#include "arcturus/midmile.hpp"
#include "arcturus/sim.hpp"
#include "arcturus/srheader.hpp"
#include "arcturus/stats.hpp"
#include "arcturus/telemetry.hpp"
#include "arcturus/tuner.hpp"
#include "arcturus/tunnel.hpp"
#include "oracles.hpp"

namespace {

using namespace arcturus;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::filesystem::path scenario(const char* name) { return std::filesystem::path(ARCTURUS_SCENARIO_DIR) / name; }

// ---------------------------------------------------------------------------

sr::SegmentHeader random_header(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> hops(0, 24);
  sr::SegmentHeader h;
  h.packet_id = rng();
  h.offset = static_cast<std::uint32_t>(rng());
  const int n = hops(rng);
  for (int i = 0; i < n; ++i)
    h.hop_list.push_back({static_cast<std::uint32_t>(rng()), static_cast<std::uint16_t>(rng())});
  h.hop_counts = static_cast<std::uint8_t>(n == 0 ? 0 : rng() % static_cast<unsigned>(n + 1));
  return h;
}

sr::MergedFrame random_frame(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> entries(0, 8), len(0, 96);
  std::vector<sr::SubRequest> subs;
  const int n = entries(rng);
  for (int i = 0; i < n; ++i) {
    sr::SubRequest s;
    s.packet_id = rng() ^ static_cast<std::uint64_t>(i);
    s.bytes.resize(static_cast<std::size_t>(len(rng)));
    for (auto& b : s.bytes) b = static_cast<std::uint8_t>(rng());
    subs.push_back(std::move(s));
  }
  return sr::build_frame(subs);
}

Outcome codec_round_trip() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::size_t mismatches = 0, declared = 0, undeclared = 0, accepted = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto h = random_header(rng);
    const auto f = random_frame(rng);
    const auto wire = sr::encode_packet(h, f);
    const auto back = sr::decode_packet(wire);
    if (!(back.header == h) || !(back.frame == f) || !back.remainder.empty()) ++mismatches;
    if (i % 5 == 0) {
      // Truncate, and sometimes corrupt a byte, then decode.
      sr::Bytes cut(wire.begin(), wire.begin() + static_cast<std::ptrdiff_t>(rng() % (wire.size() + 1)));
      if (!cut.empty() && rng() % 2) cut[rng() % cut.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      try {
        sr::decode_packet(cut);
        ++accepted;
      } catch (const sr::CodecError&) {
        ++declared;
      } catch (...) {
        ++undeclared;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && undeclared == 0 && secs < 30.0,
          fmt("100000 round-trips, %zu mismatches; fuzz: %zu declared errors, %zu undeclared, %zu decoded; %.2fs",
              mismatches, declared, undeclared, accepted, secs)};
}

// ---------------------------------------------------------------------------

Outcome merge_timeout_bound() {
  using tunnel::Micros;
  std::mt19937_64 rng(77);
  std::exponential_distribution<double> gap(1.0 / 400.0);  // mean 400 us between submissions
  // Streams are held up to 2 s so that pools saturate.
  std::uniform_int_distribution<int> size(40, 3000), hold(1000, 2000000), dest_pick(0, 3);
  std::uint64_t total = 0, late = 0, saturated = 0, limit_breaches = 0;
  double worst_ratio = 0.0;
  for (int tp = 1; tp <= 5; ++tp) {
    const tunnel::TunnelParams params{1 + tp, 50 + 10 * tp, tp};
    tunnel::ConnectionPool pool(params);
    tunnel::MergeBuffer buffer(Micros(tp * 1000));
    std::map<std::uint64_t, Micros> submitted;
    using Held = std::pair<Micros, tunnel::StreamHandle>;
    auto later = [](const Held& a, const Held& b) { return a.first > b.first; };
    std::priority_queue<Held, std::vector<Held>, decltype(later)> held(later);
    const sr::HopAddress dests[4] = {{1, 1}, {2, 2}, {3, 3}, {4, 4}};

    auto release_until = [&](Micros now) {
      while (!held.empty() && held.top().first <= now) {
        pool.release(held.top().second);
        held.pop();
      }
    };
    auto dispatch = [&](const std::optional<sr::MergedFrame>& frame, Micros at) {
      if (!frame) return;
      for (const auto& e : frame->entries) {
        const auto waited = at - submitted.at(e.packet_id);
        worst_ratio = std::max(worst_ratio, static_cast<double>(waited.count()) / (tp * 1000.0));
        if (waited > Micros(tp * 1000)) ++late;
        submitted.erase(e.packet_id);
      }
      release_until(at);
      const auto& dest = dests[dest_pick(rng)];
      try {
        auto handle = pool.acquire_stream(dest);
        held.emplace(at + Micros(hold(rng)), handle);
      } catch (const tunnel::TunnelError&) {
        ++saturated;
      }
      for (const auto& d : dests)
        if (pool.session_count(d) > static_cast<std::size_t>(params.sessions)) ++limit_breaches;
      if (pool.max_streams_on_any_session() > static_cast<std::size_t>(params.concurrency)) ++limit_breaches;
    };

    Micros now{0};
    double clock_us = 0.0;
    for (int i = 0; i < 1000000; ++i) {
      clock_us += gap(rng);
      now = Micros(static_cast<std::int64_t>(clock_us));
      while (auto d = buffer.deadline()) {
        if (*d > now) break;
        dispatch(buffer.poll(*d), *d);
      }
      const std::uint64_t id = static_cast<std::uint64_t>(tp) << 32 | static_cast<std::uint64_t>(i);
      submitted[id] = now;
      dispatch(buffer.submit(id, sr::Bytes(static_cast<std::size_t>(size(rng)), 0x5a), now), now);
      ++total;
    }
    if (auto d = buffer.deadline()) dispatch(buffer.poll(*d), *d);
    if (!submitted.empty()) late += submitted.size();
  }
  return {late == 0 && limit_breaches == 0 && total == 5000000,
          fmt("%llu submissions (10^6 per T_p, T_p=1..5 ms): %llu delayed past T_p (worst wait %.3f T_p), %llu pool-limit breaches, "
              "%llu saturated acquisitions rejected",
              static_cast<unsigned long long>(total), static_cast<unsigned long long>(late), worst_ratio,
              static_cast<unsigned long long>(limit_breaches), static_cast<unsigned long long>(saturated))};
}

// ---------------------------------------------------------------------------

Outcome bandit_convergence() {
  const auto t0 = Clock::now();
  tuner::StationaryEnv env;
  const auto run = tuner::run_stationary(env, 5000, 1.0, 99);
  const double freq = tuner::arm_frequency(run, env.best_arm, 4000, 5000);
  double got = 0.0;
  for (int r = 4000; r < 5000; ++r) got += run.rewards[static_cast<std::size_t>(r)];
  const double ratio = got / (env.best_reward * 1000.0);
  const double secs = seconds_since(t0);
  return {freq > 0.90 && ratio >= 0.95 && secs < 120.0,
          fmt("best-arm frequency %.3f over rounds 4000-5000; final-1000 reward %.1f = %.3f of best arm; %.2fs", freq,
              got, ratio, secs)};
}

// ---------------------------------------------------------------------------

Outcome bpr_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> size(3, 8);
  std::uniform_int_distribution<lastmile::Rps> delta(-20000, 40000);
  lastmile::DppParams params;
  params.penalty_weight = 2e-4;
  int conservation_fail = 0, regress = 0;
  for (int i = 0; i < 200; ++i) {
    const auto states = oracle::random_group(rng, size(rng));
    const lastmile::Rps total = delta(rng);
    const auto d = lastmile::bpr_schedule(total, states, params);
    lastmile::Rps sum = 0;
    for (lastmile::Rps x : d.delta_req) sum += x;
    if (sum != total) ++conservation_fail;
    const auto prop = oracle::proportional_split(states, total);
    const double prop_total = lastmile::compute_dpp(states, prop, params).total;
    const double baseline = d.deactivated.empty() ? prop_total : d.total_dpp_before;
    if (d.total_dpp_after > baseline + 1e-9 * std::max(1.0, std::abs(baseline))) ++regress;
  }
  int within = 0;
  double worst_gap = 0.0;
  std::uniform_int_distribution<lastmile::Rps> inc(1000, 20000);
  for (int i = 0; i < 20; ++i) {
    const auto states = oracle::outlier_group(rng);
    const lastmile::Rps total = inc(rng);
    const auto d = lastmile::bpr_schedule(total, states, params);
    const double opt = oracle::grid_optimum(states, total, params, 60);
    const double gap = (d.total_dpp_after - opt) / std::max(std::abs(opt), 1e-12);
    worst_gap = std::max(worst_gap, gap);
    if (gap <= 0.10) ++within;
  }
  const double secs = seconds_since(t0);
  return {conservation_fail == 0 && regress == 0 && within == 20 && secs < 300.0,
          fmt("200 instances: %d conservation failures, %d DPP regressions; 5-node suite: %d/20 within 10%% of grid "
              "optimum (worst gap %.4f); %.2fs",
              conservation_fail, regress, within, worst_gap, secs)};
}

// ---------------------------------------------------------------------------

sim::Scenario stability_scenario() {
  sim::Scenario sc;
  sc.name = "stability-50";
  sc.topology = generate_topology(50, 0.1, 3);
  for (std::size_t i = 0; i < sc.topology.nodes.size(); ++i) {
    sc.topology.nodes[i].cores = i % 3 == 0 ? 16 : (i % 3 == 1 ? 8 : 4);
    sc.topology.nodes[i].access_latency_ms = 5.0 + static_cast<double>(i % 10) * 4.0;
  }
  sc.duration_slots = 2000;
  sc.seed = 2024;
  double capacity = 0.0;
  for (const auto& n : sc.topology.nodes) capacity += sim::node_max_rps(n, sc.cpu);
  sc.workload.base_rps = 0.48 * capacity;
  sc.workload.noise_sigma = 0.05;
  sc.workload.random = {0.01, 1.3, 1.8, 2, 12};
  return sc;
}

Outcome drift_bound() {
  const auto t0 = Clock::now();
  const auto log = sim::run_scenario(stability_scenario());
  const auto report = lastmile::drift_bound_check(log.trajectory);
  const double secs = seconds_since(t0);
  const bool decay = report.last_quarter < 0.5 * report.first_quarter;
  return {report.violations.empty() && decay && log.violations.empty() && secs < 180.0,
          fmt("%zu slots x 50 nodes: %zu bound violations (max excess %.3g, y_max %.3f); max_k E[Q]/t first quarter "
              "%.4g, final quarter %.4g (ratio %.3f); %.2fs",
              report.slots_checked, report.violations.size(), report.max_excess, report.y_max, report.first_quarter,
              report.last_quarter, report.first_quarter > 0 ? report.last_quarter / report.first_quarter : 0.0, secs)};
}

// ---------------------------------------------------------------------------

Outcome carousel_vs_oracle() {
  const auto t0 = Clock::now();
  int below = 0, invalid = 0, exact = 0;
  double ratio_sum = 0.0, worst = 1.0;
  const double theta_a[] = {1.0, 0.5, 0.34};
  for (int i = 0; i < 10; ++i) {
    const std::size_t nodes = 5 + static_cast<std::size_t>(i % 3);  // 8, 10, 12 transformed vertices
    const auto topo = oracle::small_topology(1000 + static_cast<std::uint64_t>(i), nodes, 0.55);
    const int k = 3 + i % 2;
    const auto g = midmile::transform(topo, k, theta_a[i % 3], 1e9);
    const auto s = midmile::carousel_greedy(g, {2, 0.7});
    const auto b = midmile::brute_force_mfpc(g);
    invalid += static_cast<int>(!midmile::validate_solution(g, s).empty() || !midmile::validate_solution(g, b).empty());
    const double ratio = b.flow() == 0 ? 1.0 : static_cast<double>(s.flow()) / b.flow();
    ratio_sum += ratio;
    worst = std::min(worst, ratio);
    below += ratio < 0.9 ? 1 : 0;
    exact += s.flow() == b.flow() ? 1 : 0;
  }
  const double mean = ratio_sum / 10.0;
  const double secs = seconds_since(t0);
  return {below == 0 && mean >= 0.98 && invalid == 0 && secs < 120.0,
          fmt("10 graphs: min F ratio %.3f, mean %.3f, exact matches %d/10, %d invalid solutions; %.2fs", worst, mean,
              exact, invalid, secs)};
}

Outcome grid_scale() {
  const auto topo = generate_topology(50, 0.4, 7);
  const auto g = midmile::transform(topo, 24, 0.05, 1e9);
  const auto result = midmile::grid_search(g, {1, 2, 3}, {0.6, 0.7, 0.8});
  const auto d = midmile::path_diversity(result.best.paths);
  const bool ok = result.elapsed_ms < 60000.0 && d.cos_sim < 0.05 && d.count >= 15 &&
                  midmile::validate_solution(g, result.best).empty();
  return {ok, fmt("50 nodes, density 0.4, 9 cells in %.1f ms; best alpha=%d beta=%.1f PathCnt %d CosSim %.3g",
                  result.elapsed_ms, result.best_params.alpha, result.best_params.beta, d.count, d.cos_sim)};
}

// ---------------------------------------------------------------------------

Outcome telemetry_compression() {
  const auto t0 = Clock::now();
  telemetry::MeshModel model;
  model.seed = 8;
  const auto mesh = telemetry::generate_mesh(model);
  const auto r = telemetry::evaluate_compression(mesh);
  const double secs = seconds_since(t0);
  return {mesh.size() == 1225 && r.ratio <= 0.20 && r.within_tolerance >= 0.95 && secs < 30.0,
          fmt("%zu samples, %zu singular: digest %zu B vs raw %zu B (%.2f%%); %.1f%% of non-singular pairs within 25%%; %.2fs",
              r.samples, r.singular, r.digest_bytes, r.raw_bytes, 100.0 * r.ratio, 100.0 * r.within_tolerance, secs)};
}

// ---------------------------------------------------------------------------

Outcome failover_narrative() {
  const auto t0 = Clock::now();
  const auto sc = sim::load_scenario(scenario("tokyo_failover.json"));
  const auto log = sim::run_scenario(sc);
  const int h = sc.resilience.healthy_probes;
  std::int64_t fail = -1, reroute = -1, improve = -1, recover = -1, revert = -1;
  std::string order, improved_route;
  for (const auto& e : log.events) {
    const auto kind = e.value("event", "");
    const auto slot = e.value("slot", std::int64_t{-1});
    if (kind == "fail" && fail < 0) fail = slot, order += "fail>";
    if (kind == "reroute" && reroute < 0) reroute = slot, order += "reroute>";
    if (kind == "improve" && improve < 0) {
      improve = slot, order += "improve>";
      for (const auto& n : e["route"]) improved_route += n.get<std::string>() + " ";
    }
    if (kind == "recover" && recover < 0) recover = slot, order += "recover>";
    if (kind == "revert" && revert < 0) revert = slot, order += "revert";
  }
  const bool shape = order == "fail>reroute>improve>recover>revert";
  const bool prompt = reroute >= fail && reroute - fail <= 1;
  const bool next_cycle = improve == reroute + 1;
  const bool hysteresis = revert - recover + 1 == h;
  const double secs = seconds_since(t0);
  return {shape && prompt && next_cycle && hysteresis && log.violations.empty() && secs < 60.0,
          fmt("sequence %s; fail@%lld reroute@%lld improve@%lld via [%s] recover@%lld revert@%lld (H=%d); %zu "
              "violations; %.2fs",
              order.c_str(), static_cast<long long>(fail), static_cast<long long>(reroute),
              static_cast<long long>(improve), improved_route.c_str(), static_cast<long long>(recover),
              static_cast<long long>(revert), h, log.violations.size(), secs)};
}

// ---------------------------------------------------------------------------

struct PairedBacklog {
  double peak_with = 0, var_with = 0, peak_without = 0, var_without = 0;
  bool placeholder_wins() const { return peak_with < peak_without && var_with < var_without; }
};

PairedBacklog paired_run(sim::Scenario with) {
  auto without = with;
  without.additions.front().placeholder = false;
  const auto& id = with.additions.front().node.id;
  const auto a = sim::run_scenario(with).backlog_series(id);
  const auto b = sim::run_scenario(without).backlog_series(id);
  return {*std::max_element(a.begin(), a.end()), stats::variance(a), *std::max_element(b.begin(), b.end()),
          stats::variance(b)};
}

Outcome placeholder_ab() {
  const auto t0 = Clock::now();
  const auto sc = sim::load_scenario(scenario("placeholder.json"));
  const auto r = paired_run(sc);
  // Informational: the same pair over other workload seeds.
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto other = sc;
    other.seed = seed;
    wins += paired_run(other).placeholder_wins() ? 1 : 0;
  }
  const double secs = seconds_since(t0);
  return {r.placeholder_wins() && secs < 120.0,
          fmt("seed %llu, new node real backlog with place-holder: peak %.4f var %.5f; zero-init: peak %.4f var %.5f; "
              "place-holder lower on both in %d/20 other seeds; %.2fs",
              static_cast<unsigned long long>(sc.seed), r.peak_with, r.var_with, r.peak_without, r.var_without, wins,
              secs)};
}

Outcome stability_vs_baseline() {
  const auto t0 = Clock::now();
  auto bpr = sim::load_scenario(scenario("constant_load.json"));
  auto greedy = bpr;
  greedy.lastmile.scheduler = "latency_greedy";
  const auto sa = sim::summarize(sim::run_scenario(bpr));
  const auto sb = sim::summarize(sim::run_scenario(greedy));
  const double secs = seconds_since(t0);
  return {sa.mean_cpu_variance < sb.mean_cpu_variance && sa.delivered == sb.delivered && secs < 120.0,
          fmt("mean cross-node cpu variance BPR %.3g vs latency-greedy %.3g; delivered %lld vs %lld; %.2fs",
              sa.mean_cpu_variance, sb.mean_cpu_variance, static_cast<long long>(sa.delivered),
              static_cast<long long>(sb.delivered), secs)};
}

Outcome cost_arithmetic() {
  std::ifstream in(scenario("deployment_50.json"));
  const auto report = cost::cost_report(cost::deployment_from_json(nlohmann::json::parse(in)));
  return {report.compute_hourly.micros == 6600000 && report.compute_hourly.to_string() == "$6.60" &&
              report.node_count == 50,
          fmt("%lld nodes: compute %s/hr (%lld micro-dollars), bandwidth %s, total %s",
              static_cast<long long>(report.node_count), report.compute_hourly.to_string().c_str(),
              static_cast<long long>(report.compute_hourly.micros), report.bandwidth.to_string().c_str(),
              report.total.to_string().c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"codec round-trip", codec_round_trip},
      {"merge-timeout bound", merge_timeout_bound},
      {"bandit convergence", bandit_convergence},
      {"BPR correctness", bpr_correctness},
      {"drift bound and stability", drift_bound},
      {"carousel greedy vs oracle", carousel_vs_oracle},
      {"grid-search scale", grid_scale},
      {"telemetry compression", telemetry_compression},
      {"failover narrative", failover_narrative},
      {"placeholder A/B", placeholder_ab},
      {"stability vs baseline", stability_vs_baseline},
      {"cost arithmetic", cost_arithmetic},
  };
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
