#include "arcturus/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "arcturus/srheader.hpp"
#include "arcturus/stats.hpp"

namespace arcturus::sim {

using lastmile::Rps;

namespace {

constexpr std::uint64_t kProbeStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kSpikeStream = 0xc2b2ae3d27d4eb4fULL;

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key, e.what());
  }
}

resilience::FailureEvent parse_target(const std::string& target, const std::string& where) {
  resilience::FailureEvent e;
  if (target.rfind("node:", 0) == 0) {
    e.kind = resilience::FailureEvent::Kind::Node;
    e.a = target.substr(5);
  } else if (target.rfind("link:", 0) == 0) {
    const auto body = target.substr(5);
    const auto sep = body.find('>');
    if (sep == std::string::npos) throw UnknownTarget(where, target);
    e.kind = resilience::FailureEvent::Kind::Link;
    e.a = body.substr(0, sep);
    e.b = body.substr(sep + 1);
  } else {
    throw UnknownTarget(where, target);
  }
  return e;
}

std::string route_string(const resilience::Route& r) {
  std::string out;
  for (const auto& n : r) out += (out.empty() ? "" : ">") + n;
  return out;
}

struct Member {
  lastmile::NodeSchedState state;
  CpuGroundTruth truth;
};

sr::HopAddress hop_address(std::size_t node_index) {
  return {0x0A000000u | static_cast<std::uint32_t>(node_index + 1), 443};
}

// Carries one sub-request along `route` through the segment-routing codec;
// returns false if any hop disagrees with the route.
bool forward_along(const Topology& topo, const resilience::Route& route, std::uint64_t packet_id) {
  sr::SegmentHeader header;
  header.packet_id = packet_id;
  for (std::size_t i = 1; i < route.size(); ++i) header.hop_list.push_back(hop_address(*topo.index_of(route[i])));
  header.hop_counts = static_cast<std::uint8_t>(header.hop_list.size());
  const sr::SubRequest req{packet_id, sr::Bytes{'r', 'e', 'q'}};
  sr::Bytes wire = sr::encode_packet(header, sr::build_frame(std::span(&req, 1)));
  for (std::size_t at = 0;; ++at) {
    const auto decoded = sr::decode_packet(wire);
    auto [action, advanced] = sr::next_hop(decoded.header);
    if (std::holds_alternative<sr::Egress>(action)) return at + 1 == route.size();
    if (at + 1 >= route.size() || std::get<sr::ForwardTo>(action).next != hop_address(*topo.index_of(route[at + 1])))
      return false;
    wire = sr::encode_packet(advanced, decoded.frame);
  }
}

}  // namespace

void WorkloadProfile::validate() const {
  if (!(base_rps >= 0)) throw ConfigError("workload.base_rps", "must be nonnegative");
  if (!(diurnal_amplitude >= 0 && diurnal_amplitude <= 1)) throw ConfigError("workload.diurnal_amplitude", "must lie in [0, 1]");
  if (!(diurnal_period_slots > 0)) throw ConfigError("workload.diurnal_period_slots", "must be positive");
  if (!(noise_sigma >= 0)) throw ConfigError("workload.noise_sigma", "must be nonnegative");
  for (const auto& s : spikes)
    if (!(s.multiplier >= 0) || s.duration < 1) throw ConfigError("workload.spikes", "multiplier >= 0 and duration >= 1 required");
  if (!(random.rate >= 0 && random.rate <= 1)) throw ConfigError("workload.random_spikes.rate", "must lie in [0, 1]");
  if (random.min_multiplier > random.max_multiplier || random.min_duration < 1 || random.min_duration > random.max_duration)
    throw ConfigError("workload.random_spikes", "ranges must be ordered and durations >= 1");
}

std::vector<double> generate_workload(const WorkloadProfile& p, std::uint64_t seed, std::size_t slots) {
  p.validate();
  std::mt19937_64 noise_rng(seed);
  std::mt19937_64 spike_rng(seed ^ kSpikeStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> mult(p.random.min_multiplier, p.random.max_multiplier);
  std::uniform_int_distribution<std::int64_t> dur(p.random.min_duration, p.random.max_duration);

  std::vector<double> out(slots, 0.0);
  double random_mult = 1.0;
  std::int64_t random_left = 0;
  for (std::size_t t = 0; t < slots; ++t) {
    const double z = normal(noise_rng);
    const double u = unit(spike_rng);
    const double m = mult(spike_rng);
    const std::int64_t d = dur(spike_rng);
    if (random_left == 0 && p.random.rate > 0 && u < p.random.rate) {
      random_mult = m;
      random_left = d;
    }
    double value = p.base_rps * (1.0 + p.diurnal_amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                                                                      p.diurnal_period_slots));
    if (p.noise_sigma > 0) value *= std::exp(p.noise_sigma * z - 0.5 * p.noise_sigma * p.noise_sigma);
    if (random_left > 0) {
      value *= random_mult;
      --random_left;
    }
    for (const auto& s : p.spikes)
      if (static_cast<std::int64_t>(t) >= s.slot && static_cast<std::int64_t>(t) < s.slot + s.duration) value *= s.multiplier;
    out[t] = std::max(0.0, value);
  }
  return out;
}

double CpuGroundTruth::cpu(double rps) const {
  if (rps <= 0) return idle;
  const double knee1 = 0.6 * max_rps, knee2 = 0.8 * max_rps;
  double c;
  if (rps <= knee1)
    c = idle + (0.6 - idle) * rps / knee1;
  else if (rps <= knee2)
    c = 0.6 + 0.2 * (rps - knee1) / (knee2 - knee1);
  else
    c = 0.8 + 0.2 * std::min(1.0, (rps - knee2) / (max_rps - knee2));
  return std::clamp(c, 0.0, 1.0);
}

double node_max_rps(const NodeSpec& node, const CpuProfile& profile) {
  return node.max_rps > 0 ? node.max_rps : profile.rps_per_core * node.cores;
}

void Scenario::validate() const {
  if (duration_slots < 0) throw ConfigError("duration_slots", "must be nonnegative");
  if (slot_ms <= 0) throw ConfigError("slot_ms", "must be positive");
  for (const auto& msg : validate_topology(topology)) throw ConfigError("topology", msg);
  workload.validate();
  lastmile.params.validate();
  lastmile.cpu_model.validate();
  telemetry.partition.validate();
  resilience.validate();
  if (lastmile.scheduler != "bpr" && lastmile.scheduler != "latency_greedy")
    throw ConfigError("lastmile.scheduler", "must be \"bpr\" or \"latency_greedy\", got \"" + lastmile.scheduler + "\"");
  if (!(cpu.idle >= 0 && cpu.idle < 0.6)) throw ConfigError("cpu.idle", "must lie in [0, 0.6)");
  if (!(cpu.rps_per_core > 0)) throw ConfigError("cpu.rps_per_core", "must be positive");

  std::set<NodeId> known;
  for (const auto& n : topology.nodes) known.insert(n.id);
  for (const auto& a : additions) {
    if (!known.insert(a.node.id).second) throw ConfigError("node_additions", "duplicate node id " + a.node.id);
    if (a.slot < 0) throw ConfigError("node_additions." + a.node.id, "slot must be nonnegative");
  }
  for (const auto& a : additions)
    for (const auto& arc : a.arcs)
      if (!known.contains(arc.src) || !known.contains(arc.dst))
        throw ConfigError("node_additions." + a.node.id, "arc references unknown node");
  for (const auto& id : lastmile.group)
    if (!known.contains(id)) throw ConfigError("lastmile.group", "unknown node " + id);
  for (std::size_t i = 0; i < failures.size(); ++i) {
    const auto& e = failures[i].event;
    const std::string where = "failures[" + std::to_string(i) + "]";
    if (!known.contains(e.a)) throw UnknownTarget(where, e.describe());
    if (e.kind == resilience::FailureEvent::Kind::Link) {
      bool found = std::any_of(topology.arcs.begin(), topology.arcs.end(),
                               [&](const Arc& a) { return a.src == e.a && a.dst == e.b; });
      for (const auto& add : additions)
        for (const auto& arc : add.arcs) found = found || (arc.src == e.a && arc.dst == e.b);
      if (!found) throw UnknownTarget(where, e.describe());
    }
    if (failures[i].duration_slots < 1) throw ConfigError(where, "duration_slots must be >= 1");
  }
  for (const auto& f : flows) {
    if (!topology.find(f.ingress)) throw ConfigError("flows." + f.id, "unknown ingress " + f.ingress);
    if (!(f.rps >= 0)) throw ConfigError("flows." + f.id, "rps must be nonnegative");
  }
  if (midmile.enabled) {
    if (!topology.source || !topology.sink) throw ConfigError("midmile", "topology needs source and sink");
    if (midmile.k < 0 || midmile.every < 1) throw ConfigError("midmile", "k >= 0 and every >= 1 required");
    midmile.carousel.validate();
  }
}

Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("scenario", "must be a JSON object");
  Scenario sc;
  sc.name = get_or<std::string>(j, "name", sc.name, "scenario");
  if (!j.contains("topology")) throw ConfigError("topology", "missing");
  const auto& topo = j["topology"];
  if (topo.is_string()) {
    std::filesystem::path p = topo.get<std::string>();
    sc.topology = load_topology(p.is_absolute() ? p : base_dir / p);
  } else if (topo.is_object() && topo.contains("generate")) {
    const auto& g = topo["generate"];
    sc.topology = generate_topology(get_or<std::size_t>(g, "nodes", 10, "topology.generate"),
                                    get_or<double>(g, "density", 0.4, "topology.generate"),
                                    get_or<std::uint64_t>(g, "seed", 1, "topology.generate"));
    const int cores = get_or<int>(g, "cores", 8, "topology.generate");
    for (auto& n : sc.topology.nodes) n.cores = cores;
    if (g.contains("access_latency_ms")) {
      const auto range = g["access_latency_ms"].get<std::vector<double>>();
      std::mt19937_64 rng(get_or<std::uint64_t>(g, "seed", 1, "topology.generate") ^ kProbeStream);
      std::uniform_real_distribution<double> d(range.at(0), range.at(1));
      for (auto& n : sc.topology.nodes) n.access_latency_ms = d(rng);
    }
  } else {
    sc.topology = topology_from_json(topo);
  }
  sc.duration_slots = get_or<std::int64_t>(j, "duration_slots", 0, "scenario");
  sc.seed = get_or<std::uint64_t>(j, "seed", sc.seed, "scenario");
  sc.slot_ms = get_or<std::int64_t>(j, "slot_ms", sc.slot_ms, "scenario");

  if (j.contains("workload")) {
    const auto& w = j["workload"];
    sc.workload.base_rps = get_or<double>(w, "base_rps", 0.0, "workload");
    sc.workload.diurnal_amplitude = get_or<double>(w, "diurnal_amplitude", 0.0, "workload");
    sc.workload.diurnal_period_slots = get_or<double>(w, "diurnal_period_slots", 17280.0, "workload");
    sc.workload.noise_sigma = get_or<double>(w, "noise_sigma", 0.0, "workload");
    for (const auto& s : w.value("spikes", nlohmann::json::array()))
      sc.workload.spikes.push_back({get_or<std::int64_t>(s, "slot", 0, "workload.spikes"),
                                    get_or<double>(s, "multiplier", 1.0, "workload.spikes"),
                                    get_or<std::int64_t>(s, "duration", 1, "workload.spikes")});
    if (w.contains("random_spikes")) {
      const auto& r = w["random_spikes"];
      auto& rs = sc.workload.random;
      rs.rate = get_or<double>(r, "rate", rs.rate, "workload.random_spikes");
      rs.min_multiplier = get_or<double>(r, "min_multiplier", rs.min_multiplier, "workload.random_spikes");
      rs.max_multiplier = get_or<double>(r, "max_multiplier", rs.max_multiplier, "workload.random_spikes");
      rs.min_duration = get_or<std::int64_t>(r, "min_duration", rs.min_duration, "workload.random_spikes");
      rs.max_duration = get_or<std::int64_t>(r, "max_duration", rs.max_duration, "workload.random_spikes");
    }
  }
  if (j.contains("cpu")) {
    sc.cpu.idle = get_or<double>(j["cpu"], "idle", sc.cpu.idle, "cpu");
    sc.cpu.rps_per_core = get_or<double>(j["cpu"], "rps_per_core", sc.cpu.rps_per_core, "cpu");
  }
  if (j.contains("lastmile")) {
    const auto& l = j["lastmile"];
    sc.lastmile.scheduler = get_or<std::string>(l, "scheduler", sc.lastmile.scheduler, "lastmile");
    if (l.contains("params")) {
      sc.lastmile.params = lastmile::dpp_params_from_json(l["params"]);
      sc.lastmile.penalty_given = l["params"].contains("V");
    }
    if (l.contains("cpu_model")) sc.lastmile.cpu_model = lastmile::cpu_model_from_json(l["cpu_model"]);
    sc.lastmile.calibrate = get_or<bool>(l, "calibrate", true, "lastmile");
    sc.lastmile.group = get_or<std::vector<NodeId>>(l, "group", {}, "lastmile");
  }
  if (j.contains("midmile")) {
    const auto& m = j["midmile"];
    sc.midmile.enabled = get_or<bool>(m, "enabled", true, "midmile");
    sc.midmile.k = get_or<int>(m, "k", sc.midmile.k, "midmile");
    sc.midmile.theta_a = get_or<double>(m, "theta_a", sc.midmile.theta_a, "midmile");
    sc.midmile.theta_l = get_or<double>(m, "theta_l", 1e18, "midmile");
    sc.midmile.carousel.alpha = get_or<int>(m, "alpha", sc.midmile.carousel.alpha, "midmile");
    sc.midmile.carousel.beta = get_or<double>(m, "beta", sc.midmile.carousel.beta, "midmile");
    sc.midmile.every = get_or<std::int64_t>(m, "every", sc.midmile.every, "midmile");
  }
  if (j.contains("telemetry")) {
    const auto& t = j["telemetry"];
    sc.telemetry.partition.k_neighbors = get_or<int>(t, "k_neighbors", 5, "telemetry");
    sc.telemetry.partition.dist_multiplier = get_or<double>(t, "dist_multiplier", 3.0, "telemetry");
    sc.telemetry.jitter_sigma = get_or<double>(t, "jitter_sigma", sc.telemetry.jitter_sigma, "telemetry");
  }
  if (j.contains("resilience")) {
    const auto& r = j["resilience"];
    sc.resilience.theta_l = get_or<double>(r, "theta_l", sc.resilience.theta_l, "resilience");
    sc.resilience.load_threshold = get_or<double>(r, "load_threshold", sc.resilience.load_threshold, "resilience");
    sc.resilience.n_backups = get_or<int>(r, "n_backups", sc.resilience.n_backups, "resilience");
    sc.resilience.healthy_probes = get_or<int>(r, "healthy_probes", sc.resilience.healthy_probes, "resilience");
    sc.load_share = get_or<std::map<NodeId, std::map<std::string, double>>>(r, "load_share", {}, "resilience");
  }
  for (const auto& f : j.value("flows", nlohmann::json::array())) {
    try {
      sc.flows.push_back({f.at("id").get<std::string>(), f.at("ingress").get<std::string>(),
                          f.at("dest_region").get<std::string>(), f.value("rps", 0.0)});
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("flows", e.what());
    }
  }
  const auto failures = j.value("failures", nlohmann::json::array());
  for (std::size_t i = 0; i < failures.size(); ++i) {
    const std::string where = "failures[" + std::to_string(i) + "]";
    const auto& f = failures[i];
    FailureSpec spec;
    spec.event = parse_target(get_or<std::string>(f, "target", "", where), where);
    spec.start_slot = get_or<std::int64_t>(f, "start_slot", 0, where);
    spec.duration_slots = get_or<std::int64_t>(f, "duration_slots", 1, where);
    sc.failures.push_back(std::move(spec));
  }
  for (const auto& a : j.value("node_additions", nlohmann::json::array())) {
    NodeAddition add;
    nlohmann::json wrapper = {{"nodes", {a.at("node")}}, {"arcs", a.value("arcs", nlohmann::json::array())}};
    const auto parsed = topology_from_json(wrapper);
    add.node = parsed.nodes.front();
    add.arcs = parsed.arcs;
    add.slot = get_or<std::int64_t>(a, "slot", 0, "node_additions");
    add.placeholder = get_or<bool>(a, "placeholder", true, "node_additions");
    sc.additions.push_back(std::move(add));
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open scenario file");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string(), e.what());
  }
  try {
    return scenario_from_json(j, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string(), e.what());
  }
}

MetricsLog run_scenario(const Scenario& sc) {
  sc.validate();
  MetricsLog log;
  log.trajectory.theta = sc.lastmile.params.theta;
  Topology topo = sc.topology;
  const auto trace = generate_workload(sc.workload, sc.seed, static_cast<std::size_t>(sc.duration_slots));
  std::mt19937_64 probe_rng(sc.seed ^ kProbeStream);
  const double sigma = sc.telemetry.jitter_sigma;
  std::lognormal_distribution<double> jitter(-0.5 * sigma * sigma, sigma > 0 ? sigma : 1.0);

  lastmile::DppParams params = sc.lastmile.params;
  auto make_member = [&](const NodeSpec& spec, double placeholder) {
    Member m;
    m.truth = {sc.cpu.idle, node_max_rps(spec, sc.cpu)};
    m.state.id = spec.id;
    m.state.cores = spec.cores;
    m.state.queue = lastmile::VirtualQueue::with_placeholder(spec.cores, placeholder);
    m.state.cpu_onset = sc.cpu.idle;
    m.state.delay_ms = spec.access_latency_ms;
    m.state.cpu_model = sc.lastmile.cpu_model;
    if (sc.lastmile.calibrate) {
      const auto truth = m.truth;
      m.state.cpu_model.calibration = lastmile::fit_calibration(
          m.state.cpu_model, [truth](double r) { return truth.cpu(r); }, truth.max_rps);
    }
    return m;
  };
  std::vector<Member> group;
  for (const auto& n : topo.nodes)
    if (sc.lastmile.group.empty() ||
        std::find(sc.lastmile.group.begin(), sc.lastmile.group.end(), n.id) != sc.lastmile.group.end())
      group.push_back(make_member(n, 0.0));
  if (!sc.lastmile.penalty_given && !group.empty()) {
    std::vector<lastmile::NodeSchedState> states;
    for (const auto& m : group) states.push_back(m.state);
    params.penalty_weight = lastmile::default_penalty_weight(states, params.theta);
  }

  auto event = [&](std::int64_t slot, const std::string& kind, nlohmann::json extra) {
    extra["slot"] = slot;
    extra["t_ms"] = slot * sc.slot_ms;
    extra["event"] = kind;
    log.events.push_back(std::move(extra));
  };

  telemetry::Digest digest;
  telemetry::ControllerState controller;
  resilience::NetworkView view{&topo, &digest, {}, sc.load_share};
  resilience::FailoverEngine engine(sc.resilience);
  for (const auto& f : sc.flows) {
    resilience::Flow flow;
    flow.id = f.id;
    flow.ingress = f.ingress;
    flow.dest_region = f.dest_region;
    flow.rps = f.rps;
    engine.add_flow(std::move(flow), view, 0);
  }

  resilience::FailureSet prev_failed;
  int midmile_paths = 0;
  double midmile_cos = 0.0;

  for (std::int64_t t = 0; t < sc.duration_slots; ++t) {
    SlotRecord rec;
    rec.slot = t;

    for (const auto& add : sc.additions) {
      if (add.slot != t) continue;
      std::vector<double> backlogs;
      for (const auto& m : group)
        if (m.state.active) backlogs.push_back(m.state.queue.actual());
      const double q0 = add.placeholder ? lastmile::init_placeholder(backlogs) : 0.0;
      topo.nodes.push_back(add.node);
      topo.arcs.insert(topo.arcs.end(), add.arcs.begin(), add.arcs.end());
      group.push_back(make_member(add.node, q0));
      event(t, "node_added", {{"node", add.node.id}, {"backlog", q0}, {"placeholder", add.placeholder}});
    }

    resilience::FailureSet failed;
    for (const auto& f : sc.failures) {
      if (!f.active_at(t)) continue;
      if (f.event.kind == resilience::FailureEvent::Kind::Node)
        failed.nodes.insert(f.event.a);
      else
        failed.links.insert({f.event.a, f.event.b});
    }
    std::vector<resilience::FailureEvent> detected;
    for (const auto& n : failed.nodes)
      if (!prev_failed.nodes.contains(n)) detected.push_back({resilience::FailureEvent::Kind::Node, n, {}});
    for (const auto& l : failed.links)
      if (!prev_failed.links.contains(l)) detected.push_back({resilience::FailureEvent::Kind::Link, l.first, l.second});
    for (const auto& n : prev_failed.nodes)
      if (!failed.nodes.contains(n)) event(t, "recover", {{"target", "node " + n}});
    for (const auto& l : prev_failed.links)
      if (!failed.links.contains(l)) event(t, "recover", {{"target", "link " + l.first + ">" + l.second}});

    // Probes: failed elements time out, the rest return jittered latencies.
    std::map<resilience::Link, double> probe;
    std::map<NodeId, std::vector<telemetry::Sample>> by_src;
    for (const auto& arc : topo.arcs) {
      const double j = jitter(probe_rng);
      if (failed.nodes.contains(arc.src) || failed.nodes.contains(arc.dst) || failed.links.contains({arc.src, arc.dst})) {
        ++rec.probe_timeouts;
        continue;
      }
      const double latency = arc.latency_ms * (sigma > 0 ? j : 1.0);
      probe[{arc.src, arc.dst}] = latency;
      by_src[arc.src].push_back({arc.src, arc.dst, latency, t});
    }
    std::vector<telemetry::Digest> proxy_digests;
    for (const auto& [src, samples] : by_src) {
      proxy_digests.push_back(telemetry::compress(samples, sc.telemetry.partition));
      rec.raw_bytes += telemetry::serialize_raw(samples).size();
      rec.digest_bytes += telemetry::serialize_digest(proxy_digests.back()).size();
    }
    controller.slot = t;
    if (!proxy_digests.empty()) {
      auto synced = telemetry::sync_round(proxy_digests, controller);
      digest = std::move(synced.broadcast);
      for (const auto& w : synced.warnings) event(t, "stale_digest", {{"detail", w}});
    }

    view.failed = failed;
    auto record_actions = [&](const std::vector<resilience::Action>& actions) {
      for (const auto& a : actions) log.events.push_back(resilience::to_json(a, sc.slot_ms));
    };
    for (const auto& e : detected) {
      event(t, "fail", {{"target", e.describe()}});
      record_actions(engine.on_failure(e, view, t));
    }
    record_actions(engine.on_probe(view, t));
    record_actions(engine.on_cycle(view, t));

    // Last mile.
    rec.arrivals = static_cast<Rps>(std::llround(trace[static_cast<std::size_t>(t)]));
    std::vector<lastmile::NodeSchedState> states;
    Rps onset_sum = 0;
    for (auto& m : group) {
      m.state.active = !failed.nodes.contains(m.state.id);
      if (!m.state.active) {
        m.state.req_onset = 0;
        m.state.cpu_onset = sc.cpu.idle;
      }
      onset_sum += m.state.req_onset;
      states.push_back(m.state);
    }
    lastmile::ScheduleDecision decision;
    const bool any_active = std::any_of(states.begin(), states.end(), [](const auto& s) { return s.active; });
    std::vector<Rps> req_new(group.size(), 0);
    if (any_active) {
      decision = sc.lastmile.scheduler == "bpr" ? lastmile::bpr_schedule(rec.arrivals - onset_sum, states, params)
                                                : lastmile::latency_greedy_schedule(rec.arrivals - onset_sum, states, params);
      for (std::size_t k = 0; k < group.size(); ++k) req_new[k] = states[k].req_onset + decision.delta_req[k];
      rec.total_dpp = decision.total_dpp_after;
    } else {
      rec.dropped_no_node = rec.arrivals;
      decision.delta_req.assign(group.size(), 0);
      decision.v_after.assign(group.size(), 0.0);
    }
    std::vector<double> cpu_now(group.size());
    std::vector<double> active_cpu;
    for (std::size_t k = 0; k < group.size(); ++k) {
      const auto& m = group[k];
      cpu_now[k] = m.state.active ? m.truth.cpu(static_cast<double>(req_new[k])) : sc.cpu.idle;
      const Rps capacity = static_cast<Rps>(std::floor(m.truth.max_rps));
      const Rps served = std::min(req_new[k], capacity);
      rec.delivered += served;
      rec.dropped_overload += req_new[k] - served;
      if (m.state.active) active_cpu.push_back(cpu_now[k]);
      if (cpu_now[k] < 0 || cpu_now[k] > 1)
        log.violations.push_back("slot " + std::to_string(t) + ": cpu of " + m.state.id + " outside [0, 1]");
    }
    rec.mean_cpu = stats::mean(active_cpu);
    rec.cpu_variance = stats::variance(active_cpu);

    // Mid mile.
    if (sc.midmile.enabled && t % sc.midmile.every == 0) {
      Topology live;
      live.source = topo.source;
      live.sink = topo.sink;
      for (const auto& n : topo.nodes)
        if (!failed.nodes.contains(n.id)) live.nodes.push_back(n);
      for (const auto& a : topo.arcs)
        if (!failed.nodes.contains(a.src) && !failed.nodes.contains(a.dst) && !failed.links.contains({a.src, a.dst}))
          live.arcs.push_back({a.src, a.dst, probe.count({a.src, a.dst}) ? probe[{a.src, a.dst}] : a.latency_ms});
      midmile_paths = 0;
      midmile_cos = 0.0;
      if (live.find(*live.source) && live.find(*live.sink)) {
        const auto g = midmile::transform(live, sc.midmile.k, sc.midmile.theta_a, sc.midmile.theta_l);
        const auto solution = midmile::carousel_greedy(g, sc.midmile.carousel);
        for (const auto& msg : midmile::validate_solution(g, solution))
          log.violations.push_back("slot " + std::to_string(t) + ": midmile " + msg);
        const auto d = midmile::path_diversity(solution.paths);
        midmile_paths = d.count;
        midmile_cos = d.cos_sim;
      }
    }
    rec.midmile_paths = midmile_paths;
    rec.midmile_cos = midmile_cos;

    // Flow forwarding.
    std::uint64_t packet = static_cast<std::uint64_t>(t) << 20;
    for (const auto& flow : engine.flows()) {
      rec.flow_admitted += flow.rps;
      FlowRecord fr{t, flow.id, resilience::to_string(flow.mode), -1.0, route_string(flow.active)};
      if (flow.active.empty()) {
        rec.flow_dropped_no_route += flow.rps;
        fr.mode = "degraded";
        log.flows.push_back(std::move(fr));
        continue;
      }
      if (failed.crosses(flow.active))
        log.violations.push_back("slot " + std::to_string(t) + ": flow " + flow.id + " crosses a failed element");
      if (!forward_along(topo, flow.active, ++packet))
        log.violations.push_back("slot " + std::to_string(t) + ": flow " + flow.id + " misrouted");
      double latency = 0.0;
      for (std::size_t i = 0; i + 1 < flow.active.size(); ++i) {
        const auto it = probe.find({flow.active[i], flow.active[i + 1]});
        if (it != probe.end()) latency += it->second;
      }
      fr.latency_ms = latency;
      rec.flow_delivered += flow.rps;
      log.flows.push_back(std::move(fr));
    }

    // Queue updates on the actual CPU.
    lastmile::TrajectorySlot traj;
    for (std::size_t k = 0; k < group.size(); ++k) {
      auto& m = group[k];
      const double delta_cpu = cpu_now[k] - m.state.cpu_onset;
      const auto next = lastmile::update_queue(m.state.queue, m.state.cpu_onset, delta_cpu, params.theta);
      traj.weight.push_back(m.state.queue.weight);
      traj.backlog.push_back(m.state.queue.actual());
      traj.backlog_next.push_back(next.actual());
      traj.cpu_onset.push_back(m.state.cpu_onset);
      traj.delta_cpu.push_back(delta_cpu);
      log.nodes.push_back({t, m.state.id, m.state.active, cpu_now[k], req_new[k], decision.delta_req[k],
                           m.state.queue.actual(), k < decision.v_after.size() ? decision.v_after[k] : 0.0});
      m.state.queue = next;
      m.state.cpu_onset = cpu_now[k];
      m.state.req_onset = req_new[k];
    }
    log.trajectory.slots.push_back(std::move(traj));

    if (rec.arrivals != rec.delivered + rec.dropped_overload + rec.dropped_no_node)
      log.violations.push_back("slot " + std::to_string(t) + ": request conservation");
    if (std::abs(rec.flow_admitted - rec.flow_delivered - rec.flow_dropped_no_route) > 1e-6)
      log.violations.push_back("slot " + std::to_string(t) + ": flow conservation");
    log.slots.push_back(rec);
    prev_failed = std::move(failed);
  }
  return log;
}

std::string MetricsLog::nodes_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "slot,node,active,cpu,rps,delta_req,backlog,v_dpp\n";
  for (const auto& n : nodes)
    os << n.slot << ',' << n.node << ',' << (n.active ? 1 : 0) << ',' << n.cpu << ',' << n.rps << ',' << n.delta_req
       << ',' << n.backlog << ',' << n.v_dpp << '\n';
  return os.str();
}

std::string MetricsLog::slots_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "slot,arrivals,delivered,dropped_overload,dropped_no_node,flow_admitted,flow_delivered,"
        "flow_dropped_no_route,mean_cpu,cpu_variance,total_dpp,midmile_paths,midmile_cos,probe_timeouts,"
        "raw_bytes,digest_bytes\n";
  for (const auto& s : slots)
    os << s.slot << ',' << s.arrivals << ',' << s.delivered << ',' << s.dropped_overload << ',' << s.dropped_no_node
       << ',' << s.flow_admitted << ',' << s.flow_delivered << ',' << s.flow_dropped_no_route << ',' << s.mean_cpu
       << ',' << s.cpu_variance << ',' << s.total_dpp << ',' << s.midmile_paths << ',' << s.midmile_cos << ','
       << s.probe_timeouts << ',' << s.raw_bytes << ',' << s.digest_bytes << '\n';
  return os.str();
}

std::string MetricsLog::flows_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "slot,flow,mode,latency_ms,route\n";
  for (const auto& f : flows) os << f.slot << ',' << f.flow << ',' << f.mode << ',' << f.latency_ms << ',' << f.route << '\n';
  return os.str();
}

std::string MetricsLog::events_jsonl() const {
  std::string out;
  for (const auto& e : events) out += e.dump() + '\n';
  return out;
}

std::vector<double> MetricsLog::backlog_series(const NodeId& node) const {
  std::vector<double> out;
  for (const auto& n : nodes)
    if (n.node == node) out.push_back(n.backlog);
  return out;
}

RunSummary summarize(const MetricsLog& log) {
  RunSummary s;
  std::vector<double> cpu, latency, variance;
  for (const auto& n : log.nodes) {
    if (n.active) cpu.push_back(n.cpu);
    s.max_backlog = std::max(s.max_backlog, n.backlog);
  }
  for (const auto& f : log.flows)
    if (f.latency_ms >= 0) latency.push_back(f.latency_ms);
  for (const auto& r : log.slots) {
    variance.push_back(r.cpu_variance);
    s.delivered += r.delivered;
  }
  for (const auto& e : log.events)
    if (e.value("event", "") == "reroute") ++s.failovers;
  s.mean_cpu = stats::mean(cpu);
  s.p50_latency_ms = stats::quantile(latency, 0.5);
  s.p95_latency_ms = stats::quantile(latency, 0.95);
  s.violations = log.violations.size();
  s.mean_cpu_variance = stats::mean(variance);
  return s;
}

nlohmann::json to_json(const RunSummary& s) {
  return {{"schema_version", MetricsLog::kSchemaVersion},
          {"mean_cpu", s.mean_cpu},
          {"p50_latency_ms", s.p50_latency_ms},
          {"p95_latency_ms", s.p95_latency_ms},
          {"max_backlog", s.max_backlog},
          {"failovers", s.failovers},
          {"violations", s.violations},
          {"mean_cpu_variance", s.mean_cpu_variance},
          {"delivered", s.delivered}};
}

void write_metrics(const MetricsLog& log, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto write = [&](const char* name, const std::string& body) {
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) throw ConfigError((out_dir / name).string(), "cannot write output file");
    out << body;
  };
  write("nodes.csv", log.nodes_csv());
  write("slots.csv", log.slots_csv());
  write("flows.csv", log.flows_csv());
  write("events.jsonl", log.events_jsonl());
  auto summary = to_json(summarize(log));
  summary["violation_messages"] = log.violations;
  write("summary.json", summary.dump(2) + "\n");
}

}  // namespace arcturus::sim
