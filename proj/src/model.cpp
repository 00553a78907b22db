#include "arcturus/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "arcturus/error.hpp"

namespace arcturus {

std::optional<std::size_t> Topology::index_of(const NodeId& id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  return std::nullopt;
}

const NodeSpec* Topology::find(const NodeId& id) const {
  auto idx = index_of(id);
  return idx ? &nodes[*idx] : nullptr;
}

std::vector<std::string> validate_topology(const Topology& topo) {
  std::vector<std::string> violations;
  std::set<NodeId> ids;
  for (const auto& n : topo.nodes) {
    if (!ids.insert(n.id).second) violations.push_back("duplicate node id '" + n.id + "'");
    if (n.cores < 1) violations.push_back("node '" + n.id + "' has cores < 1");
    if (n.cost_per_hour < 0) violations.push_back("node '" + n.id + "' has negative cost_per_hour");
    if (n.processing_latency_ms < 0 || n.access_latency_ms < 0)
      violations.push_back("node '" + n.id + "' has negative latency");
    if (n.max_rps < 0) violations.push_back("node '" + n.id + "' has negative max_rps");
  }
  for (const auto& a : topo.arcs) {
    const std::string name = "arc " + a.src + "->" + a.dst;
    if (!ids.contains(a.src) || !ids.contains(a.dst))
      violations.push_back(name + " references an unknown node");
    if (a.src == a.dst) violations.push_back(name + " is a self-loop");
    if (!(a.latency_ms >= 0)) violations.push_back(name + " has negative latency");
  }
  if (topo.source && !ids.contains(*topo.source))
    violations.push_back("source '" + *topo.source + "' is not a node");
  if (topo.sink && !ids.contains(*topo.sink))
    violations.push_back("sink '" + *topo.sink + "' is not a node");
  return violations;
}

nlohmann::json to_json(const Topology& topo) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : topo.nodes) {
    j["nodes"].push_back({{"id", n.id},
                          {"cores", n.cores},
                          {"region", n.region},
                          {"tier", n.tier},
                          {"cost_per_hour", n.cost_per_hour},
                          {"processing_latency_ms", n.processing_latency_ms},
                          {"access_latency_ms", n.access_latency_ms},
                          {"max_rps", n.max_rps}});
  }
  j["arcs"] = nlohmann::json::array();
  for (const auto& a : topo.arcs) {
    j["arcs"].push_back({{"src", a.src}, {"dst", a.dst}, {"latency_ms", a.latency_ms}});
  }
  if (topo.source) j["source"] = *topo.source;
  if (topo.sink) j["sink"] = *topo.sink;
  return j;
}

Topology topology_from_json(const nlohmann::json& j) {
  Topology topo;
  try {
    for (const auto& n : j.at("nodes")) {
      NodeSpec spec;
      spec.id = n.at("id").get<std::string>();
      spec.cores = n.value("cores", 1);
      spec.region = n.value("region", std::string{});
      spec.tier = n.value("tier", std::string{});
      spec.cost_per_hour = n.value("cost_per_hour", 0.0);
      spec.processing_latency_ms = n.value("processing_latency_ms", 0.0);
      spec.access_latency_ms = n.value("access_latency_ms", 0.0);
      spec.max_rps = n.value("max_rps", 0.0);
      topo.nodes.push_back(std::move(spec));
    }
    for (const auto& a : j.value("arcs", nlohmann::json::array())) {
      topo.arcs.push_back({a.at("src").get<std::string>(), a.at("dst").get<std::string>(),
                           a.at("latency_ms").get<double>()});
      if (a.value("bidirectional", false))
        topo.arcs.push_back({topo.arcs.back().dst, topo.arcs.back().src, topo.arcs.back().latency_ms});
    }
    if (j.contains("source")) topo.source = j["source"].get<std::string>();
    if (j.contains("sink")) topo.sink = j["sink"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("topology", e.what());
  }
  return topo;
}

std::string serialize_topology(const Topology& topo) { return to_json(topo).dump(2); }

Topology parse_topology(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("topology", e.what());
  }
  auto topo = topology_from_json(j);
  if (const auto issues = validate_topology(topo); !issues.empty()) throw ConfigError("topology", issues.front());
  return topo;
}

Topology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open topology file");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_topology(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string(), e.what());
  }
}

void save_topology(const Topology& topo, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path.string(), "cannot write topology file");
  out << serialize_topology(topo) << '\n';
}

Topology generate_topology(std::size_t count, double density, std::uint64_t seed) {
  static const char* kRegions[] = {"na-west", "na-east", "sa", "eu", "me", "apac", "oceania"};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, 1000.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Topology topo;
  std::vector<std::pair<double, double>> pos;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = coord(rng);
    const double y = coord(rng);
    pos.emplace_back(x, y);
    NodeSpec n;
    n.id = "n" + std::to_string(i);
    n.cores = 8;
    n.region = kRegions[static_cast<std::size_t>(x / 1000.0 * 7.0) % 7];
    n.tier = "tier2";
    n.cost_per_hour = 0.132;
    topo.nodes.push_back(std::move(n));
  }
  auto dist = [&](std::size_t a, std::size_t b) {
    return std::hypot(pos[a].first - pos[b].first, pos[a].second - pos[b].second);
  };
  for (std::size_t a = 0; a < count; ++a) {
    for (std::size_t b = 0; b < count; ++b) {
      if (a == b) continue;
      if (unit(rng) < density) {
        // ~1 ms per 10 distance units plus a fixed 2 ms hop cost.
        topo.arcs.push_back({topo.nodes[a].id, topo.nodes[b].id, 2.0 + dist(a, b) / 10.0});
      }
    }
  }
  if (count >= 2) {
    std::size_t best_a = 0, best_b = 1;
    double best = -1.0;
    for (std::size_t a = 0; a < count; ++a)
      for (std::size_t b = a + 1; b < count; ++b)
        if (dist(a, b) > best) {
          best = dist(a, b);
          best_a = a;
          best_b = b;
        }
    topo.source = topo.nodes[best_a].id;
    topo.sink = topo.nodes[best_b].id;
  }
  return topo;
}

}  // namespace arcturus
