#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace arcturus {

using NodeId = std::string;

struct NodeSpec {
  NodeId id;
  int cores = 1;
  std::string region;
  std::string tier;
  double cost_per_hour = 0.0;
  // Per-node forwarding latency; becomes the cost of the node's split arc.
  double processing_latency_ms = 0.0;
  // User-to-proxy latency seen by last-mile traffic.
  double access_latency_ms = 0.0;
  // Request-rate capacity; 0 derives it from the core count.
  double max_rps = 0.0;

  bool operator==(const NodeSpec&) const = default;
};

struct Arc {
  NodeId src;
  NodeId dst;
  double latency_ms = 0.0;

  bool operator==(const Arc&) const = default;
};

struct Topology {
  std::vector<NodeSpec> nodes;
  std::vector<Arc> arcs;
  std::optional<NodeId> source;
  std::optional<NodeId> sink;

  std::optional<std::size_t> index_of(const NodeId& id) const;
  const NodeSpec* find(const NodeId& id) const;

  bool operator==(const Topology&) const = default;
};

// Returns one human-readable message per violated invariant; empty when valid.
std::vector<std::string> validate_topology(const Topology& topo);

nlohmann::json to_json(const Topology& topo);
Topology topology_from_json(const nlohmann::json& j);
std::string serialize_topology(const Topology& topo);
Topology parse_topology(const std::string& text);
Topology load_topology(const std::filesystem::path& path);
void save_topology(const Topology& topo, const std::filesystem::path& path);

// Random geometric overlay: nodes scattered over a plane, each ordered pair
// connected with probability `density`, latency proportional to distance.
// Source and sink are the two most distant nodes.
Topology generate_topology(std::size_t nodes, double density, std::uint64_t seed);

struct SlotClock {
  std::uint64_t slot_index = 0;
  std::int64_t slot_length_ms = 5000;

  void advance() { ++slot_index; }
  std::int64_t now_ms() const {
    return static_cast<std::int64_t>(slot_index) * slot_length_ms;
  }
  double slot_seconds() const { return static_cast<double>(slot_length_ms) / 1000.0; }
};

struct PerfCounters {
  double cpu = 0.0;   // fraction in [0,1]
  double rps = 0.0;   // arrivals per second
  double rqpt = 0.0;  // completions per second
  double art = 0.0;   // mean service time, ms
};

}  // namespace arcturus
