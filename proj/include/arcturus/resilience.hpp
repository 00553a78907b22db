#pragma once

// Backup-path planning and the per-flow failover state machine.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "arcturus/error.hpp"
#include "arcturus/model.hpp"
#include "arcturus/telemetry.hpp"

namespace arcturus::resilience {

// Node sequence from the ingress to a node of the destination region.
using Route = std::vector<NodeId>;
using Link = std::pair<NodeId, NodeId>;

struct FailureSet {
  std::set<NodeId> nodes;
  std::set<Link> links;  // directed

  bool crosses(const Route& route) const;
  bool empty() const { return nodes.empty() && links.empty(); }
};

// What a planner sees: base latencies from the topology, overridden by exact
// telemetry readings, minus failed elements.
struct NetworkView {
  const Topology* topo = nullptr;
  const telemetry::Digest* digest = nullptr;
  FailureSet failed;
  // next hop -> destination region -> share of current traffic toward it.
  std::map<NodeId, std::map<std::string, double>> load_share;

  std::optional<double> link_latency(const NodeId& a, const NodeId& b) const;
  double route_latency(const Route& route) const;
};

struct BackupParams {
  double theta_l = 1e9;
  double load_threshold = 0.5;
  int n_backups = 2;
  int healthy_probes = 3;  // H
  void validate() const;   // throws ConfigError
};

class NoBackup : public Error {
 public:
  NoBackup(const NodeId& node, const std::string& region)
      : Error("NoBackup: no feasible alternative from " + node + " toward " + region) {}
};

// Lowest-latency route from `from` to any node of `region`, skipping
// `avoid` and failed elements. Empty when unreachable.
Route shortest_route(const NetworkView& view, const NodeId& from, const std::string& region,
                     const std::set<NodeId>& avoid = {});

// Up to n_backups routes whose first hop differs from `primary_next_hop` and
// carries no more than load_threshold of the traffic toward `region`,
// each within theta_l, sorted by latency.
std::vector<Route> compute_backups(const NetworkView& view, const NodeId& node, const std::string& region,
                                   const NodeId& primary_next_hop, const BackupParams& params);

enum class Mode { Primary, OnBackup, Reverted };
const char* to_string(Mode m);

struct Flow {
  std::string id;
  NodeId ingress;
  std::string dest_region;
  double rps = 0.0;
  Route primary;
  Route active;  // empty while degraded
  Mode mode = Mode::Primary;
  std::int64_t since_slot = 0;
  int healthy_streak = 0;
  bool degraded = false;
  std::vector<Route> backups;
};

enum class ActionKind { Reroute, ReverseNotify, ControllerEvent, Degraded, Improve, Revert, Alarm };
const char* to_string(ActionKind k);

struct Action {
  ActionKind kind;
  std::string flow;
  std::int64_t slot = 0;
  Route route;
  std::string detail;
};

struct FailureEvent {
  enum class Kind { Node, Link } kind = Kind::Node;
  NodeId a;
  NodeId b;  // link only
  std::string describe() const;
};

class FailoverEngine {
 public:
  explicit FailoverEngine(BackupParams params = {});

  // Installs a flow on its shortest route and precomputes its backups.
  void add_flow(Flow flow, const NetworkView& view, std::int64_t slot);
  const std::vector<Flow>& flows() const { return flows_; }
  const Flow* find(const std::string& id) const;

  // Moves every flow whose active route crosses a failed element onto its
  // first surviving backup, emitting reroute, reverse-notify and controller
  // actions. Flows with no surviving backup are marked degraded.
  std::vector<Action> on_failure(const FailureEvent& event, const NetworkView& view, std::int64_t slot);

  // One scheduling cycle: flows on a backup since an earlier slot adopt the
  // scheduler's best route if it is strictly faster; degraded flows retry;
  // backups are recomputed for every flow.
  std::vector<Action> on_cycle(const NetworkView& view, std::int64_t slot);

  // One probe round: counts consecutive healthy probes of each displaced
  // flow's primary and reverts after H of them.
  std::vector<Action> on_probe(const NetworkView& view, std::int64_t slot);

  const BackupParams& params() const { return params_; }

 private:
  std::vector<Action> displace(Flow& flow, const NetworkView& view, std::int64_t slot, const std::string& cause);
  void refresh_backups(Flow& flow, const NetworkView& view, std::vector<Action>& actions, std::int64_t slot);

  BackupParams params_;
  std::vector<Flow> flows_;
};

nlohmann::json to_json(const Action& action, std::int64_t slot_length_ms);

}  // namespace arcturus::resilience
