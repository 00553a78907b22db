#pragma once

// Deterministic slot-driven simulator. Each 5 s slot runs, in order:
// node additions, failure schedule, probes and telemetry sync (which detect
// failures and drive failover), arrivals, last-mile allocation, mid-mile
// routing and flow forwarding, then queue updates on the actual CPU.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "arcturus/error.hpp"
#include "arcturus/lastmile.hpp"
#include "arcturus/midmile.hpp"
#include "arcturus/model.hpp"
#include "arcturus/resilience.hpp"
#include "arcturus/telemetry.hpp"

namespace arcturus::sim {

struct SpikeSpec {
  std::int64_t slot = 0;
  double multiplier = 1.0;
  std::int64_t duration = 1;
};

struct RandomSpikes {
  double rate = 0.0;  // per-slot start probability
  double min_multiplier = 2.0;
  double max_multiplier = 5.0;
  std::int64_t min_duration = 1;
  std::int64_t max_duration = 10;
};

struct WorkloadProfile {
  double base_rps = 0.0;
  double diurnal_amplitude = 0.0;
  double diurnal_period_slots = 17280.0;  // one day of 5 s slots
  double noise_sigma = 0.0;               // lognormal, mean one
  std::vector<SpikeSpec> spikes;
  RandomSpikes random;
  void validate() const;  // throws ConfigError
};

// Diurnal sinusoid x lognormal noise x spikes, clamped at zero.
std::vector<double> generate_workload(const WorkloadProfile& profile, std::uint64_t seed, std::size_t slots);

struct CpuProfile {
  double idle = 0.05;
  double rps_per_core = 3125.0;
};

// Piecewise linear through (0, idle), (0.6 max, 0.6), (0.8 max, 0.8),
// (max, 1.0); flat beyond max.
struct CpuGroundTruth {
  double idle = 0.05;
  double max_rps = 25000.0;
  double cpu(double rps) const;
};

double node_max_rps(const NodeSpec& node, const CpuProfile& profile);

class UnknownTarget : public ConfigError {
 public:
  UnknownTarget(const std::string& location, const std::string& target)
      : ConfigError(location, "UnknownTarget: " + target) {}
};

struct FailureSpec {
  resilience::FailureEvent event;
  std::int64_t start_slot = 0;
  std::int64_t duration_slots = 1;
  bool active_at(std::int64_t slot) const { return slot >= start_slot && slot < start_slot + duration_slots; }
};

struct NodeAddition {
  NodeSpec node;
  std::vector<Arc> arcs;
  std::int64_t slot = 0;
  bool placeholder = true;
};

struct FlowSpec {
  std::string id;
  NodeId ingress;
  std::string dest_region;
  double rps = 0.0;
};

struct LastmileConfig {
  std::string scheduler = "bpr";  // or "latency_greedy"
  lastmile::DppParams params;
  bool penalty_given = false;
  lastmile::CpuModel cpu_model = lastmile::CpuModel::reference_8c16g();
  bool calibrate = true;
  std::vector<NodeId> group;  // empty: every node
};

struct MidmileConfig {
  bool enabled = false;
  int k = 3;
  double theta_a = 1.0;
  double theta_l = midmile::kUnbounded;
  midmile::CarouselParams carousel;
  std::int64_t every = 1;
};

struct TelemetryConfig {
  telemetry::PartitionParams partition;
  double jitter_sigma = 0.05;
};

struct Scenario {
  std::string name = "scenario";
  Topology topology;
  std::int64_t duration_slots = 0;
  std::uint64_t seed = 1;
  std::int64_t slot_ms = 5000;
  WorkloadProfile workload;
  CpuProfile cpu;
  LastmileConfig lastmile;
  MidmileConfig midmile;
  TelemetryConfig telemetry;
  resilience::BackupParams resilience;
  std::map<NodeId, std::map<std::string, double>> load_share;
  std::vector<FlowSpec> flows;
  std::vector<FailureSpec> failures;
  std::vector<NodeAddition> additions;

  void validate() const;  // throws ConfigError / UnknownTarget
};

// Relative topology paths resolve against `base_dir`.
Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

struct NodeSlot {
  std::int64_t slot = 0;
  NodeId node;
  bool active = true;
  double cpu = 0.0;
  lastmile::Rps rps = 0;
  lastmile::Rps delta_req = 0;
  double backlog = 0.0;  // real queue (Q minus place-holder) at the start of the slot
  double v_dpp = 0.0;
};

struct SlotRecord {
  std::int64_t slot = 0;
  lastmile::Rps arrivals = 0;
  lastmile::Rps delivered = 0;
  lastmile::Rps dropped_overload = 0;
  lastmile::Rps dropped_no_node = 0;
  double flow_admitted = 0.0;
  double flow_delivered = 0.0;
  double flow_dropped_no_route = 0.0;
  double mean_cpu = 0.0;
  double cpu_variance = 0.0;
  double total_dpp = 0.0;
  int midmile_paths = 0;
  double midmile_cos = 0.0;
  std::size_t probe_timeouts = 0;
  std::size_t digest_bytes = 0;
  std::size_t raw_bytes = 0;
};

struct FlowRecord {
  std::int64_t slot = 0;
  std::string flow;
  std::string mode;
  double latency_ms = 0.0;  // negative while degraded
  std::string route;
};

struct MetricsLog {
  static constexpr int kSchemaVersion = 1;
  std::vector<NodeSlot> nodes;
  std::vector<SlotRecord> slots;
  std::vector<FlowRecord> flows;
  std::vector<nlohmann::json> events;
  lastmile::Trajectory trajectory;
  std::vector<std::string> violations;

  std::string nodes_csv() const;
  std::string slots_csv() const;
  std::string flows_csv() const;
  std::string events_jsonl() const;

  // Real queue at the start of each slot the node existed.
  std::vector<double> backlog_series(const NodeId& node) const;
};

struct RunSummary {
  double mean_cpu = 0.0;
  double p50_latency_ms = 0.0;
  double p95_latency_ms = 0.0;
  double max_backlog = 0.0;
  std::size_t failovers = 0;
  std::size_t violations = 0;
  double mean_cpu_variance = 0.0;
  lastmile::Rps delivered = 0;
};

RunSummary summarize(const MetricsLog& log);
nlohmann::json to_json(const RunSummary& summary);

MetricsLog run_scenario(const Scenario& scenario);

// nodes.csv, slots.csv, flows.csv, events.jsonl, summary.json
void write_metrics(const MetricsLog& log, const std::filesystem::path& out_dir);

}  // namespace arcturus::sim
