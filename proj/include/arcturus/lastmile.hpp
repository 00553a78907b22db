#pragma once

// Last-mile scheduling: per-node virtual stability queues, the quadratic
// Lyapunov function, the per-node drift-plus-penalty value and the BPR
// (big process rearrangement) heuristic that minimises its sum.
//
// Request rates are whole requests per second so that every reallocation
// conserves the slot's total exactly.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "arcturus/error.hpp"
#include "arcturus/model.hpp"

namespace arcturus::lastmile {

using Rps = std::int64_t;

// One affine segment of the CPU predictor: within [cpu_low, cpu_high] the
// model maps a request increment to slope * dreq + intercept model units.
struct CpuBand {
  double cpu_low = 0.0;
  double cpu_high = 1.0;
  double slope = 0.0;
  double intercept = 0.0;

  bool contains(double cpu) const { return cpu >= cpu_low && cpu <= cpu_high; }
  double raw(double delta_req) const { return slope * delta_req + intercept; }
};

struct CpuModel {
  std::vector<CpuBand> bands;
  // Model units -> CPU fraction.
  double calibration = 1.0;

  // Fitted bands of an 8-core/16 GB proxy: 60-70% and 70-80% CPU, with a
  // calibration that maps the first band onto 25k RPS of capacity.
  static CpuModel reference_8c16g();
  void validate() const;  // throws ConfigError
};

struct Prediction {
  double delta_cpu = 0.0;
  std::size_t band = 0;
  bool fallback = false;  // cpu_onset fell outside every band; nearest used
};

// Predicted CPU change for a request increment at the given onset CPU.
// The affine model is evaluated at both endpoints and differenced, so the
// intercept cancels and a zero increment predicts zero change. The result is
// clamped so that cpu_onset + delta stays inside [0, 1].
Prediction predict_delta_cpu(const CpuModel& model, double cpu_onset, double delta_req);

// Largest increment whose predicted CPU stays at or below `cpu_limit`
// (INT64_MAX when the band slope is not positive).
Rps max_increment_below(const CpuModel& model, double cpu_onset, double cpu_limit);

// Least-squares calibration constant against a ground-truth rps -> cpu curve,
// sampled at onsets inside each band with increments of 100-300 requests/s.
double fit_calibration(const CpuModel& model, const std::function<double(double)>& cpu_of_rps,
                       double max_rps);

// `backlog` is the value the scheduler sees. Place-holder backlog is never
// served: backlog >= placeholder always, and the real queue is the difference.
struct VirtualQueue {
  double backlog = 0.0;
  double weight = 1.0;  // 1 / cores
  double placeholder = 0.0;

  double actual() const { return backlog - placeholder; }

  static VirtualQueue for_cores(int cores, double backlog = 0.0);
  static VirtualQueue with_placeholder(int cores, double placeholder);
};

// max(Q + cpu_onset + delta_cpu - theta, placeholder)
VirtualQueue update_queue(const VirtualQueue& q, double cpu_onset, double delta_cpu, double theta);

// 1/2 * sum w_k Q_k^2
double lyapunov(std::span<const VirtualQueue> queues);

struct DppParams {
  double theta = 0.60;
  double penalty_weight = 0.0;  // V
  double redistribution = 0.5;  // p
  double mad_multiplier = 3.0;
  double saturation_cpu = 0.80;
  // Depth of the {p, p/2, p/4, ...} series used when core counts differ by more than 2x.
  int p_series_depth = 4;
  int max_iterations = 256;

  void validate() const;  // throws ConfigError
};

struct NodeSchedState {
  NodeId id;
  int cores = 1;
  VirtualQueue queue;
  double cpu_onset = 0.0;
  Rps req_onset = 0;
  double delay_ms = 0.0;
  bool active = true;
  CpuModel cpu_model = CpuModel::reference_8c16g();
};

struct DppEvaluation {
  std::vector<double> v;          // per-node drift-plus-penalty value
  std::vector<double> delta_cpu;  // predicted
  std::vector<double> cpu_in;     // cpu_onset + delta_cpu
  double total = 0.0;
};

// v_k = w_k Q_k * dcpu_k + V * delay_k * dreq_k, dcpu_k from the node's predictor.
DppEvaluation compute_dpp(std::span<const NodeSchedState> states, std::span<const Rps> delta_req,
                          const DppParams& params);
DppEvaluation compute_dpp(std::span<const NodeSchedState> states, std::span<const double> delta_req,
                          const DppParams& params);

// Nodes whose |v - median| exceeds multiplier * MAD, over the given candidate indices.
std::vector<std::size_t> detect_outliers(std::span<const double> v,
                                         std::span<const std::size_t> candidates,
                                         double mad_multiplier);

struct ScheduleDecision {
  std::vector<Rps> delta_req;
  std::vector<std::size_t> deactivated;
  std::vector<std::size_t> initial_outliers;
  std::vector<double> v_before;
  std::vector<double> v_after;
  double total_dpp_before = 0.0;
  double total_dpp_after = 0.0;
  int iterations = 0;
  int accepted = 0;
};

class NoActiveNodes : public Error {
 public:
  NoActiveNodes() : Error("NoActiveNodes: the proxy group has no active node") {}
};

// Redistribution fractions tried per iteration: {p} for homogeneous cores,
// the descending halving series otherwise.
std::vector<double> redistribution_series(std::span<const NodeSchedState> states,
                                          const DppParams& params);

// BPR: proportional assignment by req_onset, MAD outlier detection on v, then
// repeated shedding of a fraction of the worst outlier's load onto the
// non-singular nodes in proportion to spare capacity (1 - cpu) * cores, kept
// only when the total DPP strictly improves. Nodes whose predicted CPU would
// pass saturation_cpu are capped there and take no further load this slot.
ScheduleDecision bpr_schedule(Rps total_delta_req, std::span<const NodeSchedState> states,
                              const DppParams& params);

// Baseline that ignores stability: increments fill the lowest-delay nodes up
// to saturation_cpu first, decrements drain the highest-delay nodes first.
ScheduleDecision latency_greedy_schedule(Rps total_delta_req, std::span<const NodeSchedState> states,
                                         const DppParams& params);

// V that puts the drift term at theta-level backlog and the penalty term at
// median delay on the same scale.
double default_penalty_weight(std::span<const NodeSchedState> states, double theta);

// Median of the group's current backlogs.
double init_placeholder(std::span<const double> group_backlogs);

// ---------------------------------------------------------------------------
// Empirical drift-bound checking over recorded trajectories.

struct TrajectorySlot {
  std::vector<double> weight;
  std::vector<double> backlog;       // Q(t)
  std::vector<double> backlog_next;  // Q(t+1)
  std::vector<double> cpu_onset;
  std::vector<double> delta_cpu;     // increment that drove the queue update
};

struct Trajectory {
  double theta = 0.60;
  std::vector<TrajectorySlot> slots;
};

struct DriftReport {
  std::size_t slots_checked = 0;
  double y_max = 0.0;
  std::vector<std::size_t> violations;
  double max_excess = 0.0;  // max over slots of drift - bound (negative = slack)
  double stat_half = 0.0;   // max_k Q_k(T/2) / (T/2)
  double stat_end = 0.0;    // max_k Q_k(T) / T
  double first_quarter = 0.0;  // max_k mean_{t in Q1} Q_k(t) / t
  double last_quarter = 0.0;   // same over the final quarter
  bool trend_decreasing = false;
};

class DriftViolation : public Error {
 public:
  explicit DriftViolation(std::size_t slot)
      : Error("ViolationAt: drift bound exceeded at slot " + std::to_string(slot)), slot_(slot) {}
  std::size_t slot() const noexcept { return slot_; }

 private:
  std::size_t slot_;
};

// One-slot drift L(Q(t+1)) - L(Q(t)) against B + sum w_k Q_k(t) y_k(t), where
// y_k = cpu_onset + delta_cpu - theta and B = 1/2 sum w_k y_max^2 with y_max
// the largest |y| on the trajectory.
DriftReport drift_bound_check(const Trajectory& trajectory);
// Same, throwing DriftViolation at the first offending slot.
DriftReport require_drift_bound(const Trajectory& trajectory);

// ---------------------------------------------------------------------------
// Config and node-state files.

CpuModel cpu_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CpuModel& model);
DppParams dpp_params_from_json(const nlohmann::json& j, DppParams defaults = {});
nlohmann::json to_json(const DppParams& params);

struct NodeStateFile {
  DppParams params;
  std::vector<NodeSchedState> nodes;
};
NodeStateFile node_state_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScheduleDecision& decision, std::span<const NodeSchedState> states);

}  // namespace arcturus::lastmile
