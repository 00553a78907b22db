#include "arcturus/lastmile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "arcturus/stats.hpp"

namespace arcturus::lastmile {

namespace {

constexpr double kReferenceMaxRps = 25000.0;

std::size_t select_band(const CpuModel& model, double cpu, bool& fallback) {
  for (std::size_t i = 0; i < model.bands.size(); ++i) {
    if (model.bands[i].contains(cpu)) {
      fallback = false;
      return i;
    }
  }
  fallback = true;
  std::size_t best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < model.bands.size(); ++i) {
    const auto& b = model.bands[i];
    const double gap = cpu < b.cpu_low ? b.cpu_low - cpu : cpu - b.cpu_high;
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

double cpu_slope(const CpuModel& model, double cpu_onset) {
  bool fallback = false;
  const auto& band = model.bands[select_band(model, cpu_onset, fallback)];
  return model.calibration * band.slope;
}

// Splits `amount` over `weights` in whole units (largest remainder).
std::vector<Rps> apportion(Rps amount, std::span<const double> weights) {
  std::vector<Rps> out(weights.size(), 0);
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (weights.empty() || !(total > 0)) return out;
  const double sign = amount < 0 ? -1.0 : 1.0;
  const Rps magnitude = amount < 0 ? -amount : amount;
  std::vector<std::pair<double, std::size_t>> remainders;
  Rps assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(magnitude) * weights[i] / total;
    const Rps whole = static_cast<Rps>(std::floor(exact));
    out[i] = whole;
    assigned += whole;
    remainders.emplace_back(exact - static_cast<double>(whole), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < magnitude; r = (r + 1) % remainders.size()) {
    ++out[remainders[r].second];
    ++assigned;
  }
  if (sign < 0)
    for (auto& x : out) x = -x;
  return out;
}

// Working allocation shared by the BPR phases.
class Allocation {
 public:
  Allocation(std::span<const NodeSchedState> states, const DppParams& params)
      : states_(states), params_(params), req_in_(states.size()), saturated_(states.size(), false) {
    for (std::size_t k = 0; k < states.size(); ++k) {
      req_in_[k] = states[k].req_onset;
      headroom_limit_.push_back(
          max_increment_below(states[k].cpu_model, states[k].cpu_onset, params.saturation_cpu));
    }
  }

  std::vector<Rps> deltas() const {
    std::vector<Rps> d(states_.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = req_in_[k] - states_[k].req_onset;
    return d;
  }

  DppEvaluation evaluate() const { return compute_dpp(states_, deltas(), params_); }

  Rps& req_in(std::size_t k) { return req_in_[k]; }
  bool saturated(std::size_t k) const { return saturated_[k]; }

  Rps headroom(std::size_t k) const {
    const Rps limit = headroom_limit_[k];
    if (limit == std::numeric_limits<Rps>::max()) return limit;
    return std::max<Rps>(0, limit - (req_in_[k] - states_[k].req_onset));
  }

  // Spreads `amount` over `recipients` by spare capacity, capping each at the
  // saturation CPU. Returns what could not be placed.
  Rps distribute(Rps amount, std::vector<std::size_t> recipients) {
    while (amount > 0) {
      std::erase_if(recipients, [&](std::size_t k) { return saturated_[k]; });
      if (recipients.empty()) break;
      const auto eval = evaluate();
      std::vector<double> weights;
      for (std::size_t k : recipients)
        weights.push_back(std::max(0.0, 1.0 - eval.cpu_in[k]) * states_[k].cores);
      auto shares = apportion(amount, weights);
      if (std::all_of(shares.begin(), shares.end(), [](Rps s) { return s == 0; })) break;
      bool capped = false;
      for (std::size_t i = 0; i < recipients.size(); ++i) {
        const std::size_t k = recipients[i];
        Rps give = shares[i];
        const Rps room = headroom(k);
        if (give >= room) {
          give = room;
          saturated_[k] = true;
          capped = true;
        }
        req_in_[k] += give;
        amount -= give;
      }
      if (!capped) break;
    }
    return amount;
  }

  void mark_saturated(std::size_t k) { saturated_[k] = true; }

  struct Snapshot {
    std::vector<Rps> req_in;
    std::vector<bool> saturated;
  };
  Snapshot snapshot() const { return {req_in_, saturated_}; }
  void restore(const Snapshot& s) {
    req_in_ = s.req_in;
    saturated_ = s.saturated;
  }

 private:
  std::span<const NodeSchedState> states_;
  const DppParams& params_;
  std::vector<Rps> req_in_;
  std::vector<bool> saturated_;
  std::vector<Rps> headroom_limit_;
};

bool strictly_better(double candidate, double incumbent) {
  return candidate < incumbent - 1e-12 * std::max(1.0, std::abs(incumbent));
}

}  // namespace

CpuModel CpuModel::reference_8c16g() {
  CpuModel m;
  m.bands = {{0.60, 0.70, 340.0, -1300.0}, {0.70, 0.80, 250.0, 5000.0}};
  m.calibration = 1.0 / (340.0 * kReferenceMaxRps);
  return m;
}

void CpuModel::validate() const {
  if (bands.empty()) throw ConfigError("cpu_model", "at least one band is required");
  if (!(calibration > 0)) throw ConfigError("cpu_model", "calibration must be positive");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const auto& b = bands[i];
    if (!(b.cpu_low >= 0 && b.cpu_high <= 1 && b.cpu_low < b.cpu_high))
      throw ConfigError("cpu_model.bands[" + std::to_string(i) + "]", "band must satisfy 0 <= low < high <= 1");
    if (i > 0 && b.cpu_low < bands[i - 1].cpu_high)
      throw ConfigError("cpu_model.bands[" + std::to_string(i) + "]", "bands must be ordered and disjoint");
  }
}

Prediction predict_delta_cpu(const CpuModel& model, double cpu_onset, double delta_req) {
  Prediction p;
  if (model.bands.empty() || delta_req == 0.0) return p;
  p.band = select_band(model, cpu_onset, p.fallback);
  const auto& band = model.bands[p.band];
  const double raw = band.raw(delta_req) - band.raw(0.0);
  const double delta = model.calibration * raw;
  p.delta_cpu = std::clamp(delta, -cpu_onset, 1.0 - cpu_onset);
  return p;
}

Rps max_increment_below(const CpuModel& model, double cpu_onset, double cpu_limit) {
  if (model.bands.empty()) return std::numeric_limits<Rps>::max();
  const double slope = cpu_slope(model, cpu_onset);
  if (!(slope > 0)) return std::numeric_limits<Rps>::max();
  return static_cast<Rps>(std::floor((cpu_limit - cpu_onset) / slope));
}

double fit_calibration(const CpuModel& model, const std::function<double(double)>& cpu_of_rps,
                       double max_rps) {
  double sxy = 0.0, sxx = 0.0;
  for (const auto& band : model.bands) {
    for (int i = 0; i <= 40; ++i) {
      const double rps = max_rps * i / 40.0;
      const double cpu = cpu_of_rps(rps);
      if (!band.contains(cpu)) continue;
      for (double dreq = 100.0; dreq <= 300.0; dreq += 50.0) {
        const double target = cpu_of_rps(rps + dreq) - cpu;
        const double x = band.raw(dreq) - band.raw(0.0);
        sxy += x * target;
        sxx += x * x;
      }
    }
  }
  if (!(sxx > 0)) return model.calibration;
  return sxy / sxx;
}

VirtualQueue VirtualQueue::for_cores(int cores, double backlog) {
  if (cores < 1) throw ConfigError("node", "cores must be >= 1");
  return {backlog, 1.0 / static_cast<double>(cores), 0.0};
}

VirtualQueue VirtualQueue::with_placeholder(int cores, double placeholder) {
  if (!(placeholder >= 0)) throw ConfigError("node", "placeholder backlog must be nonnegative");
  auto q = for_cores(cores, placeholder);
  q.placeholder = placeholder;
  return q;
}

VirtualQueue update_queue(const VirtualQueue& q, double cpu_onset, double delta_cpu, double theta) {
  return {std::max(q.backlog + cpu_onset + delta_cpu - theta, q.placeholder), q.weight, q.placeholder};
}

double lyapunov(std::span<const VirtualQueue> queues) {
  double acc = 0.0;
  for (const auto& q : queues) acc += q.weight * q.backlog * q.backlog;
  return 0.5 * acc;
}

void DppParams::validate() const {
  if (!(theta > 0 && theta < 1)) throw ConfigError("params.theta", "must lie in (0, 1)");
  if (!(redistribution > 0 && redistribution < 1)) throw ConfigError("params.p", "must lie in (0, 1)");
  if (!(penalty_weight >= 0)) throw ConfigError("params.V", "must be nonnegative");
  if (!(mad_multiplier > 0)) throw ConfigError("params.mad_multiplier", "must be positive");
  if (!(saturation_cpu > 0 && saturation_cpu <= 1)) throw ConfigError("params.saturation_cpu", "must lie in (0, 1]");
  if (p_series_depth < 1) throw ConfigError("params.p_series_depth", "must be >= 1");
  if (max_iterations < 0) throw ConfigError("params.max_iterations", "must be >= 0");
}

template <typename T>
static DppEvaluation compute_dpp_impl(std::span<const NodeSchedState> states, std::span<const T> delta_req,
                                      const DppParams& params) {
  if (delta_req.size() != states.size()) throw Error("compute_dpp: one increment per node is required");
  DppEvaluation e;
  e.v.resize(states.size());
  e.delta_cpu.resize(states.size());
  e.cpu_in.resize(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    const auto& s = states[k];
    const double dreq = static_cast<double>(delta_req[k]);
    const double dcpu = predict_delta_cpu(s.cpu_model, s.cpu_onset, dreq).delta_cpu;
    e.delta_cpu[k] = dcpu;
    e.cpu_in[k] = s.cpu_onset + dcpu;
    e.v[k] = s.queue.weight * s.queue.backlog * dcpu + params.penalty_weight * s.delay_ms * dreq;
    e.total += e.v[k];
  }
  return e;
}

DppEvaluation compute_dpp(std::span<const NodeSchedState> states, std::span<const Rps> delta_req,
                          const DppParams& params) {
  return compute_dpp_impl(states, delta_req, params);
}

DppEvaluation compute_dpp(std::span<const NodeSchedState> states, std::span<const double> delta_req,
                          const DppParams& params) {
  return compute_dpp_impl(states, delta_req, params);
}

std::vector<std::size_t> detect_outliers(std::span<const double> v, std::span<const std::size_t> candidates,
                                         double mad_multiplier) {
  std::vector<double> values;
  for (std::size_t k : candidates) values.push_back(v[k]);
  const double med = stats::median(values);
  const double spread = stats::mad(values);
  std::vector<std::size_t> out;
  if (!(spread > 0)) return out;
  for (std::size_t k : candidates)
    if (std::abs(v[k] - med) > mad_multiplier * spread) out.push_back(k);
  return out;
}

std::vector<double> redistribution_series(std::span<const NodeSchedState> states, const DppParams& params) {
  int lo = std::numeric_limits<int>::max(), hi = 0;
  for (const auto& s : states) {
    if (!s.active) continue;
    lo = std::min(lo, s.cores);
    hi = std::max(hi, s.cores);
  }
  std::vector<double> series{params.redistribution};
  if (hi > 2 * lo) {
    for (int i = 1; i < params.p_series_depth; ++i) series.push_back(series.back() / 2.0);
  }
  return series;
}

ScheduleDecision bpr_schedule(Rps total_delta_req, std::span<const NodeSchedState> states,
                              const DppParams& params) {
  params.validate();
  std::vector<std::size_t> eligible;
  Rps onset_sum = 0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (!states[k].active) continue;
    eligible.push_back(k);
    onset_sum += states[k].req_onset;
  }
  if (eligible.empty()) throw NoActiveNodes();
  if (total_delta_req < -onset_sum)
    throw Error("bpr_schedule: cannot remove " + std::to_string(-total_delta_req) +
                " requests/s from a group serving " + std::to_string(onset_sum));

  Allocation alloc(states, params);

  // Line 1: proportional to req_onset, uniform on a cold start.
  {
    std::vector<double> weights;
    for (std::size_t k : eligible)
      weights.push_back(onset_sum > 0 ? static_cast<double>(states[k].req_onset) : 1.0);
    const auto shares = apportion(total_delta_req, weights);
    for (std::size_t i = 0; i < eligible.size(); ++i) alloc.req_in(eligible[i]) += shares[i];
  }
  // Nodes pushed past saturation keep only their headroom; the overflow
  // moves to the remaining nodes.
  {
    Rps overflow = 0;
    for (std::size_t k : eligible) {
      const Rps delta = alloc.req_in(k) - states[k].req_onset;
      const Rps cap = std::max<Rps>(
          0, max_increment_below(states[k].cpu_model, states[k].cpu_onset, params.saturation_cpu));
      if (delta > cap) {
        alloc.req_in(k) -= delta - cap;
        overflow += delta - cap;
      }
      if (delta >= cap && cap != std::numeric_limits<Rps>::max()) alloc.mark_saturated(k);
    }
    if (overflow > 0) {
      const Rps left = alloc.distribute(overflow, eligible);
      if (left > 0) {
        // The whole group is saturated: the remainder stays proportional.
        std::vector<double> weights;
        for (std::size_t k : eligible)
          weights.push_back(static_cast<double>(std::max<Rps>(1, states[k].req_onset)));
        const auto shares = apportion(left, weights);
        for (std::size_t i = 0; i < eligible.size(); ++i) alloc.req_in(eligible[i]) += shares[i];
      }
    }
  }

  ScheduleDecision out;
  auto eval = alloc.evaluate();
  out.v_before = eval.v;
  out.total_dpp_before = eval.total;

  auto outliers = detect_outliers(eval.v, eligible, params.mad_multiplier);
  out.initial_outliers = outliers;
  std::vector<bool> skipped(states.size(), false);
  const auto series = redistribution_series(states, params);

  auto pending = [&]() {
    std::vector<std::size_t> open;
    for (std::size_t k : outliers)
      if (!skipped[k]) open.push_back(k);
    return open;
  };

  for (auto open = pending(); !open.empty() && out.iterations < params.max_iterations; open = pending()) {
    ++out.iterations;
    std::size_t target = open.front();
    for (std::size_t k : open)
      if (std::abs(eval.v[k]) > std::abs(eval.v[target])) target = k;

    std::vector<std::size_t> recipients;
    for (std::size_t k : eligible) {
      const bool singular = std::find(outliers.begin(), outliers.end(), k) != outliers.end();
      if (!singular && !skipped[k] && !alloc.saturated(k) && k != target) recipients.push_back(k);
    }

    bool improved = false;
    if (!recipients.empty() && alloc.req_in(target) > 0) {
      for (double p : series) {
        const auto before = alloc.snapshot();
        const Rps pool = static_cast<Rps>(std::floor(p * static_cast<double>(alloc.req_in(target))));
        if (pool <= 0) break;
        alloc.req_in(target) -= pool;
        const Rps left = alloc.distribute(pool, recipients);
        alloc.req_in(target) += left;
        auto candidate = alloc.evaluate();
        if (left < pool && strictly_better(candidate.total, eval.total)) {
          eval = std::move(candidate);
          improved = true;
          break;
        }
        alloc.restore(before);
      }
    }
    if (improved) {
      ++out.accepted;
      outliers = detect_outliers(eval.v, eligible, params.mad_multiplier);
    } else {
      skipped[target] = true;
    }
  }

  out.delta_req = alloc.deltas();
  out.v_after = eval.v;
  out.total_dpp_after = eval.total;
  for (std::size_t k : eligible)
    if (alloc.saturated(k)) out.deactivated.push_back(k);
  return out;
}

ScheduleDecision latency_greedy_schedule(Rps total_delta_req, std::span<const NodeSchedState> states,
                                         const DppParams& params) {
  params.validate();
  std::vector<std::size_t> order;
  Rps onset_sum = 0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (!states[k].active) continue;
    order.push_back(k);
    onset_sum += states[k].req_onset;
  }
  if (order.empty()) throw NoActiveNodes();
  if (total_delta_req < -onset_sum)
    throw Error("latency_greedy_schedule: cannot remove more than the group serves");
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return states[a].delay_ms < states[b].delay_ms; });

  ScheduleDecision out;
  out.delta_req.assign(states.size(), 0);
  Rps remaining = total_delta_req;
  if (remaining > 0) {
    for (std::size_t k : order) {
      const Rps cap = std::max<Rps>(
          0, max_increment_below(states[k].cpu_model, states[k].cpu_onset, params.saturation_cpu));
      const Rps give = std::min(remaining, cap);
      out.delta_req[k] = give;
      remaining -= give;
      if (give == cap && cap != std::numeric_limits<Rps>::max()) out.deactivated.push_back(k);
      if (remaining == 0) break;
    }
    out.delta_req[order.front()] += remaining;
  } else {
    for (auto it = order.rbegin(); it != order.rend() && remaining < 0; ++it) {
      const Rps take = std::min(-remaining, states[*it].req_onset);
      out.delta_req[*it] = -take;
      remaining += take;
    }
  }
  const auto eval = compute_dpp(states, out.delta_req, params);
  out.v_before = out.v_after = eval.v;
  out.total_dpp_before = out.total_dpp_after = eval.total;
  return out;
}

double default_penalty_weight(std::span<const NodeSchedState> states, double theta) {
  std::vector<double> drift, delay;
  for (const auto& s : states) {
    drift.push_back(s.queue.weight * theta * cpu_slope(s.cpu_model, s.cpu_onset));
    delay.push_back(s.delay_ms);
  }
  const double med_delay = stats::median(delay);
  return med_delay > 0 ? stats::median(drift) / med_delay : 0.0;
}

double init_placeholder(std::span<const double> group_backlogs) { return stats::median(group_backlogs); }

// ---------------------------------------------------------------------------

DriftReport drift_bound_check(const Trajectory& trajectory) {
  DriftReport report;
  const auto& slots = trajectory.slots;
  report.slots_checked = slots.size();
  for (const auto& s : slots)
    for (std::size_t k = 0; k < s.backlog.size(); ++k)
      report.y_max = std::max(report.y_max, std::abs(s.cpu_onset[k] + s.delta_cpu[k] - trajectory.theta));

  report.max_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < slots.size(); ++t) {
    const auto& s = slots[t];
    double l_now = 0.0, l_next = 0.0, b = 0.0, linear = 0.0;
    for (std::size_t k = 0; k < s.backlog.size(); ++k) {
      const double y = s.cpu_onset[k] + s.delta_cpu[k] - trajectory.theta;
      l_now += 0.5 * s.weight[k] * s.backlog[k] * s.backlog[k];
      l_next += 0.5 * s.weight[k] * s.backlog_next[k] * s.backlog_next[k];
      b += 0.5 * s.weight[k] * report.y_max * report.y_max;
      linear += s.weight[k] * s.backlog[k] * y;
    }
    const double excess = (l_next - l_now) - (b + linear);
    report.max_excess = std::max(report.max_excess, excess);
    if (excess > 1e-9 * std::max(1.0, b + std::abs(linear))) report.violations.push_back(t);
  }
  if (slots.empty()) report.max_excess = 0.0;

  auto stat_at = [&](std::size_t t) {
    double best = 0.0;
    for (double q : slots[t].backlog_next) best = std::max(best, q / static_cast<double>(t + 1));
    return best;
  };
  auto quarter = [&](std::size_t from, std::size_t to) {
    std::vector<double> acc;
    std::vector<std::size_t> count;
    for (std::size_t t = from; t < to; ++t) {
      const auto& q = slots[t].backlog_next;
      if (acc.size() < q.size()) {
        acc.resize(q.size(), 0.0);
        count.resize(q.size(), 0);
      }
      for (std::size_t k = 0; k < q.size(); ++k) {
        acc[k] += q[k] / static_cast<double>(t + 1);
        ++count[k];
      }
    }
    double best = 0.0;
    for (std::size_t k = 0; k < acc.size(); ++k)
      if (count[k] > 0) best = std::max(best, acc[k] / static_cast<double>(count[k]));
    return best;
  };
  if (!slots.empty()) {
    const std::size_t n = slots.size();
    report.stat_half = stat_at(n / 2 > 0 ? n / 2 - 1 : 0);
    report.stat_end = stat_at(n - 1);
    report.first_quarter = quarter(0, std::max<std::size_t>(1, n / 4));
    report.last_quarter = quarter(n - std::max<std::size_t>(1, n / 4), n);
    report.trend_decreasing = report.stat_end <= report.stat_half;
  }
  return report;
}

DriftReport require_drift_bound(const Trajectory& trajectory) {
  auto report = drift_bound_check(trajectory);
  if (!report.violations.empty()) throw DriftViolation(report.violations.front());
  return report;
}

// ---------------------------------------------------------------------------

CpuModel cpu_model_from_json(const nlohmann::json& j) {
  try {
    CpuModel m;
    for (const auto& b : j.at("bands"))
      m.bands.push_back({b.at("cpu_low").get<double>(), b.at("cpu_high").get<double>(),
                         b.at("slope").get<double>(), b.value("intercept", 0.0)});
    m.calibration = j.value("calibration", CpuModel::reference_8c16g().calibration);
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cpu_model", e.what());
  }
}

nlohmann::json to_json(const CpuModel& model) {
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : model.bands)
    bands.push_back({{"cpu_low", b.cpu_low}, {"cpu_high", b.cpu_high}, {"slope", b.slope}, {"intercept", b.intercept}});
  return {{"bands", bands}, {"calibration", model.calibration}};
}

DppParams dpp_params_from_json(const nlohmann::json& j, DppParams p) {
  try {
    p.theta = j.value("theta", p.theta);
    p.penalty_weight = j.value("V", p.penalty_weight);
    p.redistribution = j.value("p", p.redistribution);
    p.mad_multiplier = j.value("mad_multiplier", p.mad_multiplier);
    p.saturation_cpu = j.value("saturation_cpu", p.saturation_cpu);
    p.p_series_depth = j.value("p_series_depth", p.p_series_depth);
    p.max_iterations = j.value("max_iterations", p.max_iterations);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("params", e.what());
  }
  p.validate();
  return p;
}

nlohmann::json to_json(const DppParams& p) {
  return {{"theta", p.theta},
          {"V", p.penalty_weight},
          {"p", p.redistribution},
          {"mad_multiplier", p.mad_multiplier},
          {"saturation_cpu", p.saturation_cpu},
          {"p_series_depth", p.p_series_depth},
          {"max_iterations", p.max_iterations}};
}

NodeStateFile node_state_from_json(const nlohmann::json& j) {
  NodeStateFile file;
  try {
    const CpuModel shared =
        j.contains("cpu_model") ? cpu_model_from_json(j["cpu_model"]) : CpuModel::reference_8c16g();
    for (std::size_t i = 0; i < j.at("nodes").size(); ++i) {
      const auto& n = j["nodes"][i];
      NodeSchedState s;
      s.id = n.at("id").get<std::string>();
      s.cores = n.value("cores", 8);
      s.queue = VirtualQueue::for_cores(s.cores, n.value("Q", 0.0));
      s.cpu_onset = n.value("cpu_onset", 0.0);
      s.req_onset = n.value("req_onset", Rps{0});
      s.delay_ms = n.value("delay_ms", 0.0);
      s.active = n.value("active", true);
      s.cpu_model = n.contains("cpu_model") ? cpu_model_from_json(n["cpu_model"]) : shared;
      const std::string where = "nodes[" + std::to_string(i) + "]";
      if (s.cpu_onset < 0 || s.cpu_onset > 1) throw ConfigError(where, "cpu_onset must lie in [0, 1]");
      if (s.req_onset < 0 || s.delay_ms < 0 || s.queue.backlog < 0)
        throw ConfigError(where, "Q, req_onset and delay_ms must be nonnegative");
      file.nodes.push_back(std::move(s));
    }
    const auto params = j.value("params", nlohmann::json::object());
    file.params = dpp_params_from_json(params);
    if (!params.contains("V")) file.params.penalty_weight = default_penalty_weight(file.nodes, file.params.theta);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("node state", e.what());
  }
  return file;
}

nlohmann::json to_json(const ScheduleDecision& d, std::span<const NodeSchedState> states) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t k = 0; k < states.size(); ++k) {
    const bool off = std::find(d.deactivated.begin(), d.deactivated.end(), k) != d.deactivated.end();
    nodes.push_back({{"id", states[k].id},
                     {"delta_req", d.delta_req[k]},
                     {"v_dpp_before", d.v_before[k]},
                     {"v_dpp_after", d.v_after[k]},
                     {"deactivated", off}});
  }
  return {{"nodes", nodes},
          {"total_dpp_before", d.total_dpp_before},
          {"total_dpp_after", d.total_dpp_after},
          {"iterations", d.iterations},
          {"accepted", d.accepted}};
}

}  // namespace arcturus::lastmile
