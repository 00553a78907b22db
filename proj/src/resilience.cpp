#include "arcturus/resilience.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace arcturus::resilience {

namespace {

constexpr double kImprovementMs = 1e-9;

}  // namespace

bool FailureSet::crosses(const Route& route) const {
  for (std::size_t i = 0; i < route.size(); ++i) {
    if (nodes.contains(route[i])) return true;
    if (i + 1 < route.size() && links.contains({route[i], route[i + 1]})) return true;
  }
  return false;
}

std::optional<double> NetworkView::link_latency(const NodeId& a, const NodeId& b) const {
  if (failed.nodes.contains(a) || failed.nodes.contains(b) || failed.links.contains({a, b})) return std::nullopt;
  for (const auto& arc : topo->arcs) {
    if (arc.src != a || arc.dst != b) continue;
    if (digest) {
      if (auto exact = telemetry::exact_latency(*digest, a, b)) return *exact;
    }
    return arc.latency_ms;
  }
  return std::nullopt;
}

double NetworkView::route_latency(const Route& route) const {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    auto l = link_latency(route[i], route[i + 1]);
    if (!l) return std::numeric_limits<double>::infinity();
    total += *l;
  }
  return total;
}

void BackupParams::validate() const {
  if (!(theta_l > 0)) throw ConfigError("resilience.theta_l", "must be positive");
  if (!(load_threshold >= 0 && load_threshold <= 1)) throw ConfigError("resilience.load_threshold", "must lie in [0, 1]");
  if (n_backups < 1) throw ConfigError("resilience.n_backups", "must be >= 1");
  if (healthy_probes < 1) throw ConfigError("resilience.healthy_probes", "must be >= 1");
}

Route shortest_route(const NetworkView& view, const NodeId& from, const std::string& region,
                     const std::set<NodeId>& avoid) {
  const Topology& topo = *view.topo;
  const auto start = topo.index_of(from);
  if (!start || view.failed.nodes.contains(from)) return {};
  const std::size_t n = topo.nodes.size();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> prev(n, -1);
  using Label = std::pair<double, std::size_t>;
  std::priority_queue<Label, std::vector<Label>, std::greater<>> open;
  dist[*start] = 0.0;
  open.emplace(0.0, *start);
  std::optional<std::size_t> reached;
  while (!open.empty()) {
    const auto [d, v] = open.top();
    open.pop();
    if (d > dist[v]) continue;
    if (topo.nodes[v].region == region) {
      reached = v;
      break;
    }
    for (const auto& arc : topo.arcs) {
      if (arc.src != topo.nodes[v].id || avoid.contains(arc.dst)) continue;
      const auto w = topo.index_of(arc.dst);
      const auto l = view.link_latency(arc.src, arc.dst);
      if (!w || !l) continue;
      if (d + *l < dist[*w]) {
        dist[*w] = d + *l;
        prev[*w] = static_cast<int>(v);
        open.emplace(dist[*w], *w);
      }
    }
  }
  if (!reached) return {};
  Route route;
  for (int v = static_cast<int>(*reached); v >= 0; v = prev[static_cast<std::size_t>(v)])
    route.push_back(topo.nodes[static_cast<std::size_t>(v)].id);
  std::reverse(route.begin(), route.end());
  return route;
}

std::vector<Route> compute_backups(const NetworkView& view, const NodeId& node, const std::string& region,
                                   const NodeId& primary_next_hop, const BackupParams& params) {
  std::vector<std::pair<double, Route>> found;
  std::set<NodeId> tried;
  for (const auto& arc : view.topo->arcs) {
    if (arc.src != node || arc.dst == primary_next_hop || arc.dst == node || !tried.insert(arc.dst).second) continue;
    if (!view.link_latency(node, arc.dst)) continue;
    if (auto hop = view.load_share.find(arc.dst); hop != view.load_share.end()) {
      if (auto share = hop->second.find(region); share != hop->second.end() && share->second > params.load_threshold)
        continue;
    }
    Route tail = shortest_route(view, arc.dst, region, {node});
    if (tail.empty()) continue;
    Route route{node};
    route.insert(route.end(), tail.begin(), tail.end());
    const double latency = view.route_latency(route);
    if (latency <= params.theta_l) found.emplace_back(latency, std::move(route));
  }
  if (found.empty()) throw NoBackup(node, region);
  std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Route> out;
  for (auto& [latency, route] : found) {
    if (static_cast<int>(out.size()) == params.n_backups) break;
    out.push_back(std::move(route));
  }
  return out;
}

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Primary: return "primary";
    case Mode::OnBackup: return "on_backup";
    case Mode::Reverted: return "reverted";
  }
  return "?";
}

const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Reroute: return "reroute";
    case ActionKind::ReverseNotify: return "notify";
    case ActionKind::ControllerEvent: return "controller";
    case ActionKind::Degraded: return "degraded";
    case ActionKind::Improve: return "improve";
    case ActionKind::Revert: return "revert";
    case ActionKind::Alarm: return "alarm";
  }
  return "?";
}

std::string FailureEvent::describe() const {
  return kind == Kind::Node ? "node " + a : "link " + a + ">" + b;
}

FailoverEngine::FailoverEngine(BackupParams params) : params_(params) { params_.validate(); }

const Flow* FailoverEngine::find(const std::string& id) const {
  for (const auto& f : flows_)
    if (f.id == id) return &f;
  return nullptr;
}

void FailoverEngine::add_flow(Flow flow, const NetworkView& view, std::int64_t slot) {
  if (flow.primary.empty()) flow.primary = shortest_route(view, flow.ingress, flow.dest_region);
  if (flow.primary.empty()) throw ConfigError("flows." + flow.id, "no route from " + flow.ingress + " to region " + flow.dest_region);
  flow.active = flow.primary;
  flow.mode = Mode::Primary;
  flow.since_slot = slot;
  std::vector<Action> ignored;
  refresh_backups(flow, view, ignored, slot);
  flows_.push_back(std::move(flow));
}

void FailoverEngine::refresh_backups(Flow& flow, const NetworkView& view, std::vector<Action>& actions,
                                     std::int64_t slot) {
  if (flow.primary.size() < 2) {
    flow.backups.clear();
    return;
  }
  const bool had = !flow.backups.empty();
  try {
    flow.backups = compute_backups(view, flow.ingress, flow.dest_region, flow.primary[1], params_);
  } catch (const NoBackup& e) {
    flow.backups.clear();
    if (had) actions.push_back({ActionKind::Alarm, flow.id, slot, {}, e.what()});
  }
}

std::vector<Action> FailoverEngine::displace(Flow& flow, const NetworkView& view, std::int64_t slot,
                                             const std::string& cause) {
  std::vector<Action> out;
  Route survivors;
  for (std::size_t i = 0; i < flow.active.size(); ++i) {
    if (view.failed.nodes.contains(flow.active[i])) break;
    survivors.push_back(flow.active[i]);
    if (i + 1 < flow.active.size() && view.failed.links.contains({flow.active[i], flow.active[i + 1]})) break;
  }
  std::reverse(survivors.begin(), survivors.end());

  const auto backup = std::find_if(flow.backups.begin(), flow.backups.end(),
                                   [&](const Route& r) { return r != flow.active && !view.failed.crosses(r); });
  if (backup == flow.backups.end()) {
    flow.active.clear();
    flow.degraded = true;
    flow.mode = Mode::OnBackup;
    flow.since_slot = slot;
    flow.healthy_streak = 0;
    out.push_back({ActionKind::Degraded, flow.id, slot, {}, cause});
    out.push_back({ActionKind::ControllerEvent, flow.id, slot, {}, cause + "; no backup"});
    return out;
  }
  flow.active = *backup;
  flow.mode = Mode::OnBackup;
  flow.since_slot = slot;
  flow.healthy_streak = 0;
  out.push_back({ActionKind::Reroute, flow.id, slot, flow.active, cause});
  out.push_back({ActionKind::ReverseNotify, flow.id, slot, survivors, "reverse hop_list toward ingress"});
  out.push_back({ActionKind::ControllerEvent, flow.id, slot, flow.active, cause + "; recalculation requested"});
  return out;
}

std::vector<Action> FailoverEngine::on_failure(const FailureEvent& event, const NetworkView& view, std::int64_t slot) {
  std::vector<Action> out;
  for (auto& flow : flows_) {
    if (flow.degraded || !view.failed.crosses(flow.active)) continue;
    auto actions = displace(flow, view, slot, "failure of " + event.describe());
    out.insert(out.end(), actions.begin(), actions.end());
  }
  return out;
}

std::vector<Action> FailoverEngine::on_cycle(const NetworkView& view, std::int64_t slot) {
  std::vector<Action> out;
  for (auto& flow : flows_) {
    if (flow.mode == Mode::OnBackup && flow.since_slot < slot) {
      Route best = shortest_route(view, flow.ingress, flow.dest_region);
      const double best_latency = best.empty() ? std::numeric_limits<double>::infinity() : view.route_latency(best);
      if (!best.empty() && best != flow.primary && best_latency <= params_.theta_l &&
          (flow.degraded || best_latency < view.route_latency(flow.active) - kImprovementMs)) {
        flow.active = std::move(best);
        flow.degraded = false;
        flow.since_slot = slot;
        out.push_back({ActionKind::Improve, flow.id, slot, flow.active, "scheduler path"});
      }
    }
    refresh_backups(flow, view, out, slot);
  }
  return out;
}

std::vector<Action> FailoverEngine::on_probe(const NetworkView& view, std::int64_t slot) {
  std::vector<Action> out;
  for (auto& flow : flows_) {
    if (flow.mode != Mode::OnBackup) continue;
    if (view.failed.crosses(flow.primary) || view.route_latency(flow.primary) == std::numeric_limits<double>::infinity()) {
      flow.healthy_streak = 0;
      continue;
    }
    if (++flow.healthy_streak >= params_.healthy_probes) {
      flow.active = flow.primary;
      flow.mode = Mode::Reverted;
      flow.degraded = false;
      flow.since_slot = slot;
      flow.healthy_streak = 0;
      out.push_back({ActionKind::Revert, flow.id, slot, flow.active,
                     std::to_string(params_.healthy_probes) + " healthy probes"});
    }
  }
  return out;
}

nlohmann::json to_json(const Action& a, std::int64_t slot_length_ms) {
  return {{"slot", a.slot},
          {"t_ms", a.slot * slot_length_ms},
          {"event", to_string(a.kind)},
          {"flow", a.flow},
          {"route", a.route},
          {"detail", a.detail}};
}

}  // namespace arcturus::resilience
