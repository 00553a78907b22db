#include "arcturus/cost.hpp"

#include <cmath>
#include <cstdio>

namespace arcturus::cost {

Money Money::from_dollars(double dollars) { return {std::llround(dollars * 1e6)}; }

std::string Money::to_string() const {
  const std::int64_t magnitude = micros < 0 ? -micros : micros;
  const std::int64_t cents = (magnitude + 5000) / 10000;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s$%lld.%02lld", micros < 0 ? "-" : "", static_cast<long long>(cents / 100),
                static_cast<long long>(cents % 100));
  return buf;
}

Deployment deployment_from_json(const nlohmann::json& j) {
  Deployment d;
  try {
    const auto nodes = j.value("nodes", nlohmann::json::array());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      const std::string where = "nodes[" + std::to_string(i) + "]";
      NodeGroup g{n.value("name", n.value("id", where)), n.value("count", std::int64_t{1}),
                  Money::from_dollars(n.at("cost_per_hour").get<double>())};
      if (g.hourly.micros < 0) throw ConfigError(where, "cost_per_hour must be nonnegative");
      if (g.count < 0) throw ConfigError(where, "count must be nonnegative");
      d.nodes.push_back(std::move(g));
    }
    const auto traffic = j.value("traffic", nlohmann::json::array());
    for (std::size_t i = 0; i < traffic.size(); ++i) {
      const auto& t = traffic[i];
      const std::string where = "traffic[" + std::to_string(i) + "]";
      TrafficItem item{t.value("name", where), std::llround(t.at("gb").get<double>() * 1000.0),
                       Money::from_dollars(t.at("cost_per_gb").get<double>())};
      if (item.per_gb.micros < 0) throw ConfigError(where, "cost_per_gb must be nonnegative");
      if (item.milli_gb < 0) throw ConfigError(where, "gb must be nonnegative");
      d.traffic.push_back(std::move(item));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("deployment", e.what());
  }
  return d;
}

CostReport cost_report(const Deployment& d) {
  CostReport r;
  for (const auto& g : d.nodes) {
    r.compute_hourly = r.compute_hourly + g.hourly * g.count;
    r.node_count += g.count;
  }
  for (const auto& t : d.traffic) {
    const std::int64_t product = t.per_gb.micros * t.milli_gb;
    r.bandwidth = r.bandwidth + Money{(product + 500) / 1000};
  }
  r.total = r.compute_hourly + r.bandwidth;
  return r;
}

nlohmann::json to_json(const CostReport& r) {
  return {{"nodes", r.node_count},
          {"compute_per_hour", r.compute_hourly.to_string()},
          {"bandwidth", r.bandwidth.to_string()},
          {"total", r.total.to_string()},
          {"compute_per_hour_micros", r.compute_hourly.micros},
          {"bandwidth_micros", r.bandwidth.micros},
          {"total_micros", r.total.micros}};
}

}  // namespace arcturus::cost
