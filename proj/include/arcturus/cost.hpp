#pragma once

// Deployment cost arithmetic in integer micro-dollars.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "arcturus/error.hpp"

namespace arcturus::cost {

// Whole micro-dollars; sums and products by counts are exact.
struct Money {
  std::int64_t micros = 0;

  static Money from_dollars(double dollars);
  double dollars() const { return static_cast<double>(micros) / 1e6; }
  // "$6.60" style, rounded half away from zero to cents.
  std::string to_string() const;

  Money operator+(Money o) const { return {micros + o.micros}; }
  Money operator*(std::int64_t n) const { return {micros * n}; }
  bool operator==(const Money&) const = default;
  auto operator<=>(const Money&) const = default;
};

struct NodeGroup {
  std::string name;
  std::int64_t count = 1;
  Money hourly;
};

struct TrafficItem {
  std::string name;
  // Traffic in thousandths of a GB so that fractional volumes stay exact.
  std::int64_t milli_gb = 0;
  Money per_gb;
};

struct Deployment {
  std::vector<NodeGroup> nodes;
  std::vector<TrafficItem> traffic;
};

struct CostReport {
  Money compute_hourly;
  Money bandwidth;
  Money total;
  std::int64_t node_count = 0;
};

// {"nodes": [{"name", "count", "cost_per_hour"}], "traffic": [{"name", "gb", "cost_per_gb"}]}
Deployment deployment_from_json(const nlohmann::json& j);
CostReport cost_report(const Deployment& deployment);
nlohmann::json to_json(const CostReport& report);

}  // namespace arcturus::cost
