#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "arcturus/sim.hpp"

using namespace arcturus;
using namespace arcturus::sim;

namespace {

const std::filesystem::path kScenarios = ARCTURUS_SCENARIO_DIR;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json minimal() {
  return {{"topology", {{"nodes", {{{"id", "a"}, {"cores", 8}}, {{"id", "b"}, {"cores", 8}}}},
                        {"arcs", {{{"src", "a"}, {"dst", "b"}, {"latency_ms", 5}, {"bidirectional", true}}}}}},
          {"duration_slots", 10},
          {"workload", {{"base_rps", 1000}}}};
}

}  // namespace

TEST_CASE("workload generation") {
  WorkloadProfile w;
  w.base_rps = 1000;
  w.diurnal_amplitude = 0.3;
  w.diurnal_period_slots = 100;
  w.noise_sigma = 0.1;
  w.random.rate = 0.05;
  w.spikes = {{10, 4.0, 2}};
  const auto a = generate_workload(w, 7, 500);
  CHECK(a == generate_workload(w, 7, 500));
  CHECK(a != generate_workload(w, 8, 500));
  for (double x : a) CHECK(x >= 0);

  WorkloadProfile flat;
  flat.base_rps = 500;
  flat.spikes = {{3, 2.0, 2}};
  const auto f = generate_workload(flat, 1, 6);
  CHECK(f == std::vector<double>{500, 500, 500, 1000, 1000, 500});

  WorkloadProfile bad;
  bad.base_rps = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.diurnal_amplitude = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cpu ground truth passes through its knots") {
  CpuGroundTruth t{0.05, 25000};
  CHECK(t.cpu(0) == doctest::Approx(0.05));
  CHECK(t.cpu(15000) == doctest::Approx(0.6));
  CHECK(t.cpu(20000) == doctest::Approx(0.8));
  CHECK(t.cpu(25000) == doctest::Approx(1.0));
  CHECK(t.cpu(90000) == doctest::Approx(1.0));
  NodeSpec n;
  n.cores = 8;
  CHECK(node_max_rps(n, {}) == doctest::Approx(25000));
}

TEST_CASE("scenario loading and validation") {
  CHECK_NOTHROW(scenario_from_json(minimal()));
  CHECK_THROWS_AS(load_scenario(kScenarios / "does_not_exist.json"), ConfigError);
  try {
    load_scenario("/nonexistent/scenario.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/scenario.json") != std::string::npos);
  }

  auto j = minimal();
  j["failures"] = {{{"target", "node:zzz"}, {"start_slot", 1}}};
  CHECK_THROWS_AS(scenario_from_json(j), UnknownTarget);
  j["failures"] = {{{"target", "link:a>zzz"}, {"start_slot", 1}}};
  CHECK_THROWS_AS(scenario_from_json(j), UnknownTarget);
  j["failures"] = {{{"target", "rack:a"}, {"start_slot", 1}}};
  CHECK_THROWS_AS(scenario_from_json(j), UnknownTarget);

  j = minimal();
  j["lastmile"] = {{"scheduler", "random"}};
  CHECK_THROWS_AS(scenario_from_json(j), ConfigError);
  j = minimal();
  j["workload"]["base_rps"] = "lots";
  CHECK_THROWS_AS(scenario_from_json(j), ConfigError);
  j = minimal();
  j.erase("topology");
  CHECK_THROWS_AS(scenario_from_json(j), ConfigError);
  j = minimal();
  j["flows"] = {{{"id", "f"}, {"ingress", "nowhere"}, {"dest_region", "x"}}};
  CHECK_THROWS_AS(scenario_from_json(j), ConfigError);
}

TEST_CASE("every bundled scenario loads") {
  for (const auto& entry : std::filesystem::directory_iterator(kScenarios)) {
    const auto name = entry.path().filename().string();
    if (name.find("topology") != std::string::npos || name == "deployment_50.json" || name == "diamond.json" ||
        name.rfind("lastmile_", 0) == 0)
      continue;
    CAPTURE(name);
    CHECK_NOTHROW(load_scenario(entry.path()));
  }
}

TEST_CASE("quickstart run is deterministic and violation free") {
  const auto sc = load_scenario(kScenarios / "quickstart.json");
  const auto a = run_scenario(sc);
  CHECK(a.violations.empty());
  CHECK(a.slots.size() == static_cast<std::size_t>(sc.duration_slots));
  const auto b = run_scenario(sc);
  CHECK(a.nodes_csv() == b.nodes_csv());
  CHECK(a.slots_csv() == b.slots_csv());
  CHECK(a.flows_csv() == b.flows_csv());
  CHECK(a.events_jsonl() == b.events_jsonl());

  // Conservation per slot: every arrival is delivered or dropped.
  for (const auto& s : a.slots) CHECK(s.delivered + s.dropped_overload + s.dropped_no_node == s.arrivals);

  const auto summary = summarize(a);
  CHECK(summary.violations == 0);
  CHECK(summary.failovers >= 1);
  CHECK(summary.mean_cpu > 0);

  const auto dir = std::filesystem::temp_directory_path() / "arcturus_test_sim_out";
  std::filesystem::remove_all(dir);
  write_metrics(a, dir);
  for (const char* f : {"nodes.csv", "slots.csv", "flows.csv", "events.jsonl", "summary.json"})
    CHECK(std::filesystem::exists(dir / f));
  CHECK(slurp(dir / "slots.csv") == a.slots_csv());
  std::filesystem::remove_all(dir);
}

TEST_CASE("seed changes the run") {
  auto sc = load_scenario(kScenarios / "quickstart.json");
  const auto a = run_scenario(sc);
  sc.seed = 43;
  CHECK(run_scenario(sc).slots_csv() != a.slots_csv());
}
