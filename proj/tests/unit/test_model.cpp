#include <doctest.h>

#include <filesystem>

#include "arcturus/error.hpp"
#include "arcturus/model.hpp"

using namespace arcturus;

namespace {

Topology line3() {
  Topology t;
  t.nodes = {{"a", 4, "asia", "t1"}, {"b", 8, "asia", "t1"}, {"c", 16, "us-east", "t2"}};
  t.arcs = {{"a", "b", 12.5}, {"b", "c", 30.0}};
  t.source = "a";
  t.sink = "c";
  return t;
}

}  // namespace

TEST_CASE("well-formed line graph has no violations") { CHECK(validate_topology(line3()).empty()); }

TEST_CASE("arc to an unknown node is reported once and names the arc") {
  auto t = line3();
  t.arcs.push_back({"b", "zz", 1.0});
  const auto v = validate_topology(t);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("zz") != std::string::npos);
}

TEST_CASE("negative latency is reported once") {
  auto t = line3();
  t.arcs[0].latency_ms = -1.0;
  CHECK(validate_topology(t).size() == 1);
}

TEST_CASE("self loops, zero cores and negative cost are violations") {
  auto t = line3();
  t.arcs.push_back({"a", "a", 1.0});
  CHECK(validate_topology(t).size() == 1);
  t = line3();
  t.nodes[0].cores = 0;
  CHECK(validate_topology(t).size() == 1);
  t = line3();
  t.nodes[1].cost_per_hour = -0.1;
  CHECK(validate_topology(t).size() == 1);
}

TEST_CASE("serialization round-trips") {
  const auto t = line3();
  CHECK(parse_topology(serialize_topology(t)) == t);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto g = generate_topology(12, 0.3, seed);
    CHECK(validate_topology(g).empty());
    CHECK(parse_topology(serialize_topology(g)) == g);
  }
}

TEST_CASE("file round-trip") {
  const auto path = std::filesystem::temp_directory_path() / "arcturus_topology_test.json";
  save_topology(line3(), path);
  CHECK(load_topology(path) == line3());
  std::filesystem::remove(path);
}

TEST_CASE("bidirectional arcs add the reverse direction") {
  const auto j = nlohmann::json::parse(R"({"nodes":[{"id":"x"},{"id":"y"}],
                                           "arcs":[{"src":"x","dst":"y","latency_ms":7,"bidirectional":true}]})");
  const auto t = topology_from_json(j);
  REQUIRE(t.arcs.size() == 2);
  CHECK(t.arcs[1] == Arc{"y", "x", 7.0});
}

TEST_CASE("invalid topology files raise ConfigError") {
  CHECK_THROWS_AS(parse_topology("{"), ConfigError);
  CHECK_THROWS_AS(parse_topology(R"({"nodes":[{"id":"a"}],"arcs":[{"src":"a","dst":"q","latency_ms":1}]})"),
                  ConfigError);
}

TEST_CASE("generated topology is deterministic and picks distinct terminals") {
  const auto a = generate_topology(20, 0.4, 9), b = generate_topology(20, 0.4, 9);
  CHECK(a == b);
  REQUIRE(a.source);
  REQUIRE(a.sink);
  CHECK(*a.source != *a.sink);
  CHECK(a.nodes.size() == 20);
}

TEST_CASE("slot clock") {
  SlotClock c;
  CHECK(c.slot_length_ms == 5000);
  c.advance();
  c.advance();
  CHECK(c.now_ms() == 10000);
  CHECK(c.slot_seconds() == doctest::Approx(5.0));
}
