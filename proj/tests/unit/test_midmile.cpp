#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "arcturus/midmile.hpp"
#include "oracles.hpp"

using namespace arcturus;
using namespace arcturus::midmile;

namespace {

NodeSpec node(const char* id) {
  NodeSpec n;
  n.id = id;
  return n;
}

Topology line() {
  Topology t;
  t.nodes = {node("s"), node("m"), node("t")};
  t.arcs = {{"s", "m", 5}, {"m", "t", 7}};
  t.source = "s";
  t.sink = "t";
  return t;
}

Topology diamond(double la = 10, double lb = 10) {
  Topology t;
  t.nodes = {node("s"), node("a"), node("b"), node("t")};
  t.arcs = {{"s", "a", la}, {"s", "b", lb}, {"a", "t", la}, {"b", "t", lb}};
  t.source = "s";
  t.sink = "t";
  return t;
}

std::set<std::string> vertex_names(const MfpcGraph& g, const Path& p) {
  std::set<std::string> out;
  for (int v : path_vertices(g, p)) out.insert(g.vertices[static_cast<std::size_t>(v)]);
  return out;
}

}  // namespace

TEST_CASE("line graph transform") {
  const auto g = transform(line(), 3, 1.0, kUnbounded);
  CHECK(g.vertex_count() == 4);
  CHECK(std::count(g.vertices.begin(), g.vertices.end(), "m:in") == 1);
  CHECK(std::count(g.vertices.begin(), g.vertices.end(), "m:out") == 1);
  CHECK(g.arcs.size() == 2 + 1);
  const auto split = std::find_if(g.arcs.begin(), g.arcs.end(), [](const MfpcArc& a) { return a.split; });
  REQUIRE(split != g.arcs.end());
  CHECK(split->capacity == 3);
  CHECK(g.vertices[static_cast<std::size_t>(split->from)] == "m:in");
  for (const auto& a : g.arcs)
    if (!a.split) CHECK(std::isinf(a.capacity));
}

TEST_CASE("vertex and arc counts follow the splitting rule") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto topo = generate_topology(9, 0.4, seed);
    const auto g = transform(topo, 2, 1.0, kUnbounded);
    CHECK(g.vertex_count() == 2 * (topo.nodes.size() - 2) + 2);
    CHECK(g.arcs.size() == topo.arcs.size() + topo.nodes.size() - 2);
  }
}

TEST_CASE("missing terminals") {
  auto t = line();
  t.sink.reset();
  CHECK_THROWS_AS(transform(t, 1, 1.0, kUnbounded), MissingTerminals);
}

TEST_CASE("diamond: two disjoint paths") {
  const auto g = transform(diamond(), 2, 1.0, kUnbounded);
  const auto greedy = greedy_initial(g);
  CHECK(greedy.flow() == 2);
  const auto brute = brute_force_mfpc(g);
  CHECK(brute.flow() == 2);
  REQUIRE(brute.paths.size() == 2);
  const auto a = vertex_names(g, brute.paths[0]), b = vertex_names(g, brute.paths[1]);
  std::vector<std::string> shared;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(shared));
  CHECK(shared == std::vector<std::string>{"s", "t"});
  CHECK(path_diversity(brute.paths).cos_sim == 0.0);
  CHECK(validate_solution(g, brute).empty());
  CHECK(validate_solution(g, carousel_greedy(g, {})).empty());
}

TEST_CASE("latency bound excludes paths") {
  const auto none = transform(line(), 1, 1.0, 11.0);
  CHECK(greedy_initial(none).flow() == 0);
  const auto ok = transform(line(), 1, 1.0, 12.0);
  CHECK(greedy_initial(ok).flow() == 1);
  const auto partial = transform(diamond(10, 30), 2, 1.0, 25.0);
  const auto sol = greedy_initial(partial);
  REQUIRE(sol.flow() == 1);
  CHECK(path_latency(partial, sol.paths[0]) == doctest::Approx(20.0));
}

TEST_CASE("bottleneck relay limits flow to one") {
  Topology t;
  t.nodes = {node("s"), node("x"), node("a"), node("b"), node("t")};
  t.arcs = {{"s", "x", 1}, {"x", "a", 1}, {"x", "b", 1}, {"a", "t", 1}, {"b", "t", 1}};
  t.source = "s";
  t.sink = "t";
  const auto g = transform(t, 1, 1.0, kUnbounded);
  CHECK(brute_force_mfpc(g).flow() == 1);
  CHECK(carousel_greedy(g, {}).flow() == 1);
}

TEST_CASE("admission threshold scales relay capacity") {
  Topology t;
  t.nodes = {node("s"), node("x"), node("a"), node("b"), node("t")};
  t.arcs = {{"s", "x", 1}, {"x", "a", 1}, {"x", "b", 1}, {"a", "t", 1}, {"b", "t", 1}};
  t.source = "s";
  t.sink = "t";
  // x admits floor(theta_a * 4) distinct paths; two exist through it.
  CHECK(brute_force_mfpc(transform(t, 4, 1.0, kUnbounded)).flow() == 2);
  CHECK(brute_force_mfpc(transform(t, 4, 0.25, kUnbounded)).flow() == 1);
  CHECK(brute_force_mfpc(transform(t, 4, 0.2, kUnbounded)).flow() == 0);
  CHECK(transform(t, 4, 0.5, kUnbounded).admission(0) >= 0);
}

TEST_CASE("K = 0 yields nothing") {
  const auto g = transform(diamond(), 0, 1.0, kUnbounded);
  CHECK(brute_force_mfpc(g).flow() == 0);
  CHECK(carousel_greedy(g, {}).flow() == 0);
}

TEST_CASE("single feasible path: carousel equals greedy") {
  const auto g = transform(line(), 1, 1.0, kUnbounded);
  const auto greedy = greedy_initial(g);
  const auto car = carousel_greedy(g, {});
  CHECK(car.paths == greedy.paths);
}

TEST_CASE("carousel never regresses and stays feasible") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto topo = oracle::small_topology(seed, 5, 0.6);
    const auto g = transform(topo, 3, seed % 2 ? 1.0 : 0.34, kUnbounded);
    const auto greedy = greedy_initial(g);
    const auto car = carousel_greedy(g, {2, 0.7});
    CHECK(at_least_as_good(car.objective(g), greedy.objective(g)));
    CHECK(validate_solution(g, car).empty());
    CHECK(car.flow() <= brute_force_mfpc(g).flow());
    CHECK(carousel_greedy(g, {2, 0.7}).paths == car.paths);
  }
}

TEST_CASE("beta drop count") {
  CHECK(carousel_drop_count(10, 0.7) == 7);
  CHECK(carousel_drop_count(3, 0.7) == 2);
  CHECK(carousel_drop_count(0, 0.7) == 0);
  CHECK_THROWS_AS((CarouselParams{0, 0.5}.validate()), ConfigError);
  CHECK_THROWS_AS((CarouselParams{1, 1.0}.validate()), ConfigError);
}

TEST_CASE("brute force size cap") {
  const auto g = transform(generate_topology(12, 0.5, 1), 2, 1.0, kUnbounded);
  CHECK_THROWS_AS(brute_force_mfpc(g), TooLarge);
}

TEST_CASE("path diversity") {
  CHECK(path_diversity({}).count == 0);
  CHECK(path_diversity({}).cos_sim == 0.0);
  const Path p = {0, 1, 2, 3};
  CHECK(path_diversity({p, p}).cos_sim == doctest::Approx(1.0));
  CHECK(path_diversity({{0, 1}, {2, 3}}).cos_sim == 0.0);
  // |A|=4, |B|=4 sharing 2, |C|=2 disjoint: cos(A,B) = 2/4, others 0; mean over 3 pairs.
  const Path a = {0, 1, 2, 3}, b = {0, 1, 4, 5}, c = {6, 7};
  const auto d = path_diversity({a, b, c});
  CHECK(d.count == 3);
  CHECK(d.cos_sim == doctest::Approx(0.5 / 3.0));
}

TEST_CASE("validator catches broken solutions") {
  const auto g = transform(diamond(), 1, 1.0, kUnbounded);
  auto sol = greedy_initial(g);
  REQUIRE(sol.flow() == 1);
  auto too_many = sol;
  too_many.paths.push_back(sol.paths[0]);
  too_many.tau.push_back(1);
  CHECK_FALSE(validate_solution(g, too_many).empty());
  auto broken = sol;
  broken.paths[0].erase(broken.paths[0].begin() + 1);
  CHECK_FALSE(validate_solution(g, broken).empty());
  const auto bounded = transform(diamond(), 1, 1.0, 5.0);
  CHECK_FALSE(validate_solution(bounded, sol).empty());
}

TEST_CASE("grid search") {
  const auto g = transform(generate_topology(20, 0.4, 3), 8, 0.25, kUnbounded);
  const auto one = grid_search(g, {2}, {0.7});
  CHECK(one.cells.size() == 1);
  CHECK(one.best_params.alpha == 2);
  const auto full = grid_search(g, {1, 2, 3}, {0.6, 0.7, 0.8});
  CHECK(full.cells.size() == 9);
  for (const auto& c : full.cells) {
    CHECK(c.diversity.count <= full.best.flow());
  }
  CHECK(validate_solution(g, full.best).empty());
  const auto csv = grid_csv(g, full.cells, 20);
  CHECK(csv.rfind("Nodes,alpha,beta,PathCnt,CosSim,Time\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
}

TEST_CASE("solution json lists vertex paths") {
  const auto g = transform(diamond(), 2, 1.0, kUnbounded);
  const auto j = to_json(g, greedy_initial(g));
  CHECK(j["flow"] == 2);
  REQUIRE(j["paths"].size() == 2);
  CHECK(j["paths"][0]["vertices"].front() == "s");
}
