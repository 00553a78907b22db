#pragma once

// Middle-mile routing as a maximum flow problem with conflicts: relays are
// split into capacity-K arcs, each path carries one unit of flow, and a
// carousel greedy searches for many diverse latency-bounded paths.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "arcturus/error.hpp"
#include "arcturus/model.hpp"

namespace arcturus::midmile {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct MfpcArc {
  int from = 0;
  int to = 0;
  double capacity = kUnbounded;  // u_ij
  double cost = 0.0;             // l_ij, milliseconds
  bool split = false;            // (i_k, j_k) arc of a relay node
};

struct MfpcGraph {
  std::vector<std::string> vertices;  // "s", "<id>:in", "<id>:out", "t" style names
  std::vector<MfpcArc> arcs;
  std::vector<std::vector<int>> out_arcs;
  int source = 0;
  int sink = 0;
  int k = 1;              // requested path count
  double theta_a = 1.0;   // admission threshold
  double theta_l = kUnbounded;  // latency bound

  std::size_t vertex_count() const { return vertices.size(); }
  // Paths an arc may carry: floor(theta_a * u), unbounded arcs admit any number.
  int admission(int arc) const;
  // Adds an arc and keeps the adjacency in sync.
  int add_arc(MfpcArc arc);
};

class MissingTerminals : public Error {
 public:
  MissingTerminals() : Error("MissingTerminals: topology has no source/sink pair") {}
};

class TooLarge : public Error {
 public:
  explicit TooLarge(std::size_t vertices)
      : Error("TooLarge: brute force capped, graph has " + std::to_string(vertices) + " vertices") {}
};

// Each node other than s and t becomes the arc (i_k, j_k) with capacity K and
// cost equal to its processing latency; original arcs keep their latency and
// unbounded capacity.
MfpcGraph transform(const Topology& topo, int k, double theta_a, double theta_l);

// A path is the ordered list of arc indices from source to sink.
using Path = std::vector<int>;

double path_latency(const MfpcGraph& g, const Path& path);
std::vector<int> path_vertices(const MfpcGraph& g, const Path& path);

struct Objective {
  int flow = 0;
  double cos_sim = 0.0;
  double max_latency = 0.0;
};
// Higher flow first, then lower cosine similarity, then lower worst latency.
bool better(const Objective& a, const Objective& b);
bool at_least_as_good(const Objective& a, const Objective& b);

struct PathSolution {
  std::vector<Path> paths;  // oldest first
  std::vector<int> tau;     // selection frequency per path
  int flow() const { return static_cast<int>(paths.size()); }
  Objective objective(const MfpcGraph& g) const;
};

struct CarouselParams {
  int alpha = 2;
  double beta = 0.7;
  void validate() const;  // throws ConfigError
};

// Newest paths removed before the carousel loop: floor(beta * size).
std::size_t carousel_drop_count(int initial_size, double beta);

// Shortest feasible paths added one unit at a time until K or exhaustion.
PathSolution greedy_initial(const MfpcGraph& g);
PathSolution carousel_greedy(const MfpcGraph& g, const CarouselParams& params);

struct BruteForceLimits {
  std::size_t max_vertices = 14;
  std::size_t max_paths = 4096;
};
PathSolution brute_force_mfpc(const MfpcGraph& g, BruteForceLimits limits = {});

// Mean pairwise cosine similarity of 0/1 arc-incidence vectors.
struct Diversity {
  int count = 0;
  double cos_sim = 0.0;
};
Diversity path_diversity(const std::vector<Path>& paths);

// Re-derives unit flows, conservation, admission, path count and latency
// from the raw paths. Returns one message per violated constraint.
std::vector<std::string> validate_solution(const MfpcGraph& g, const PathSolution& solution);

struct GridCell {
  int alpha = 0;
  double beta = 0.0;
  Diversity diversity;
  double elapsed_ms = 0.0;
};

struct GridResult {
  CarouselParams best_params;
  PathSolution best;
  std::vector<GridCell> cells;
  double elapsed_ms = 0.0;
};

// Lexicographic best by (F, -cos_sim); earliest cell wins ties.
GridResult grid_search(const MfpcGraph& g, const std::vector<int>& alphas, const std::vector<double>& betas);

nlohmann::json to_json(const MfpcGraph& g, const PathSolution& solution);
// Nodes,alpha,beta,PathCnt,CosSim,Time header plus one row per cell.
std::string grid_csv(const MfpcGraph& g, const std::vector<GridCell>& cells, std::size_t topology_nodes);

}  // namespace arcturus::midmile
