#include "arcturus/midmile.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <iomanip>
#include <optional>
#include <queue>
#include <set>
#include <sstream>

namespace arcturus::midmile {

namespace {

constexpr double kLatencySlack = 1e-9;

struct SearchMask {
  std::vector<char> banned_arc;
  std::vector<char> banned_vertex;
};

// Dijkstra over usable arcs; ties keep the first label found, so results are
// deterministic in arc order.
std::optional<Path> shortest_path(const MfpcGraph& g, int from, const std::function<bool(int)>& usable,
                                  const SearchMask& mask) {
  const std::size_t n = g.vertex_count();
  std::vector<double> dist(n, kUnbounded);
  std::vector<int> via(n, -1);
  using Label = std::pair<double, int>;
  std::priority_queue<Label, std::vector<Label>, std::greater<>> open;
  dist[static_cast<std::size_t>(from)] = 0.0;
  open.emplace(0.0, from);
  while (!open.empty()) {
    const auto [d, v] = open.top();
    open.pop();
    if (d > dist[static_cast<std::size_t>(v)]) continue;
    if (v == g.sink) break;
    if (d > g.theta_l + kLatencySlack) break;
    for (int a : g.out_arcs[static_cast<std::size_t>(v)]) {
      if (mask.banned_arc[static_cast<std::size_t>(a)] || !usable(a)) continue;
      const auto& arc = g.arcs[static_cast<std::size_t>(a)];
      if (mask.banned_vertex[static_cast<std::size_t>(arc.to)]) continue;
      const double nd = d + arc.cost;
      if (nd < dist[static_cast<std::size_t>(arc.to)]) {
        dist[static_cast<std::size_t>(arc.to)] = nd;
        via[static_cast<std::size_t>(arc.to)] = a;
        open.emplace(nd, arc.to);
      }
    }
  }
  if (via[static_cast<std::size_t>(g.sink)] < 0 && from != g.sink) return std::nullopt;
  Path path;
  for (int v = g.sink; v != from;) {
    const int a = via[static_cast<std::size_t>(v)];
    path.push_back(a);
    v = g.arcs[static_cast<std::size_t>(a)].from;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// Shortest usable path from the source that is not already in `taken`,
// falling back to Yen's loopless enumeration when the very shortest is taken.
std::optional<Path> next_feasible_path(const MfpcGraph& g, const std::function<bool(int)>& usable,
                                       const std::vector<char>& banned, const std::set<Path>& taken) {
  SearchMask mask{banned, std::vector<char>(g.vertex_count(), 0)};
  mask.banned_vertex[static_cast<std::size_t>(g.source)] = 1;
  auto first = shortest_path(g, g.source, usable, mask);
  if (!first || path_latency(g, *first) > g.theta_l + kLatencySlack) return std::nullopt;
  if (!taken.contains(*first)) return first;

  std::vector<Path> accepted{*first};
  std::set<std::pair<double, Path>> candidates;
  std::set<Path> seen{*first};
  const std::size_t limit = taken.size() + 1;
  while (accepted.size() <= limit) {
    const Path& prev = accepted.back();
    const auto verts = path_vertices(g, prev);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      SearchMask spur_mask{banned, std::vector<char>(g.vertex_count(), 0)};
      for (std::size_t j = 0; j <= i; ++j) spur_mask.banned_vertex[static_cast<std::size_t>(verts[j])] = 1;
      const Path root(prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(i));
      for (const auto& p : accepted)
        if (p.size() > i && std::equal(root.begin(), root.end(), p.begin()))
          spur_mask.banned_arc[static_cast<std::size_t>(p[i])] = 1;
      auto spur = shortest_path(g, verts[i], usable, spur_mask);
      if (!spur) continue;
      Path full = root;
      full.insert(full.end(), spur->begin(), spur->end());
      if (seen.insert(full).second) candidates.emplace(path_latency(g, full), full);
    }
    if (candidates.empty()) return std::nullopt;
    auto best = *candidates.begin();
    candidates.erase(candidates.begin());
    if (best.first > g.theta_l + kLatencySlack) return std::nullopt;
    if (!taken.contains(best.second)) return best.second;
    accepted.push_back(std::move(best.second));
  }
  return std::nullopt;
}

// Residual bookkeeping shared by the greedy phases.
class Residual {
 public:
  explicit Residual(const MfpcGraph& g) : g_(g), usage_(g.arcs.size(), 0) {}

  bool usable(int arc) const { return usage_[static_cast<std::size_t>(arc)] < g_.admission(arc); }
  void add(const Path& p) {
    for (int a : p) ++usage_[static_cast<std::size_t>(a)];
  }
  void remove(const Path& p) {
    for (int a : p) --usage_[static_cast<std::size_t>(a)];
  }

 private:
  const MfpcGraph& g_;
  std::vector<int> usage_;
};

// Grows `solution` until it carries K paths or no feasible path remains.
void regrow(const MfpcGraph& g, Residual& residual, const std::vector<char>& banned, PathSolution& solution,
            std::map<Path, int>* frequency) {
  std::set<Path> taken(solution.paths.begin(), solution.paths.end());
  const auto usable = [&](int a) { return residual.usable(a); };
  while (solution.flow() < g.k) {
    auto p = next_feasible_path(g, usable, banned, taken);
    if (!p) break;
    residual.add(*p);
    taken.insert(*p);
    int tau = 1;
    if (frequency) tau = ++(*frequency)[*p];
    solution.paths.push_back(std::move(*p));
    solution.tau.push_back(tau);
  }
}

// Integral max flow with admission capacities (unbounded arcs carry up to K).
int max_flow_bound(const MfpcGraph& g) {
  const std::size_t n = g.vertex_count();
  std::vector<std::vector<int>> cap(n, std::vector<int>(n, 0));
  for (std::size_t a = 0; a < g.arcs.size(); ++a) {
    const auto& arc = g.arcs[a];
    cap[static_cast<std::size_t>(arc.from)][static_cast<std::size_t>(arc.to)] +=
        std::min(g.admission(static_cast<int>(a)), g.k);
  }
  int flow = 0;
  while (flow < g.k) {
    std::vector<int> parent(n, -1);
    parent[static_cast<std::size_t>(g.source)] = g.source;
    std::queue<int> q;
    q.push(g.source);
    while (!q.empty() && parent[static_cast<std::size_t>(g.sink)] < 0) {
      const int v = q.front();
      q.pop();
      for (std::size_t w = 0; w < n; ++w)
        if (parent[w] < 0 && cap[static_cast<std::size_t>(v)][w] > 0) {
          parent[w] = v;
          q.push(static_cast<int>(w));
        }
    }
    if (parent[static_cast<std::size_t>(g.sink)] < 0) break;
    for (int v = g.sink; v != g.source; v = parent[static_cast<std::size_t>(v)]) {
      const int u = parent[static_cast<std::size_t>(v)];
      --cap[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)];
      ++cap[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)];
    }
    ++flow;
  }
  return flow;
}

}  // namespace

int MfpcGraph::admission(int arc) const {
  const double u = arcs.at(static_cast<std::size_t>(arc)).capacity;
  if (std::isinf(u)) return std::numeric_limits<int>::max();
  return static_cast<int>(std::floor(theta_a * u + 1e-9));
}

int MfpcGraph::add_arc(MfpcArc arc) {
  arcs.push_back(arc);
  const int index = static_cast<int>(arcs.size()) - 1;
  if (out_arcs.size() < vertices.size()) out_arcs.resize(vertices.size());
  out_arcs[static_cast<std::size_t>(arc.from)].push_back(index);
  return index;
}

MfpcGraph transform(const Topology& topo, int k, double theta_a, double theta_l) {
  if (!topo.source || !topo.sink || *topo.source == *topo.sink) throw MissingTerminals();
  const auto s = topo.index_of(*topo.source);
  const auto t = topo.index_of(*topo.sink);
  if (!s || !t) throw MissingTerminals();
  if (k < 0) throw ConfigError("K", "must be nonnegative");
  if (!(theta_a >= 0 && theta_a <= 1)) throw ConfigError("theta_a", "must lie in [0, 1]");

  MfpcGraph g;
  g.k = k;
  g.theta_a = theta_a;
  g.theta_l = theta_l;
  g.vertices = {*topo.source, *topo.sink};
  g.source = 0;
  g.sink = 1;
  std::vector<int> in_vertex(topo.nodes.size()), out_vertex(topo.nodes.size());
  in_vertex[*s] = out_vertex[*s] = 0;
  in_vertex[*t] = out_vertex[*t] = 1;
  for (std::size_t i = 0; i < topo.nodes.size(); ++i) {
    if (i == *s || i == *t) continue;
    in_vertex[i] = static_cast<int>(g.vertices.size());
    g.vertices.push_back(topo.nodes[i].id + ":in");
    out_vertex[i] = static_cast<int>(g.vertices.size());
    g.vertices.push_back(topo.nodes[i].id + ":out");
  }
  g.out_arcs.resize(g.vertices.size());
  for (std::size_t i = 0; i < topo.nodes.size(); ++i) {
    if (i == *s || i == *t) continue;
    g.add_arc({in_vertex[i], out_vertex[i], static_cast<double>(k), topo.nodes[i].processing_latency_ms, true});
  }
  for (const auto& arc : topo.arcs) {
    const auto a = topo.index_of(arc.src);
    const auto b = topo.index_of(arc.dst);
    if (!a || !b) throw ConfigError("arcs", "arc " + arc.src + "->" + arc.dst + " references an unknown node");
    g.add_arc({out_vertex[*a], in_vertex[*b], kUnbounded, arc.latency_ms, false});
  }
  return g;
}

double path_latency(const MfpcGraph& g, const Path& path) {
  double total = 0.0;
  for (int a : path) total += g.arcs.at(static_cast<std::size_t>(a)).cost;
  return total;
}

std::vector<int> path_vertices(const MfpcGraph& g, const Path& path) {
  std::vector<int> out;
  if (path.empty()) return out;
  out.push_back(g.arcs.at(static_cast<std::size_t>(path.front())).from);
  for (int a : path) out.push_back(g.arcs.at(static_cast<std::size_t>(a)).to);
  return out;
}

bool better(const Objective& a, const Objective& b) {
  if (a.flow != b.flow) return a.flow > b.flow;
  if (std::abs(a.cos_sim - b.cos_sim) > 1e-12) return a.cos_sim < b.cos_sim;
  return a.max_latency < b.max_latency - 1e-9;
}

bool at_least_as_good(const Objective& a, const Objective& b) { return !better(b, a); }

Objective PathSolution::objective(const MfpcGraph& g) const {
  Objective z;
  z.flow = flow();
  z.cos_sim = path_diversity(paths).cos_sim;
  for (const auto& p : paths) z.max_latency = std::max(z.max_latency, path_latency(g, p));
  return z;
}

void CarouselParams::validate() const {
  if (alpha < 1) throw ConfigError("alpha", "must be a positive integer");
  if (!(beta > 0 && beta < 1)) throw ConfigError("beta", "must lie in (0, 1)");
}

PathSolution greedy_initial(const MfpcGraph& g) {
  PathSolution solution;
  Residual residual(g);
  regrow(g, residual, std::vector<char>(g.arcs.size(), 0), solution, nullptr);
  return solution;
}

std::size_t carousel_drop_count(int initial_size, double beta) {
  return static_cast<std::size_t>(std::floor(beta * initial_size + 1e-9));
}

PathSolution carousel_greedy(const MfpcGraph& g, const CarouselParams& params) {
  params.validate();
  PathSolution current = greedy_initial(g);
  PathSolution best = current;
  Objective z_best = best.objective(g);

  std::map<Path, int> frequency;
  for (const auto& p : current.paths) frequency[p] = 1;
  Residual residual(g);
  for (const auto& p : current.paths) residual.add(p);

  const int initial_size = current.flow();
  const auto drop = carousel_drop_count(initial_size, params.beta);
  for (std::size_t i = 0; i < drop; ++i) {
    residual.remove(current.paths.back());
    current.paths.pop_back();
    current.tau.pop_back();
  }

  const int iterations = params.alpha * initial_size;
  for (int it = 0; it < iterations; ++it) {
    std::vector<char> banned(g.arcs.size(), 0);
    if (!current.paths.empty()) {
      const Path oldest = current.paths.front();
      residual.remove(oldest);
      current.paths.erase(current.paths.begin());
      current.tau.erase(current.tau.begin());
      banned[static_cast<std::size_t>(oldest.front())] = 1;
      if (!current.paths.empty()) {
        const auto top = std::max_element(current.tau.begin(), current.tau.end());  // first max is oldest
        for (int a : current.paths[static_cast<std::size_t>(top - current.tau.begin())])
          banned[static_cast<std::size_t>(a)] = 1;
      }
    }
    regrow(g, residual, banned, current, &frequency);
    const Objective z = current.objective(g);
    if (at_least_as_good(z, z_best)) {
      best = current;
      z_best = z;
    }
  }
  return best;
}

PathSolution brute_force_mfpc(const MfpcGraph& g, BruteForceLimits limits) {
  if (g.vertex_count() > limits.max_vertices) throw TooLarge(g.vertex_count());
  PathSolution out;
  if (g.k <= 0) return out;

  std::vector<Path> paths;
  std::vector<char> on_path(g.vertex_count(), 0);
  Path stack;
  std::function<void(int, double)> dfs = [&](int v, double latency) {
    if (v == g.sink) {
      paths.push_back(stack);
      if (paths.size() > limits.max_paths) throw TooLarge(g.vertex_count());
      return;
    }
    on_path[static_cast<std::size_t>(v)] = 1;
    for (int a : g.out_arcs[static_cast<std::size_t>(v)]) {
      const auto& arc = g.arcs[static_cast<std::size_t>(a)];
      if (on_path[static_cast<std::size_t>(arc.to)] || g.admission(a) < 1) continue;
      if (latency + arc.cost > g.theta_l + kLatencySlack) continue;
      stack.push_back(a);
      dfs(arc.to, latency + arc.cost);
      stack.pop_back();
    }
    on_path[static_cast<std::size_t>(v)] = 0;
  };
  dfs(g.source, 0.0);
  std::stable_sort(paths.begin(), paths.end(),
                   [&](const Path& a, const Path& b) { return path_latency(g, a) < path_latency(g, b); });

  const int ceiling = std::min<int>(max_flow_bound(g), static_cast<int>(paths.size()));
  std::vector<int> usage(g.arcs.size(), 0);
  std::vector<std::size_t> chosen, best_set;
  auto fits = [&](const Path& p) {
    for (int a : p)
      if (usage[static_cast<std::size_t>(a)] >= g.admission(a)) return false;
    return true;
  };
  std::function<void(std::size_t)> search = [&](std::size_t idx) {
    if (chosen.size() > best_set.size()) best_set = chosen;
    if (static_cast<int>(best_set.size()) >= ceiling || static_cast<int>(chosen.size()) >= g.k) return;
    std::size_t compatible = 0;
    for (std::size_t i = idx; i < paths.size(); ++i) compatible += fits(paths[i]) ? 1 : 0;
    if (chosen.size() + compatible <= best_set.size()) return;
    for (std::size_t i = idx; i < paths.size(); ++i) {
      if (!fits(paths[i])) continue;
      for (int a : paths[i]) ++usage[static_cast<std::size_t>(a)];
      chosen.push_back(i);
      search(i + 1);
      chosen.pop_back();
      for (int a : paths[i]) --usage[static_cast<std::size_t>(a)];
      if (static_cast<int>(best_set.size()) >= ceiling) return;
    }
  };
  search(0);
  for (std::size_t i : best_set) {
    out.paths.push_back(paths[i]);
    out.tau.push_back(1);
  }
  return out;
}

Diversity path_diversity(const std::vector<Path>& paths) {
  Diversity d;
  d.count = static_cast<int>(paths.size());
  if (paths.size() < 2) return d;
  std::vector<std::set<int>> sets;
  for (const auto& p : paths) sets.emplace_back(p.begin(), p.end());
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < sets.size(); ++i)
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      std::size_t shared = 0;
      for (int a : sets[i]) shared += sets[j].count(a);
      const double norm = std::sqrt(static_cast<double>(sets[i].size()) * static_cast<double>(sets[j].size()));
      sum += norm > 0 ? static_cast<double>(shared) / norm : 0.0;
      ++pairs;
    }
  d.cos_sim = sum / static_cast<double>(pairs);
  return d;
}

std::vector<std::string> validate_solution(const MfpcGraph& g, const PathSolution& solution) {
  std::vector<std::string> errors;
  const int f = solution.flow();
  if (f > g.k) errors.push_back("flow " + std::to_string(f) + " exceeds K=" + std::to_string(g.k));
  std::vector<long> arc_flow(g.arcs.size(), 0);
  for (std::size_t p = 0; p < solution.paths.size(); ++p) {
    const auto& path = solution.paths[p];
    const std::string tag = "path " + std::to_string(p) + ": ";
    if (path.empty()) {
      errors.push_back(tag + "empty");
      continue;
    }
    bool broken = false;
    for (int a : path)
      if (a < 0 || static_cast<std::size_t>(a) >= g.arcs.size()) broken = true;
    if (broken) {
      errors.push_back(tag + "unknown arc");
      continue;
    }
    if (g.arcs[static_cast<std::size_t>(path.front())].from != g.source) errors.push_back(tag + "does not leave s");
    if (g.arcs[static_cast<std::size_t>(path.back())].to != g.sink) errors.push_back(tag + "does not reach t");
    std::vector<char> visited(g.vertex_count(), 0);
    visited[static_cast<std::size_t>(g.arcs[static_cast<std::size_t>(path.front())].from)] = 1;
    double latency = 0.0;
    for (std::size_t i = 0; i < path.size(); ++i) {
      const auto& arc = g.arcs[static_cast<std::size_t>(path[i])];
      if (i > 0 && g.arcs[static_cast<std::size_t>(path[i - 1])].to != arc.from)
        errors.push_back(tag + "arcs are not consecutive");
      if (visited[static_cast<std::size_t>(arc.to)]++) errors.push_back(tag + "revisits a vertex");
      latency += arc.cost;
      ++arc_flow[static_cast<std::size_t>(path[i])];
    }
    if (latency > g.theta_l + kLatencySlack)
      errors.push_back(tag + "latency " + std::to_string(latency) + " exceeds theta_L");
  }
  std::vector<long> net(g.vertex_count(), 0);
  for (std::size_t a = 0; a < g.arcs.size(); ++a) {
    const long x = arc_flow[a] > 0 ? 1 : 0;
    const double limit = x * g.theta_a * g.arcs[a].capacity;
    if (arc_flow[a] > 0 && static_cast<double>(arc_flow[a]) > limit + 1e-9)
      errors.push_back("arc " + std::to_string(a) + ": flow exceeds admission limit");
    net[static_cast<std::size_t>(g.arcs[a].from)] += arc_flow[a];
    net[static_cast<std::size_t>(g.arcs[a].to)] -= arc_flow[a];
  }
  for (std::size_t v = 0; v < g.vertex_count(); ++v) {
    const long expected = static_cast<int>(v) == g.source ? f : static_cast<int>(v) == g.sink ? -f : 0;
    if (net[v] != expected) errors.push_back("vertex " + g.vertices[v] + ": flow not conserved");
  }
  return errors;
}

GridResult grid_search(const MfpcGraph& g, const std::vector<int>& alphas, const std::vector<double>& betas) {
  if (alphas.empty() || betas.empty()) throw ConfigError("grid", "alpha and beta ranges must be nonempty");
  using clock = std::chrono::steady_clock;
  GridResult result;
  const auto start = clock::now();
  bool have = false;
  Diversity best_div;
  for (int alpha : alphas)
    for (double beta : betas) {
      const auto t0 = clock::now();
      const CarouselParams params{alpha, beta};
      auto solution = carousel_greedy(g, params);
      GridCell cell{alpha, beta, path_diversity(solution.paths),
                    std::chrono::duration<double, std::milli>(clock::now() - t0).count()};
      const bool wins = !have || cell.diversity.count > best_div.count ||
                        (cell.diversity.count == best_div.count && cell.diversity.cos_sim < best_div.cos_sim - 1e-12);
      if (wins) {
        have = true;
        best_div = cell.diversity;
        result.best_params = params;
        result.best = std::move(solution);
      }
      result.cells.push_back(cell);
    }
  result.elapsed_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
  return result;
}

nlohmann::json to_json(const MfpcGraph& g, const PathSolution& solution) {
  nlohmann::json paths = nlohmann::json::array();
  for (const auto& p : solution.paths) {
    nlohmann::json names = nlohmann::json::array();
    for (int v : path_vertices(g, p)) names.push_back(g.vertices[static_cast<std::size_t>(v)]);
    paths.push_back({{"vertices", names}, {"latency_ms", path_latency(g, p)}});
  }
  const auto d = path_diversity(solution.paths);
  return {{"flow", solution.flow()}, {"cos_sim", d.cos_sim}, {"paths", paths}};
}

std::string grid_csv(const MfpcGraph&, const std::vector<GridCell>& cells, std::size_t topology_nodes) {
  std::ostringstream os;
  os << "Nodes,alpha,beta,PathCnt,CosSim,Time\n";
  for (const auto& c : cells) {
    os << topology_nodes << ',' << c.alpha << ',' << c.beta << ',' << c.diversity.count << ','
       << std::setprecision(6) << c.diversity.cos_sim << ',' << std::fixed << std::setprecision(3) << c.elapsed_ms
       << '\n';
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

}  // namespace arcturus::midmile
