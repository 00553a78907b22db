#pragma once

// Independent reference computations shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "arcturus/lastmile.hpp"
#include "arcturus/midmile.hpp"
#include "arcturus/model.hpp"

namespace oracle {

using arcturus::lastmile::NodeSchedState;
using arcturus::lastmile::Rps;

// Random proxy group: heterogeneous cores, onset CPU within the model bands.
inline std::vector<NodeSchedState> random_group(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> cores_pick(0, 2);
  std::uniform_real_distribution<double> q(0.0, 2.0), cpu(0.55, 0.78), delay(5.0, 60.0);
  std::vector<NodeSchedState> out;
  for (int k = 0; k < n; ++k) {
    NodeSchedState s;
    s.id = "n" + std::to_string(k);
    s.cores = 4 << cores_pick(rng);
    s.queue = arcturus::lastmile::VirtualQueue::for_cores(s.cores, q(rng));
    s.cpu_onset = cpu(rng);
    s.req_onset = static_cast<Rps>(s.cpu_onset * 3125.0 * s.cores);
    s.delay_ms = delay(rng);
    out.push_back(s);
  }
  return out;
}

// Four similar nodes plus one with a large backlog and high delay.
inline std::vector<NodeSchedState> outlier_group(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-0.05, 0.05), big(2.0, 5.0);
  std::vector<NodeSchedState> out;
  for (int k = 0; k < 5; ++k) {
    NodeSchedState s;
    s.id = "n" + std::to_string(k);
    s.cores = 8;
    const bool odd = k == 4;
    s.queue = arcturus::lastmile::VirtualQueue::for_cores(8, odd ? big(rng) : 0.1 * (1.0 + jitter(rng)));
    s.cpu_onset = odd ? 0.68 : 0.62 + jitter(rng) * 0.1;
    s.req_onset = static_cast<Rps>(s.cpu_onset * 25000.0);
    s.delay_ms = odd ? 40.0 : 10.0 * (1.0 + jitter(rng));
    out.push_back(s);
  }
  return out;
}

// Exhaustive search over final loads on a grid of `steps` equal parts of the
// group's total, respecting the saturation cap of every node.
inline double grid_optimum(std::span<const NodeSchedState> states, Rps total_delta,
                           const arcturus::lastmile::DppParams& params, int steps) {
  Rps mass = total_delta;
  for (const auto& s : states) mass += s.req_onset;
  const std::size_t n = states.size();
  std::vector<Rps> cap(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Rps inc = std::max<Rps>(0, arcturus::lastmile::max_increment_below(states[k].cpu_model, states[k].cpu_onset,
                                                                            params.saturation_cpu));
    cap[k] = states[k].req_onset + inc;
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<Rps> level(n, 0);
  std::vector<Rps> delta(n, 0);
  std::function<void(std::size_t, int)> walk = [&](std::size_t k, int left) {
    if (k + 1 == n) {
      const Rps last = mass - [&] {
        Rps used = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) used += level[i];
        return used;
      }();
      if (last < 0 || last > cap[k]) return;
      level[k] = last;
      for (std::size_t i = 0; i < n; ++i) delta[i] = level[i] - states[i].req_onset;
      best = std::min(best, arcturus::lastmile::compute_dpp(states, delta, params).total);
      return;
    }
    for (int units = 0; units <= left; ++units) {
      const Rps value = mass * units / steps;
      if (value > cap[k]) break;
      level[k] = value;
      walk(k + 1, left - units);
    }
  };
  walk(0, steps);
  return best;
}

// Proportional split by onset load with whole-unit largest remainders.
inline std::vector<Rps> proportional_split(std::span<const NodeSchedState> states, Rps total) {
  Rps sum = 0;
  for (const auto& s : states) sum += s.req_onset;
  std::vector<Rps> out(states.size(), 0);
  std::vector<std::pair<double, std::size_t>> rem;
  Rps assigned = 0;
  const Rps mag = total < 0 ? -total : total;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const double exact = static_cast<double>(mag) * static_cast<double>(states[k].req_onset) / static_cast<double>(sum);
    out[k] = static_cast<Rps>(std::floor(exact));
    assigned += out[k];
    rem.emplace_back(exact - static_cast<double>(out[k]), k);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < mag; i = (i + 1) % rem.size(), ++assigned) ++out[rem[i].second];
  if (total < 0)
    for (auto& x : out) x = -x;
  return out;
}

// Small random overlay for mid-mile oracle comparisons.
inline arcturus::Topology small_topology(std::uint64_t seed, std::size_t nodes, double density) {
  return arcturus::generate_topology(nodes, density, seed);
}

}  // namespace oracle
