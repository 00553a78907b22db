// Thin bindings: structured values cross the boundary as JSON text and are
// decoded on the Python side.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "arcturus/cost.hpp"
#include "arcturus/lastmile.hpp"
#include "arcturus/midmile.hpp"
#include "arcturus/sim.hpp"
#include "arcturus/srheader.hpp"
#include "arcturus/telemetry.hpp"
#include "arcturus/tuner.hpp"

namespace py = pybind11;
using namespace arcturus;

namespace {

std::string simulate(const std::string& path, std::optional<std::uint64_t> seed) {
  auto sc = sim::load_scenario(path);
  if (seed) sc.seed = *seed;
  return sim::to_json(sim::summarize(sim::run_scenario(sc))).dump();
}

std::string midmile_grid(const std::string& topology_json, int k, double theta_a, double theta_l,
                         const std::vector<int>& alphas, const std::vector<double>& betas) {
  const auto topo = parse_topology(topology_json);
  const auto g = midmile::transform(topo, k, theta_a, theta_l);
  const auto r = midmile::grid_search(g, alphas, betas);
  auto j = midmile::to_json(g, r.best);
  j["csv"] = midmile::grid_csv(g, r.cells, topo.nodes.size());
  j["best_alpha"] = r.best_params.alpha;
  j["best_beta"] = r.best_params.beta;
  return j.dump();
}

std::string lastmile_schedule(const std::string& state_json, long long delta, const std::string& scheduler) {
  auto file = lastmile::node_state_from_json(nlohmann::json::parse(state_json));
  if (file.params.penalty_weight == 0.0)
    file.params.penalty_weight = lastmile::default_penalty_weight(file.nodes, file.params.theta);
  lastmile::ScheduleDecision d;
  if (scheduler == "bpr")
    d = lastmile::bpr_schedule(delta, file.nodes, file.params);
  else if (scheduler == "latency_greedy")
    d = lastmile::latency_greedy_schedule(delta, file.nodes, file.params);
  else
    throw ConfigError("scheduler", "must be bpr or latency_greedy");
  return lastmile::to_json(d, file.nodes).dump();
}

std::string cost_report(const std::string& deployment_json) {
  return cost::to_json(cost::cost_report(cost::deployment_from_json(nlohmann::json::parse(deployment_json)))).dump();
}

std::string compress_stats(std::size_t nodes, std::uint64_t seed, int k, double multiplier) {
  telemetry::MeshModel mesh;
  mesh.nodes = nodes;
  mesh.seed = seed;
  const auto r = telemetry::evaluate_compression(telemetry::generate_mesh(mesh), {k, multiplier});
  return nlohmann::json{{"samples", r.samples},
                        {"singular", r.singular},
                        {"raw_bytes", r.raw_bytes},
                        {"digest_bytes", r.digest_bytes},
                        {"ratio", r.ratio},
                        {"within_tolerance", r.within_tolerance}}
      .dump();
}

py::bytes encode_header(std::uint64_t packet_id, std::uint32_t offset, const std::vector<std::string>& hops,
                        std::uint8_t hop_counts) {
  sr::SegmentHeader h{packet_id, offset, {}, hop_counts};
  for (const auto& hop : hops) h.hop_list.push_back(sr::HopAddress::parse(hop));
  const auto bytes = sr::encode_header(h);
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

py::dict decode_header(const py::bytes& data) {
  const std::string raw = data;
  const auto [h, rest] = sr::decode_header(
      sr::ByteView(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
  std::vector<std::string> hops;
  for (const auto& a : h.hop_list) hops.push_back(a.to_string());
  py::dict out;
  out["packet_id"] = h.packet_id;
  out["offset"] = h.offset;
  out["hops"] = hops;
  out["hop_counts"] = h.hop_counts;
  out["remainder"] = rest.size();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "arcturus native core";

  static py::exception<Error> base_error(m, "ArcturusError", PyExc_RuntimeError);
  static py::exception<ConfigError> config_error(m, "ConfigError", base_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const Error& e) {
      py::set_error(base_error, e.what());
    } catch (const nlohmann::json::exception& e) {
      py::set_error(PyExc_ValueError, e.what());
    }
  });

  m.def("simulate", &simulate, py::arg("scenario_path"), py::arg("seed") = py::none());
  m.def("midmile_grid", &midmile_grid, py::arg("topology_json"), py::arg("k"), py::arg("theta_a") = 1.0,
        py::arg("theta_l") = midmile::kUnbounded, py::arg("alphas") = std::vector<int>{1, 2, 3},
        py::arg("betas") = std::vector<double>{0.6, 0.7, 0.8});
  m.def("lastmile_schedule", &lastmile_schedule, py::arg("state_json"), py::arg("delta"),
        py::arg("scheduler") = "bpr");
  m.def("cost_report", &cost_report, py::arg("deployment_json"));
  m.def("compress_stats", &compress_stats, py::arg("nodes") = 50, py::arg("seed") = 1, py::arg("k") = 5,
        py::arg("multiplier") = 3.0);
  m.def("encode_header", &encode_header, py::arg("packet_id"), py::arg("offset"), py::arg("hops"),
        py::arg("hop_counts") = 0);
  m.def("decode_header", &decode_header, py::arg("data"));
  m.attr("ARM_COUNT") = tuner::kArmCount;
}
