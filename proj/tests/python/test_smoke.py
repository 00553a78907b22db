import json
import os
import pathlib

import pytest

import arcturus

SCENARIOS = pathlib.Path(os.environ.get("ARCTURUS_SCENARIO_DIR", pathlib.Path(__file__).parents[2] / "scenarios"))


def test_cost_report_fifty_nodes():
    report = arcturus.cost_report(json.loads((SCENARIOS / "deployment_50.json").read_text()))
    assert report["compute_per_hour"] == "$6.60"
    assert report["bandwidth"] == "$10.00"


def test_negative_rate_raises_config_error():
    with pytest.raises(arcturus.ConfigError):
        arcturus.cost_report({"nodes": [{"name": "x", "count": 1, "cost_per_hour": -1}]})


def test_header_round_trip():
    wire = arcturus.encode_header(7, 3, ["10.0.0.1:443", "10.0.0.2:8443"], 1)
    assert len(wire) == 18 + 2 * 6
    back = arcturus.decode_header(wire)
    assert back["packet_id"] == 7
    assert back["hops"] == ["10.0.0.1:443", "10.0.0.2:8443"]
    assert back["hop_counts"] == 1


def test_truncated_header_raises():
    wire = arcturus.encode_header(1, 0, ["10.0.0.1:1"])
    with pytest.raises(arcturus.ArcturusError):
        arcturus.decode_header(wire[:-1])


def test_midmile_diamond_two_disjoint_paths():
    topo = json.loads((SCENARIOS / "diamond.json").read_text())
    result = arcturus.midmile_grid(topo, k=2)
    assert result["flow"] == 2
    assert result["cos_sim"] == 0.0
    assert result["csv"].count("\n") == 10


def test_lastmile_symmetric_split():
    state = json.loads((SCENARIOS / "lastmile_symmetric.json").read_text())
    decision = arcturus.lastmile_schedule(state, 5000)
    assert [n["delta_req"] for n in decision["nodes"]] == [1000] * 5


def test_simulate_is_seed_deterministic():
    a = arcturus.simulate(SCENARIOS / "quickstart.json", seed=42)
    b = arcturus.simulate(SCENARIOS / "quickstart.json", seed=42)
    assert a == b
    assert a["violations"] == 0


def test_compress_stats_ratio():
    stats = arcturus.compress_stats(nodes=30, seed=2)
    assert stats["ratio"] < 0.2
    assert arcturus.ARM_COUNT == 800
