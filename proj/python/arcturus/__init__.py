"""Python access to the arcturus simulator and algorithms."""

import json as _json

from . import _core
from ._core import ARM_COUNT, ArcturusError, ConfigError, decode_header, encode_header

__all__ = [
    "ARM_COUNT",
    "ArcturusError",
    "ConfigError",
    "compress_stats",
    "cost_report",
    "decode_header",
    "encode_header",
    "lastmile_schedule",
    "midmile_grid",
    "simulate",
]


def simulate(scenario_path, seed=None):
    """Run a scenario file and return its summary."""
    return _json.loads(_core.simulate(str(scenario_path), seed))


def midmile_grid(topology, k, theta_a=1.0, theta_l=float("inf"), alphas=(1, 2, 3), betas=(0.6, 0.7, 0.8)):
    """Grid-searched carousel greedy; `topology` is a dict or JSON text."""
    text = topology if isinstance(topology, str) else _json.dumps(topology)
    return _json.loads(_core.midmile_grid(text, k, theta_a, theta_l, list(alphas), list(betas)))


def lastmile_schedule(state, delta, scheduler="bpr"):
    """One scheduling decision for a node-state dict or JSON text."""
    text = state if isinstance(state, str) else _json.dumps(state)
    return _json.loads(_core.lastmile_schedule(text, int(delta), scheduler))


def cost_report(deployment):
    text = deployment if isinstance(deployment, str) else _json.dumps(deployment)
    return _json.loads(_core.cost_report(text))


def compress_stats(nodes=50, seed=1, k=5, multiplier=3.0):
    return _json.loads(_core.compress_stats(nodes, seed, k, multiplier))
