"""Desk-scale simulator of a cluster-state multi-party key agreement protocol.

The heavy lifting lives in the C++ extension ``qka_sim._core``; configs and
reports cross the boundary as JSON, and this package unwraps them into plain
dicts.
"""

import json as _json

from qka_sim._core import (
    RngStream,
    StateVector,
    apply_x,
    basis_state,
    cluster_basis_measure,
    codebook_index_for_mask,
    make_cluster_state,
    measure_qubit,
    selftest,
    split_seed,
)
from qka_sim import _core

__all__ = [
    "RngStream",
    "StateVector",
    "apply_x",
    "basis_state",
    "cluster_basis_measure",
    "codebook_index_for_mask",
    "collusion_report",
    "efficiency",
    "estimate_detection",
    "make_cluster_state",
    "measure_qubit",
    "run",
    "selftest",
    "split_seed",
    "verify_table",
]


def run(config=None, attack=""):
    """Run the protocol once; returns the transcript as a dict."""
    return _json.loads(_core.run_protocol(_json.dumps(config or {}), attack))


def estimate_detection(config, attack, trials, seed=0):
    """Monte Carlo detection estimate for an attack spec string."""
    return _json.loads(_core.estimate_detection(_json.dumps(config or {}), attack, trials, seed))


def collusion_report(config, trials, seed=0, measure=True):
    """Leakage and detection report for colluding pivot + endpoints."""
    return _json.loads(_core.collusion_report(_json.dumps(config or {}), trials, seed, measure))


def efficiency(n, m, l_verify=None):
    """Key bits per channel bit, as exact rational plus decimal."""
    return _json.loads(_core.efficiency(n, m, l_verify))


def verify_table():
    """The sixteen derived codebook rows against the reference table."""
    return _json.loads(_core.verify_table())
