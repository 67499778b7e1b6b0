"""Circularity metrics over simulated trajectories.

The central quantity is the summed rate on the designated unsustainable
connections (virgin extraction entering the network, material leaking out of
it).  Designs are compared by that rate integrated over the horizon, which is
the scalar a finite-horizon search can minimize; the instantaneous series is
reported alongside.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .simulator import Trajectory

__all__ = [
    "CircularityReport",
    "unsustainable_rate",
    "unsustainable_rate_series",
    "cumulative_unsustainable",
    "return_rate_series",
    "circularity_report",
    "compare_objective",
]

_EPSILON_KG = 1e-12  # guards the circularity-index denominator


def unsustainable_rate(flow_record: Sequence[float], traj_or_compiled) -> float:
    """Sum of instantaneous rates over the designated unsustainable
    connections, for one flow record (kg/s)."""
    compiled = getattr(traj_or_compiled, "compiled", traj_or_compiled)
    if len(flow_record) != compiled.n_conn:
        raise ValueError(
            f"flow record has {len(flow_record)} entries, network has {compiled.n_conn}"
        )
    if not compiled.unsustainable_indices:
        warnings.warn("network designates no unsustainable flows; rate is 0", stacklevel=2)
        return 0.0
    return float(sum(flow_record[j] for j in compiled.unsustainable_indices))


def unsustainable_rate_series(traj: Trajectory) -> np.ndarray:
    idx = traj.compiled.unsustainable_indices
    if not idx:
        return np.zeros(len(traj.times))
    return traj.flows[:, idx].sum(axis=1)


def return_rate_series(traj: Trajectory) -> np.ndarray:
    idx = traj.compiled.return_indices
    if not idx:
        return np.zeros(len(traj.times))
    return traj.flows[:, idx].sum(axis=1)


def _designated_cumulative(traj: Trajectory, indices: list[int]) -> float:
    if not indices:
        return 0.0
    cols = [traj.compiled.n_store + j for j in indices]
    return float(traj.states[-1, cols].sum())


def cumulative_unsustainable(traj: Trajectory) -> float:
    """Unsustainable mass over the horizon (kg).

    Read from the connection integrals carried in the state vector, so the
    quadrature matches the integrator's order exactly.
    """
    return _designated_cumulative(traj, traj.compiled.unsustainable_indices)


@dataclass
class CircularityReport:
    name: str
    cumulative_unsustainable: float
    cumulative_return: float
    cumulative_extraction: float
    cumulative_leak: float
    total_throughput: float
    circularity_index: float
    unsustainable_rate: np.ndarray
    return_rate: np.ndarray

    def objective_key(self) -> tuple[float, float, float, str]:
        """Sort key: lower unsustainable mass first, ties broken by leak,
        then extraction, then name."""
        return (
            self.cumulative_unsustainable,
            self.cumulative_leak,
            self.cumulative_extraction,
            self.name,
        )


def circularity_report(traj: Trajectory, name: str = "") -> CircularityReport:
    compiled = traj.compiled
    m_u = cumulative_unsustainable(traj)
    ret = _designated_cumulative(traj, compiled.return_indices)

    extraction_idx = [
        j
        for j in compiled.unsustainable_indices
        if compiled.connections[j].from_port.compartment
        in set(compiled.source_ks)
    ]
    leak_idx = [j for j in compiled.unsustainable_indices if j not in extraction_idx]
    extraction = _designated_cumulative(traj, extraction_idx)
    leak = _designated_cumulative(traj, leak_idx)

    # Total mass moved along all connections over the horizon; the designated
    # flows are a subset, so the index lands in [0, 1] by construction.
    throughput = float(traj.states[-1, compiled.n_store :].sum())
    index = 1.0 - m_u / max(throughput, _EPSILON_KG)

    return CircularityReport(
        name=name or traj.network.name,
        cumulative_unsustainable=m_u,
        cumulative_return=ret,
        cumulative_extraction=extraction,
        cumulative_leak=leak,
        total_throughput=throughput,
        circularity_index=index,
        unsustainable_rate=unsustainable_rate_series(traj),
        return_rate=return_rate_series(traj),
    )


def compare_objective(traj_a: Trajectory, traj_b: Trajectory) -> int:
    """Order two runs by cumulative unsustainable mass: -1 if the first wins,
    1 if the second, 0 only for identical keys.  Both runs must share horizon
    and step size."""
    ca, cb = traj_a.config, traj_b.config
    if ca.dt != cb.dt or ca.horizon != cb.horizon:
        raise ValueError(
            f"incomparable runs: dt {ca.dt} vs {cb.dt}, horizon {ca.horizon} vs {cb.horizon}"
        )
    key_a = circularity_report(traj_a).objective_key()
    key_b = circularity_report(traj_b).objective_key()
    if key_a < key_b:
        return -1
    if key_b < key_a:
        return 1
    return 0
