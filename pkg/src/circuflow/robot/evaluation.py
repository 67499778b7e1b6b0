"""Seeded policy evaluation and the coupling of a measured success rate into
a sorting compartment.

Evaluation is a pure function of (policy, seed, config): episode i draws its
randomness from a child stream of the master seed, episodes are independent,
and aggregation runs in episode order, so repeat runs are bit-identical and
a worker pool cannot change the result.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..compartments import SorterParams
from ..design import worker_count
from .reach_env import ReachEnv

__all__ = ["SuccessReport", "evaluate_policy", "SorterCoupling", "success_to_sorter"]


@dataclass(frozen=True)
class SuccessReport:
    success_rate: float
    mean_final_distance: float
    mean_step_time: float  # wall-clock diagnostic, not part of determinism
    n_episodes: int
    successes: int
    seed: int


def _episode_rng(seed: int, episode: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, episode))))


def evaluate_policy(
    policy,
    n_episodes: int,
    env: Optional[ReachEnv] = None,
    seed: int = 0,
    workers: Optional[int] = None,
) -> SuccessReport:
    if n_episodes < 1:
        raise ValueError("need at least one episode")
    env = env or ReachEnv()

    successes = np.zeros(n_episodes, dtype=bool)
    distances = np.zeros(n_episodes)
    steps = np.zeros(n_episodes, dtype=np.int64)

    def run(i: int) -> None:
        result = env.rollout(policy, _episode_rng(seed, i))
        successes[i] = result["success"]
        distances[i] = result["final_distance"]
        steps[i] = result["steps"]

    t0 = time.perf_counter()
    n_workers = worker_count(workers)
    if n_workers <= 1:
        for i in range(n_episodes):
            run(i)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(run, range(n_episodes)))
    elapsed = time.perf_counter() - t0

    total_steps = int(steps.sum())
    return SuccessReport(
        success_rate=float(successes.sum()) / n_episodes,
        mean_final_distance=float(distances.mean()),
        mean_step_time=elapsed / max(total_steps, 1),
        n_episodes=n_episodes,
        successes=int(successes.sum()),
        seed=seed,
    )


@dataclass(frozen=True)
class SorterCoupling:
    """A sorter compartment parameterized by a measured robot success rate,
    with the daily mass bookkeeping spelled out."""

    sorter: SorterParams
    items_per_hour: float
    item_mass: float
    throughput_kg_per_hour: float
    sorted_kg_per_day: float
    rejected_kg_per_day: float


def success_to_sorter(
    report,
    item_mass: float,
    item_rate: float,
    material: str = "synthetic-plastic",
) -> SorterCoupling:
    """Turn an evaluated success rate into sorter parameters.

    The sorter moves ``item_rate`` items/hour of ``item_mass`` kg each, so
    throughput is item_rate * item_mass / 3600 kg/s; the measured success
    rate becomes the accept fraction.  Daily sorted mass is
    rate * item_rate * item_mass * 24.
    """
    if item_mass <= 0 or item_rate <= 0:
        raise ValueError("item mass and rate must be positive")
    rate = report.success_rate if hasattr(report, "success_rate") else float(report)
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"success rate {rate} outside [0, 1]")
    kg_per_hour = item_rate * item_mass
    sorter = SorterParams(
        material=material,
        success_rate=rate,
        throughput=kg_per_hour / 3600.0,
        item_mass=item_mass,
        item_rate=item_rate,
    )
    return SorterCoupling(
        sorter=sorter,
        items_per_hour=item_rate,
        item_mass=item_mass,
        throughput_kg_per_hour=kg_per_hour,
        sorted_kg_per_day=rate * kg_per_hour * 24.0,
        rejected_kg_per_day=(1.0 - rate) * kg_per_hour * 24.0,
    )
