"""Design search over candidate networks and their parameters.

Architecture search ranks an explicit, user-supplied set of network variants
by the horizon-integrated unsustainable mass.  Parameter search is exhaustive
over a grid when the evaluation budget allows it and coordinate descent
otherwise.  Sensitivities of the objective to a compartment parameter are
central finite differences over two full simulations, which propagates the
perturbation through every compartment between the parameter and the
designated flows.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import compartments as comp
from .core import InvalidNetworkError, Network, validate
from .metrics import CircularityReport, circularity_report
from .simulator import SimConfig, simulate

__all__ = [
    "VariantSet",
    "ParamAxis",
    "OptimizeResult",
    "SensitivityResult",
    "select_best",
    "optimize_params",
    "sensitivity",
    "worker_count",
]


def worker_count(explicit: Optional[int] = None) -> int:
    """Worker cap: explicit argument, else the CIRCUFLOW_THREADS variable."""
    if explicit is not None:
        return max(1, explicit)
    try:
        return max(1, int(os.environ.get("CIRCUFLOW_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class VariantSet:
    """Named candidate networks sharing a material structure and simulation
    config.  Variants must agree on the material indices (the objective is
    mass-based, so labels may differ, e.g. bio vs synthetic feedstock)."""

    variants: dict[str, Network]
    config: Optional[SimConfig] = None

    def __post_init__(self):
        if not self.variants:
            raise ValueError("variant set is empty")
        structure = None
        for name, net in self.variants.items():
            indices = tuple(sorted(m.index for m in net.materials))
            if structure is None:
                structure = indices
            elif indices != structure:
                raise ValueError(
                    f"variant {name!r} material indices {indices} differ from {structure}"
                )


def select_best(
    variant_set: VariantSet,
    config: Optional[SimConfig] = None,
    workers: Optional[int] = None,
) -> tuple[str, dict[str, CircularityReport]]:
    """Simulate every variant and return the argmin of cumulative
    unsustainable mass plus all per-variant reports.

    Candidate evaluations are independent; results merge deterministically by
    name regardless of worker count.
    """
    config = config or variant_set.config
    names = sorted(variant_set.variants)
    for name in names:
        report = validate(variant_set.variants[name])
        if not report.ok:
            raise InvalidNetworkError(report)

    def run(name: str) -> CircularityReport:
        net = variant_set.variants[name]
        traj = simulate(net, config or SimConfig.from_network(net))
        return circularity_report(traj, name=name)

    results = _parallel_map(run, names, worker_count(workers))
    reports = dict(zip(names, results))
    best = min(reports.values(), key=lambda r: r.objective_key())
    return best.name, reports


@dataclass(frozen=True)
class ParamAxis:
    """One searchable parameter: compartment index, field name, grid."""

    k: int
    name: str
    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError(f"empty grid for c{self.k}.{self.name}")


@dataclass
class OptimizeResult:
    best_params: dict[tuple[int, str], float]
    best_objective: float
    evaluations: int
    exhaustive: bool
    history: list[tuple[tuple[float, ...], float]] = field(default_factory=list)


def _check_axes(network: Network, axes: Sequence[ParamAxis]) -> None:
    for axis in axes:
        compartment = network.compartment(axis.k)
        lo, hi = comp.param_bounds(compartment.kind, axis.name)
        for v in axis.values:
            if (lo is not None and v < lo) or (hi is not None and v > hi):
                raise ValueError(
                    f"grid value {v} for c{axis.k}.{axis.name} outside bounds [{lo}, {hi}]"
                )


def _objective(network: Network, config: SimConfig) -> float:
    from .metrics import cumulative_unsustainable

    return cumulative_unsustainable(simulate(network, config))


def _with_point(network: Network, axes: Sequence[ParamAxis], point: Sequence[float]) -> Network:
    for axis, value in zip(axes, point):
        network = network.with_param(axis.k, axis.name, value)
    return network


def optimize_params(
    network: Network,
    space: Sequence[ParamAxis],
    budget: int,
    config: Optional[SimConfig] = None,
) -> OptimizeResult:
    """Minimize cumulative unsustainable mass over a parameter grid.

    Runs the full Cartesian grid when it fits in ``budget`` simulations,
    otherwise cycles coordinate descent sweeps until the budget is spent.
    Ties resolve to the lexicographically smallest parameter tuple.
    """
    axes = list(space)
    if not axes:
        raise ValueError("empty parameter space")
    _check_axes(network, axes)
    config = config or SimConfig.from_network(network)

    grid_size = math.prod(len(a.values) for a in axes)
    history: list[tuple[tuple[float, ...], float]] = []
    cache: dict[tuple[float, ...], float] = {}

    def evaluate(point: tuple[float, ...]) -> float:
        if point not in cache:
            cache[point] = _objective(_with_point(network, axes, point), config)
            history.append((point, cache[point]))
        return cache[point]

    if grid_size <= budget:
        best_point = min(
            itertools.product(*(sorted(a.values) for a in axes)),
            key=lambda pt: (evaluate(pt), pt),
        )
        return OptimizeResult(
            best_params={(a.k, a.name): v for a, v in zip(axes, best_point)},
            best_objective=cache[best_point],
            evaluations=len(cache),
            exhaustive=True,
            history=history,
        )

    # Coordinate descent: sweep one axis at a time from the incumbent.
    incumbent = tuple(sorted(a.values)[0] for a in axes)
    evaluate(incumbent)
    improved = True
    while improved and len(cache) < budget:
        improved = False
        for i, axis in enumerate(axes):
            candidates = []
            for v in sorted(axis.values):
                point = incumbent[:i] + (v,) + incumbent[i + 1 :]
                if point in cache or len(cache) < budget:
                    candidates.append((evaluate(point), point))
            best_here = min(candidates)
            if best_here[1] != incumbent and best_here[0] < cache[incumbent]:
                incumbent = best_here[1]
                improved = True
            if len(cache) >= budget:
                break
    return OptimizeResult(
        best_params={(a.k, a.name): v for a, v in zip(axes, incumbent)},
        best_objective=cache[incumbent],
        evaluations=len(cache),
        exhaustive=False,
        history=history,
    )


@dataclass
class SensitivityResult:
    k: int
    param: str
    value: float
    delta: float
    derivative: float
    objective_plus: float
    objective_minus: float
    one_sided: Optional[str]  # "upper" | "lower" when a bound was hit
    noise_floor: float
    report_plus: CircularityReport
    report_minus: CircularityReport


def sensitivity(
    network: Network,
    k: int,
    param: str,
    rel_delta: float = 1e-3,
    config: Optional[SimConfig] = None,
) -> SensitivityResult:
    """Finite-difference derivative of cumulative unsustainable mass with
    respect to one compartment parameter.

    Central differences by default; when the perturbation would leave the
    parameter's bounds, the difference falls back to one-sided and the result
    is flagged.  ``noise_floor`` estimates the round-off-limited resolution
    of the quotient, |m_u| * eps / (2 delta).
    """
    if not 0.0 < rel_delta <= 0.1:
        raise ValueError(f"rel_delta must be in (0, 0.1], got {rel_delta}")
    compartment = network.compartment(k)
    value = getattr(compartment.params, param)
    config = config or SimConfig.from_network(network)

    delta = abs(value) * rel_delta
    if delta == 0.0:
        delta = rel_delta
    lo, hi = comp.param_bounds(compartment.kind, param)

    hi_val = value + delta
    lo_val = value - delta
    one_sided = None
    if hi is not None and hi_val > hi:
        hi_val, one_sided = value, "upper"
    if lo is not None and lo_val < lo:
        if one_sided == "upper":
            raise ValueError(f"delta {delta} spans the whole feasible range of {param}")
        lo_val, one_sided = value, "lower"

    def run(v: float):
        traj = simulate(network.with_param(k, param, v), config)
        return circularity_report(traj, name=f"{network.name}[{param}={v}]")

    report_plus = run(hi_val)
    report_minus = run(lo_val)
    span = hi_val - lo_val
    derivative = (
        report_plus.cumulative_unsustainable - report_minus.cumulative_unsustainable
    ) / span
    scale = max(
        abs(report_plus.cumulative_unsustainable),
        abs(report_minus.cumulative_unsustainable),
        1.0,
    )
    noise_floor = scale * 2.220446049250313e-16 / span
    return SensitivityResult(
        k=k,
        param=param,
        value=value,
        delta=delta,
        derivative=derivative,
        objective_plus=report_plus.cumulative_unsustainable,
        objective_minus=report_minus.cumulative_unsustainable,
        one_sided=one_sided,
        noise_floor=noise_floor,
        report_plus=report_plus,
        report_minus=report_minus,
    )
