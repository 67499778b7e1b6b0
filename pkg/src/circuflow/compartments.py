"""Compartment dynamics: each kind maps (stored state, inflow rates,
parameters) to (state derivative, outflow rates) as a first-order mass
balance, dm/dt = inflow - outflow.

Rate functions are pure and conserve mass per call: the sum of emitted rates
plus the store derivative equals the sum of input rates.  Availability guards
(``dt_ref``) scale outflows smoothly to zero as a store empties, so explicit
integration cannot drive stores negative by more than round-off.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

from .core import CompartmentId, Network

__all__ = [
    "Kind",
    "Compartment",
    "SourceParams",
    "StockParams",
    "TransportParams",
    "TransformerParams",
    "SorterParams",
    "RecyclerParams",
    "SinkParams",
    "source_rates",
    "stock_rates",
    "transport_rates",
    "transformer_rates",
    "sorter_split",
    "recycler_rates",
    "RankineState",
    "CyclePerformance",
    "rankine_eval",
]


class Kind(enum.Enum):
    SOURCE = "source"
    STOCK = "stock"
    TRANSPORT = "transport"
    TRANSFORMER = "transformer"
    SORTER = "sorter"
    RECYCLER = "recycler"
    SINK = "sink"


@dataclass(frozen=True)
class SourceParams:
    """Finite reservoir feeding the network on demand.

    ``demand`` is the requested extraction rate.  With ``offset_by_return``
    the effective demand is reduced by the instantaneous rate on the
    network's designated return connections, so recovered material displaces
    virgin extraction one-for-one.
    """

    material: str
    reserve: float
    max_rate: float
    demand: float = 0.0
    offset_by_return: bool = False


@dataclass(frozen=True)
class StockParams:
    """Buffer serving a downstream demand rate."""

    material: str
    demand: float


@dataclass(frozen=True)
class TransportParams:
    """First-order lag: dm/dt = u - m/T, with a fraction of the throughput
    lost en route.  A lag rather than a pure delay keeps the network a
    coupled ODE system."""

    material: str
    time_constant: float
    loss_fraction: float = 0.0


@dataclass(frozen=True)
class TransformerParams:
    """Converts one material into another at a capacity-limited rate.

    Mass is conserved across the type change: the non-converted fraction
    leaves as waste of the input material.
    """

    input_material: str
    output_material: str
    yield_fraction: float
    rate_capacity: float


@dataclass(frozen=True)
class SorterParams:
    """Splits a processed stream into accepted and rejected substreams.

    ``throughput`` may be given directly or derived from an item rate
    (items/hour) and an item mass, throughput = item_rate * item_mass / 3600.
    ``secondary_fraction`` diverts that share of the accepted stream to an
    alternative accept port (e.g. multi-component products routed to
    disassembly instead of straight to recycling).
    """

    material: str
    success_rate: float
    throughput: float
    item_mass: Optional[float] = None
    item_rate: Optional[float] = None
    secondary_fraction: float = 0.0


@dataclass(frozen=True)
class RecyclerParams:
    """First-order reprocessing lag; a fraction of the processed stream
    returns as usable material, the rest leaks.  ``output_material`` types
    the return stream (reprocessed feedstock); the leak keeps the input
    material."""

    material: str
    yield_fraction: float
    processing_time: float
    output_material: Optional[str] = None

    @property
    def return_material(self) -> str:
        return self.output_material or self.material


@dataclass(frozen=True)
class SinkParams:
    """Pure accumulator (landfill, incinerator, environment)."""


@dataclass(frozen=True)
class Compartment:
    id: CompartmentId
    kind: Kind
    params: object
    store: dict[str, float] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Rate functions (pure, one call = one instantaneous balance)
# ---------------------------------------------------------------------------


def _availability(mass: float, rate: float, dt_ref: float) -> float:
    """Smooth guard capping ``rate`` by what the store can supply over
    ``dt_ref`` (the min form of scaling by min(1, m/(rate*dt_ref)))."""
    if rate <= 0.0:
        return 0.0
    m = mass if mass > 0.0 else 0.0
    return min(rate, m / dt_ref)


def source_rates(
    params: SourceParams, store: float, demand: float, dt_ref: float = 1.0
) -> tuple[float, float]:
    """Extraction from a finite reservoir: returns (dstore/dt, out_rate).

    The outflow is the demand capped by ``max_rate`` and by what the
    remaining reserve can sustain over ``dt_ref``; it reaches zero exactly
    when the reserve is exhausted.
    """
    if demand < 0.0:
        raise ValueError(f"negative demand {demand}")
    out = _availability(store, min(demand, params.max_rate), dt_ref)
    return -out, out


def stock_rates(
    store: float, in_rate: float, demand_rate: float, dt_ref: float = 1.0
) -> tuple[float, float]:
    """Buffer balance: returns (dstore/dt, out_rate).

    A filled stock serves the full demand; an empty one can only pass its
    inflow through.  The ``m/dt_ref`` availability term blends the two
    regimes smoothly.
    """
    if in_rate < 0.0 or demand_rate < 0.0:
        raise ValueError("rates must be nonnegative")
    m = store if store > 0.0 else 0.0
    out = min(demand_rate, in_rate + m / dt_ref)
    return in_rate - out, out


def transport_rates(
    params: TransportParams, store: float, in_rate: float
) -> tuple[float, float, float]:
    """Lagged conveyance: returns (dstore/dt, out_rate, loss_rate)."""
    if store < -0.0 or in_rate < 0.0:
        raise ValueError("store and inflow must be nonnegative")
    through = (store if store > 0.0 else 0.0) / params.time_constant
    loss = params.loss_fraction * through
    return in_rate - through, through - loss, loss


def transformer_rates(
    params: TransformerParams, store: float, in_rate: float, dt_ref: float = 1.0
) -> tuple[float, float, float]:
    """Capacity-limited conversion: returns (dstore/dt, out_rate, waste_rate).

    The processed rate is the inflow plus what the buffer can supply, capped
    at ``rate_capacity``; surplus inflow accumulates in the buffer.
    """
    if in_rate < 0.0:
        raise ValueError("inflow must be nonnegative")
    m = store if store > 0.0 else 0.0
    processed = min(in_rate + m / dt_ref, params.rate_capacity)
    out = params.yield_fraction * processed
    return in_rate - processed, out, processed - out


def sorter_split(params: SorterParams, processed_rate: float) -> tuple[float, float]:
    """Exact partition of a processed stream: returns (accept, reject).

    ``processed_rate`` must not exceed the sorter throughput.
    """
    if processed_rate < 0.0 or processed_rate > params.throughput * (1.0 + 1e-12):
        raise ValueError(
            f"processed rate {processed_rate} outside [0, throughput={params.throughput}]"
        )
    accept = params.success_rate * processed_rate
    return accept, processed_rate - accept


def recycler_rates(
    params: RecyclerParams, store: float, in_rate: float
) -> tuple[float, float, float]:
    """Reprocessing lag: returns (dstore/dt, return_rate, leak_rate)."""
    if in_rate < 0.0:
        raise ValueError("inflow must be nonnegative")
    processed = (store if store > 0.0 else 0.0) / params.processing_time
    ret = params.yield_fraction * processed
    return in_rate - processed, ret, processed - ret


# ---------------------------------------------------------------------------
# Port templates and per-kind checks used by core.validate
# ---------------------------------------------------------------------------


def port_material(comp: Compartment, direction: str, name: str) -> Optional[str]:
    """Material carried by a template port, or None if the port is unknown.

    Sink input ports are free-form: their material is fixed by the feeding
    connection, so this returns None and validation relies on the
    one-material-per-input-port rule instead.
    """
    p = comp.params
    kind = comp.kind
    if kind == Kind.SOURCE:
        if direction == "output" and name == "out":
            return p.material
    elif kind == Kind.STOCK:
        if name in ("in", "out") and direction == ("input" if name == "in" else "output"):
            return p.material
    elif kind == Kind.TRANSPORT:
        if (direction, name) in (("input", "in"), ("output", "out"), ("output", "loss")):
            return p.material
    elif kind == Kind.TRANSFORMER:
        if direction == "input" and name == "in":
            return p.input_material
        if direction == "output" and name == "out":
            return p.output_material
        if direction == "output" and name == "waste":
            return p.input_material
    elif kind == Kind.SORTER:
        if direction == "input" and name == "in":
            return p.material
        if direction == "output" and name in ("accept", "accept_alt", "reject"):
            return p.material
    elif kind == Kind.RECYCLER:
        if direction == "input" and name == "in":
            return p.material
        if direction == "output" and name == "return":
            return p.return_material
        if direction == "output" and name == "leak":
            return p.material
    return None


def check_port(comp: Compartment, direction: str, name: str, material: str) -> Optional[str]:
    """One-line problem description if the port does not fit the kind."""
    if comp.kind == Kind.SINK:
        if direction == "output":
            return f"sink {comp.id} has no output ports"
        return None
    expected = port_material(comp, direction, name)
    if expected is None:
        return f"{comp.kind.value} {comp.id} has no {direction} port {name!r}"
    if material != expected:
        return f"port {comp.id}.{name} carries {expected!r}, not {material!r}"
    return None


def active_output_ports(comp: Compartment) -> list[str]:
    """Output ports that can carry mass and therefore must be connected."""
    p = comp.params
    kind = comp.kind
    if kind == Kind.SOURCE:
        return ["out"] if p.max_rate > 0 and p.reserve > 0 else []
    if kind == Kind.STOCK:
        return ["out"] if p.demand > 0 else []
    if kind == Kind.TRANSPORT:
        ports = ["out"] if p.loss_fraction < 1 else []
        if p.loss_fraction > 0:
            ports.append("loss")
        return ports
    if kind == Kind.TRANSFORMER:
        ports = ["out"] if p.yield_fraction > 0 else []
        if p.yield_fraction < 1:
            ports.append("waste")
        return ports
    if kind == Kind.SORTER:
        ports = []
        if p.success_rate > 0:
            if p.secondary_fraction < 1:
                ports.append("accept")
            if p.secondary_fraction > 0:
                ports.append("accept_alt")
        if p.success_rate < 1:
            ports.append("reject")
        return ports
    if kind == Kind.RECYCLER:
        ports = ["return"] if p.yield_fraction > 0 else []
        if p.yield_fraction < 1:
            ports.append("leak")
        return ports
    return []


def store_materials(comp: Compartment) -> set[str]:
    """Materials a compartment may hold in its store."""
    p = comp.params
    kind = comp.kind
    if kind in (Kind.SOURCE, Kind.STOCK, Kind.TRANSPORT, Kind.SORTER):
        return {p.material}
    if kind == Kind.TRANSFORMER:
        return {p.input_material}
    if kind == Kind.RECYCLER:
        return {p.material}
    if kind == Kind.SINK:
        return set(comp.store)  # fixed by whatever feeds it
    return set()


# Bounds: (parameter, low, high, low_open, high_open); None = unbounded.
_PARAM_BOUNDS: dict[Kind, list[tuple[str, Optional[float], Optional[float], bool, bool]]] = {
    Kind.SOURCE: [
        ("reserve", 0.0, None, False, False),
        ("max_rate", 0.0, None, False, False),
        ("demand", 0.0, None, False, False),
    ],
    Kind.STOCK: [("demand", 0.0, None, False, False)],
    Kind.TRANSPORT: [
        ("time_constant", 0.0, None, True, False),
        ("loss_fraction", 0.0, 1.0, False, True),
    ],
    Kind.TRANSFORMER: [
        ("yield_fraction", 0.0, 1.0, True, False),
        ("rate_capacity", 0.0, None, False, False),
    ],
    Kind.SORTER: [
        ("success_rate", 0.0, 1.0, False, False),
        ("throughput", 0.0, None, False, False),
        ("secondary_fraction", 0.0, 1.0, False, False),
    ],
    Kind.RECYCLER: [
        ("yield_fraction", 0.0, 1.0, False, False),
        ("processing_time", 0.0, None, True, False),
    ],
    Kind.SINK: [],
}


def param_bounds(kind: Kind, name: str) -> tuple[Optional[float], Optional[float]]:
    """Closed numeric bounds for a parameter, for sweeps and sensitivity."""
    for pname, lo, hi, _, _ in _PARAM_BOUNDS[kind]:
        if pname == name:
            return lo, hi
    return None, None


def check_params(comp: Compartment, materials: set[str]) -> list[str]:
    """All parameter-bound and material-reference problems for one compartment."""
    problems: list[str] = []
    p = comp.params
    for name, lo, hi, lo_open, hi_open in _PARAM_BOUNDS[comp.kind]:
        value = getattr(p, name)
        if not math.isfinite(value):
            problems.append(f"{name} is not finite")
            continue
        if lo is not None and (value <= lo if lo_open else value < lo):
            problems.append(f"{name}={value} below bound {'(' if lo_open else '['}{lo}")
        if hi is not None and (value >= hi if hi_open else value > hi):
            problems.append(f"{name}={value} above bound {hi}{')' if hi_open else ']'}")
    for attr in ("material", "input_material", "output_material"):
        label = getattr(p, attr, None)
        if label is not None and label not in materials:
            problems.append(f"{attr}={label!r} is not a network material")
    if comp.kind == Kind.SORTER:
        if p.item_mass is not None and p.item_rate is not None:
            derived = p.item_rate * p.item_mass / 3600.0
            if not math.isclose(derived, p.throughput, rel_tol=1e-9, abs_tol=1e-15):
                problems.append(
                    f"throughput {p.throughput} inconsistent with "
                    f"item_rate*item_mass/3600 = {derived}"
                )
    return problems


def _instantaneous_edges(network: Network) -> dict[int, set[int]]:
    """Edges u -> v where compartment v's output rates depend on u's output
    rates at the same instant.  Transformer, sorter, and stock outputs depend
    on their inflows; a return-offset source depends on the rates of the
    designated return connections.  Transports and recyclers never appear as
    targets because their outputs are functions of state only."""
    instantaneous = {Kind.TRANSFORMER, Kind.SORTER, Kind.STOCK}
    edges: dict[int, set[int]] = {comp.id.k: set() for comp in network.compartments}
    for conn in network.connections:
        dst = network.compartment(conn.to_port.compartment)
        if dst.kind in instantaneous:
            edges[conn.from_port.compartment].add(dst.id.k)
    for comp in network.compartments:
        if comp.kind == Kind.SOURCE and comp.params.offset_by_return:
            for conn in network.return_flows:
                edges[conn.from_port.compartment].add(comp.id.k)
    return edges


def find_algebraic_loop(network: Network) -> Optional[list[int]]:
    """Compartment indices caught in an instantaneous dependency cycle, or
    None.  Such a cycle makes the assembled vector field ill-defined; every
    feedback loop needs at least one stateful lag (transport or recycler)."""
    edges = _instantaneous_edges(network)
    indegree = {k: 0 for k in edges}
    for srcs in edges.values():
        for dst in srcs:
            indegree[dst] += 1
    queue = [k for k, d in indegree.items() if d == 0]
    visited = 0
    while queue:
        k = queue.pop()
        visited += 1
        for dst in edges[k]:
            indegree[dst] -= 1
            if indegree[dst] == 0:
                queue.append(dst)
    if visited == len(edges):
        return None
    return sorted(k for k, d in indegree.items() if d > 0)


def instantaneous_order(network: Network) -> list[int]:
    """Compartment indices topologically sorted so that every instantaneous
    rate dependency is resolved before it is read.  Deterministic: ties
    break by ascending k."""
    edges = _instantaneous_edges(network)
    indegree = {k: 0 for k in edges}
    for srcs in edges.values():
        for dst in srcs:
            indegree[dst] += 1
    heap = [k for k, d in indegree.items() if d == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        k = heapq.heappop(heap)
        order.append(k)
        for dst in sorted(edges[k]):
            indegree[dst] -= 1
            if indegree[dst] == 0:
                heapq.heappush(heap, dst)
    if len(order) != len(edges):
        raise ValueError("algebraic loop; validate() should have caught this")
    return order


# ---------------------------------------------------------------------------
# Steady-state vapor power cycle (the archetypal closed material loop)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankineState:
    """Steady-state operating point of a four-station vapor power loop.

    Stations: 1 = turbine inlet, 2 = turbine exit / condenser inlet,
    3 = condenser exit / pump inlet, 4 = pump exit / boiler inlet.
    Enthalpies are user-supplied (kJ/kg); property tables are out of scope.
    The loop counts eight compartments: the four machines plus the four
    pipes carrying the working fluid between them.
    """

    mass_flow: float  # kg/s, identical around the loop at steady state
    h1: float
    h2: float
    h3: float
    h4: float
    pipes: int = 4

    def check(self) -> list[str]:
        # Equal enthalpies are tolerated as the degenerate zero-work cycle;
        # a reversed drop (h2 > h1) is a modeling error.
        problems = []
        if self.h1 < self.h2:
            problems.append(f"turbine must expand: h1={self.h1} < h2={self.h2}")
        if self.h4 < self.h3:
            problems.append(f"pump must compress: h4={self.h4} < h3={self.h3}")
        if not self.h1 - self.h4 > 0:
            problems.append("boiler heat input must be positive")
        if not self.mass_flow > 0:
            problems.append(f"mass flow must be positive, got {self.mass_flow}")
        if self.pipes != 4:
            problems.append(f"loop has 4 pipes, got {self.pipes}")
        return problems


@dataclass(frozen=True)
class CyclePerformance:
    work_turbine: float  # kJ/kg
    work_pump: float
    heat_in: float
    heat_out: float
    efficiency: float
    mass_flow: float
    compartments: int = 8

    @property
    def net_work(self) -> float:
        return self.work_turbine - self.work_pump

    @property
    def closure_residual(self) -> float:
        """First-law residual q_in - q_out - w_net; zero up to round-off."""
        return self.heat_in - self.heat_out - self.net_work


def rankine_eval(state: RankineState) -> CyclePerformance:
    """Per-compartment energy balances of the closed loop at steady state.

    Each machine is a control volume with zero energy storage, so the four
    balances reduce to enthalpy differences; the thermal efficiency is the
    net specific work over the boiler heat input.
    """
    problems = state.check()
    if problems:
        raise ValueError("; ".join(problems))
    w_t = state.h1 - state.h2
    w_p = state.h4 - state.h3
    q_in = state.h1 - state.h4
    q_out = state.h2 - state.h3
    eta = (w_t - w_p) / q_in
    perf = CyclePerformance(
        work_turbine=w_t,
        work_pump=w_p,
        heat_in=q_in,
        heat_out=q_out,
        efficiency=eta,
        mass_flow=state.mass_flow,
        compartments=4 + state.pipes,
    )
    if abs(perf.closure_residual) > 1e-9 * q_in:
        raise ArithmeticError(
            f"energy closure residual {perf.closure_residual} exceeds 1e-9*q_in"
        )
    return perf
