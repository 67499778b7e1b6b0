"""Fixed-step integration of the coupled compartment mass balances.

A network is compiled once into flat state slots (stores first, then one
cumulative-mass slot per connection) and a list of per-compartment closures.
Each derivative evaluation runs two phases: *emit* computes every output
connection rate in an order that resolves instantaneous dependencies, then
*settle* forms the store derivatives from the now-complete rate vector.

Because the cumulative connection integrals ride along in the state vector,
they share the integrator's quadrature exactly, which makes the conservation
ledger an identity up to round-off.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from . import compartments as _comp
from .core import Connection, InvalidNetworkError, Network, validate

__all__ = [
    "SimConfig",
    "CompiledNetwork",
    "Trajectory",
    "SimEvent",
    "ConservationReport",
    "SimulationNumericsError",
    "compile_network",
    "step",
    "simulate",
    "check_conservation",
    "write_trajectory_csv",
]

_NEGATIVE_STORE_TOL = 1e-9


@dataclass(frozen=True)
class SimConfig:
    dt: float
    horizon: float
    method: str = "rk4"
    seed: int = 0
    conservation_tol: float = 1e-14  # per-step, relative

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.horizon < self.dt:
            raise ValueError(f"horizon {self.horizon} shorter than dt {self.dt}")
        if self.method not in ("rk4", "euler"):
            raise ValueError(f"unknown method {self.method!r}")

    @classmethod
    def from_network(cls, network: Network, **overrides) -> "SimConfig":
        spec = network.simulation
        values = dict(dt=spec.dt, horizon=spec.horizon, method=spec.method, seed=spec.seed)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-12))


@dataclass(frozen=True)
class SimEvent:
    time: float
    step: int
    kind: str
    compartment: int
    detail: str = ""


class SimulationNumericsError(ArithmeticError):
    def __init__(self, step_index: int, time: float, compartments: list[int]):
        self.step_index = step_index
        self.time = time
        self.compartments = compartments
        ids = ", ".join(f"c{k}" for k in compartments) or "connection integrals"
        super().__init__(f"non-finite state at step {step_index} (t={time}): {ids}")


class CompiledNetwork:
    """A network lowered to flat slots and rate closures.

    State layout: ``[store slots..., connection cumulative slots...]``.
    Store slots are ordered by ascending compartment index then material
    index; connection slots follow file order.
    """

    def __init__(self, network: Network, dt_ref: float):
        if dt_ref <= 0:
            raise ValueError("dt_ref must be positive")
        self.network = network
        self.dt_ref = dt_ref

        mat_index = {m.label: m.index for m in network.materials}
        comps = sorted(network.compartments, key=lambda c: c.id.k)

        self.store_slots: list[tuple[int, str]] = []
        for comp in comps:
            mats = set(_comp.store_materials(comp)) | set(comp.store)
            if comp.kind == _comp.Kind.SINK:
                mats |= {
                    conn.from_port.material
                    for conn in network.connections
                    if conn.to_port.compartment == comp.id.k
                }
            for mat in sorted(mats, key=lambda m: mat_index[m]):
                self.store_slots.append((comp.id.k, mat))
        self.slot_of = {key: i for i, key in enumerate(self.store_slots)}
        self.n_store = len(self.store_slots)

        self.connections: list[Connection] = list(network.connections)
        self.conn_index = {conn: j for j, conn in enumerate(self.connections)}
        self.n_conn = len(self.connections)
        self.n_slots = self.n_store + self.n_conn

        self.unsustainable_indices = [self.conn_index[c] for c in network.unsustainable]
        self.return_indices = [self.conn_index[c] for c in network.return_flows]

        # Net type conversions, as (connection index, from material, to material):
        # the mass on such a connection was created in its destination material
        # out of the same mass of the source material.
        self.conversions: list[tuple[int, str, str]] = []
        for conn in self.connections:
            comp = network.compartment(conn.from_port.compartment)
            if comp.kind == _comp.Kind.TRANSFORMER and conn.from_port.name == "out":
                p = comp.params
                if p.input_material != p.output_material:
                    self.conversions.append(
                        (self.conn_index[conn], p.input_material, p.output_material)
                    )
            elif comp.kind == _comp.Kind.RECYCLER and conn.from_port.name == "return":
                p = comp.params
                if p.return_material != p.material:
                    self.conversions.append(
                        (self.conn_index[conn], p.material, p.return_material)
                    )

        kinds = {comp.id.k: comp.kind for comp in comps}
        self.source_ks = [c.id.k for c in comps if c.kind == _comp.Kind.SOURCE]
        self.sink_ks = [c.id.k for c in comps if c.kind == _comp.Kind.SINK]
        # Extraction is accounted on the source output connections rather than
        # on the reserves: a large reserve rounds at coarse absolute
        # granularity, while the connection integrals share the integrator's
        # quadrature at flow scale, keeping the ledger identity exact.
        self.extraction_conns: dict[str, list[int]] = {m.label: [] for m in network.materials}
        for j, conn in enumerate(self.connections):
            if kinds[conn.from_port.compartment] == _comp.Kind.SOURCE:
                self.extraction_conns[conn.from_port.material].append(j)
        self.economy_slots: dict[str, list[int]] = {m.label: [] for m in network.materials}
        self.source_slots: dict[str, list[int]] = {m.label: [] for m in network.materials}
        self.sink_slots: dict[str, list[int]] = {m.label: [] for m in network.materials}
        for i, (k, mat) in enumerate(self.store_slots):
            if kinds[k] == _comp.Kind.SOURCE:
                self.source_slots[mat].append(i)
            elif kinds[k] == _comp.Kind.SINK:
                self.sink_slots[mat].append(i)
            else:
                self.economy_slots[mat].append(i)

        self._emits: list[Callable] = []
        self._settles: list[Callable] = []
        by_k = {comp.id.k: comp for comp in comps}
        for k in _comp.instantaneous_order(network):
            emit, settle = self._build(by_k[k])
            if emit is not None:
                self._emits.append(emit)
            self._settles.append(settle)

    # -- construction helpers ------------------------------------------------

    def _out_conn(self, k: int, port: str) -> Optional[int]:
        hits = [
            j
            for j, c in enumerate(self.connections)
            if c.from_port.compartment == k and c.from_port.name == port
        ]
        return hits[0] if hits else None

    def _in_conns(self, k: int, port: Optional[str] = None) -> list[int]:
        return [
            j
            for j, c in enumerate(self.connections)
            if c.to_port.compartment == k and (port is None or c.to_port.name == port)
        ]

    def _build(self, comp) -> tuple[Optional[Callable], Callable]:
        """Emit/settle closure pair for one compartment.

        Closures bind parameter values and slot indices as locals; the sorter
        split is routed through the module-level rate function so tests can
        inject faults there.
        """
        kind = comp.kind
        k = comp.id.k
        p = comp.params
        dt_ref = self.dt_ref

        if kind == _comp.Kind.SOURCE:
            slot = self.slot_of[(k, p.material)]
            out_conn = self._out_conn(k, "out")
            demand = p.demand
            max_rate = p.max_rate
            ret_conns = self.return_indices if p.offset_by_return else []
            box = [0.0]

            def emit(y, rates, _s=slot, _o=out_conn, _b=box, _r=ret_conns):
                d = demand
                for j in _r:
                    d -= rates[j]
                raw = d if d < max_rate else max_rate
                if raw <= 0.0:
                    out = 0.0
                else:
                    m = y[_s]
                    if m <= 0.0:
                        out = 0.0
                    else:
                        avail = m / dt_ref
                        out = raw if raw < avail else avail
                _b[0] = out
                if _o is not None:
                    rates[_o] = out

            def settle(y, dy, rates, _s=slot, _b=box):
                dy[_s] = -_b[0]

            return emit, settle

        if kind == _comp.Kind.STOCK:
            slot = self.slot_of[(k, p.material)]
            out_conn = self._out_conn(k, "out")
            in_conns = self._in_conns(k, "in")
            demand = p.demand
            box = [0.0]

            def emit(y, rates, _s=slot, _o=out_conn, _i=in_conns, _b=box):
                inflow = 0.0
                for j in _i:
                    inflow += rates[j]
                m = y[_s]
                cap = inflow + (m / dt_ref if m > 0.0 else 0.0)
                out = demand if demand < cap else cap
                _b[0] = inflow - out
                if _o is not None:
                    rates[_o] = out

            def settle(y, dy, rates, _s=slot, _b=box):
                dy[_s] = _b[0]

            return emit, settle

        if kind == _comp.Kind.TRANSPORT:
            slot = self.slot_of[(k, p.material)]
            out_conn = self._out_conn(k, "out")
            loss_conn = self._out_conn(k, "loss")
            in_conns = self._in_conns(k, "in")
            inv_t = 1.0 / p.time_constant
            lam = p.loss_fraction
            box = [0.0]

            def emit(y, rates, _s=slot, _o=out_conn, _l=loss_conn, _b=box):
                m = y[_s]
                through = m * inv_t if m > 0.0 else 0.0
                _b[0] = through
                loss = lam * through
                if _o is not None:
                    rates[_o] = through - loss
                if _l is not None:
                    rates[_l] = loss

            def settle(y, dy, rates, _s=slot, _i=in_conns, _b=box):
                inflow = 0.0
                for j in _i:
                    inflow += rates[j]
                dy[_s] = inflow - _b[0]

            return emit, settle

        if kind == _comp.Kind.TRANSFORMER:
            slot = self.slot_of[(k, p.input_material)]
            out_conn = self._out_conn(k, "out")
            waste_conn = self._out_conn(k, "waste")
            in_conns = self._in_conns(k, "in")
            capacity = p.rate_capacity
            yield_fraction = p.yield_fraction
            box = [0.0]

            def emit(y, rates, _s=slot, _o=out_conn, _w=waste_conn, _i=in_conns, _b=box):
                inflow = 0.0
                for j in _i:
                    inflow += rates[j]
                m = y[_s]
                potential = inflow + (m / dt_ref if m > 0.0 else 0.0)
                processed = potential if potential < capacity else capacity
                out = yield_fraction * processed
                _b[0] = inflow - processed
                if _o is not None:
                    rates[_o] = out
                if _w is not None:
                    rates[_w] = processed - out

            def settle(y, dy, rates, _s=slot, _b=box):
                dy[_s] = _b[0]

            return emit, settle

        if kind == _comp.Kind.SORTER:
            slot = self.slot_of[(k, p.material)]
            accept_conn = self._out_conn(k, "accept")
            alt_conn = self._out_conn(k, "accept_alt")
            reject_conn = self._out_conn(k, "reject")
            in_conns = self._in_conns(k, "in")
            throughput = p.throughput
            secondary = p.secondary_fraction
            box = [0.0]

            def emit(y, rates, _s=slot, _a=accept_conn, _t=alt_conn, _r=reject_conn,
                     _i=in_conns, _b=box, _p=p):
                inflow = 0.0
                for j in _i:
                    inflow += rates[j]
                m = y[_s]
                potential = inflow + (m / dt_ref if m > 0.0 else 0.0)
                processed = potential if potential < throughput else throughput
                accept, reject = _comp.sorter_split(_p, processed)
                _b[0] = inflow - processed
                if _a is not None:
                    rates[_a] = accept * (1.0 - secondary)
                if _t is not None:
                    rates[_t] = accept * secondary
                if _r is not None:
                    rates[_r] = reject

            def settle(y, dy, rates, _s=slot, _b=box):
                dy[_s] = _b[0]

            return emit, settle

        if kind == _comp.Kind.RECYCLER:
            slot = self.slot_of[(k, p.material)]
            return_conn = self._out_conn(k, "return")
            leak_conn = self._out_conn(k, "leak")
            in_conns = self._in_conns(k, "in")
            inv_t = 1.0 / p.processing_time
            yield_fraction = p.yield_fraction
            box = [0.0]

            def emit(y, rates, _s=slot, _r=return_conn, _l=leak_conn, _b=box):
                m = y[_s]
                processed = m * inv_t if m > 0.0 else 0.0
                _b[0] = processed
                ret = yield_fraction * processed
                if _r is not None:
                    rates[_r] = ret
                if _l is not None:
                    rates[_l] = processed - ret

            def settle(y, dy, rates, _s=slot, _i=in_conns, _b=box):
                inflow = 0.0
                for j in _i:
                    inflow += rates[j]
                dy[_s] = inflow - _b[0]

            return emit, settle

        # Sink: accumulate every inflow per material.
        groups: list[tuple[int, list[int]]] = []
        mats = sorted(
            {m for kk, m in self.store_slots if kk == k},
            key=lambda m: self.slot_of[(k, m)],
        )
        for mat in mats:
            conns = [
                j
                for j, c in enumerate(self.connections)
                if c.to_port.compartment == k and c.from_port.material == mat
            ]
            groups.append((self.slot_of[(k, mat)], conns))

        def settle(y, dy, rates, _g=groups):
            for slot, conns in _g:
                inflow = 0.0
                for j in conns:
                    inflow += rates[j]
                dy[slot] = inflow

        return None, settle

    # -- evaluation ------------------------------------------------------------

    def initial_state(self) -> list[float]:
        y = [0.0] * self.n_slots
        for comp in self.network.compartments:
            for mat, mass in comp.store.items():
                y[self.slot_of[(comp.id.k, mat)]] = float(mass)
            if comp.kind == _comp.Kind.SOURCE and not comp.store:
                y[self.slot_of[(comp.id.k, comp.params.material)]] = comp.params.reserve
        return y

    def derivative(self, y: Sequence[float]) -> tuple[list[float], list[float]]:
        """Vector field and instantaneous connection rates at state ``y``."""
        rates = [0.0] * self.n_conn
        for emit in self._emits:
            emit(y, rates)
        dy = [0.0] * self.n_slots
        for settle in self._settles:
            settle(y, dy, rates)
        n_store = self.n_store
        for j in range(self.n_conn):
            dy[n_store + j] = rates[j]
        return dy, rates


def compile_network(network: Network, dt_ref: float) -> CompiledNetwork:
    return CompiledNetwork(network, dt_ref)


def step(
    compiled: CompiledNetwork,
    y: Sequence[float],
    dt: float,
    method: str = "rk4",
) -> tuple[list[float], list[float]]:
    """One explicit step; returns the new state and the stage-start rates."""
    f = compiled.derivative
    y = list(y)
    k1, r1 = f(y)
    if method == "euler":
        return [yi + dt * ki for yi, ki in zip(y, k1)], r1
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")
    half = 0.5 * dt
    k2, _ = f([yi + half * ki for yi, ki in zip(y, k1)])
    k3, _ = f([yi + half * ki for yi, ki in zip(y, k2)])
    k4, _ = f([yi + dt * ki for yi, ki in zip(y, k3)])
    sixth = dt / 6.0
    y_new = [
        yi + sixth * (a + 2.0 * (b + c) + d)
        for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
    ]
    return y_new, r1


def _diagnose(compiled: CompiledNetwork, last_good, y_bad) -> list[int]:
    """Compartments responsible for a non-finite state: the emitters of
    non-finite rates or store derivatives at the last finite state, falling
    back to the compartments whose stores went non-finite."""
    culprits: set[int] = set()
    try:
        dy, rates = compiled.derivative(list(last_good))
    except Exception:
        dy, rates = [], []
    for j, r in enumerate(rates):
        if not math.isfinite(r):
            culprits.add(compiled.connections[j].from_port.compartment)
    for s in range(min(len(dy), compiled.n_store)):
        if not math.isfinite(dy[s]):
            culprits.add(compiled.store_slots[s][0])
    if not culprits:
        for s in range(compiled.n_store):
            if not math.isfinite(y_bad[s]):
                culprits.add(compiled.store_slots[s][0])
    return sorted(culprits)


@dataclass
class Ledger:
    """Per-material bookkeeping series derived from a trajectory."""

    materials: list[str]
    total_initial: dict[str, float]
    total_stored: dict[str, np.ndarray]
    cumulative_extracted: dict[str, np.ndarray]
    cumulative_sunk: dict[str, np.ndarray]
    cumulative_converted: dict[str, np.ndarray]

    def residual(self, material: str) -> np.ndarray:
        """total stored + sunk - initial - extracted - net converted; an
        identity of the dynamics, so any departure is integration round-off."""
        return (
            self.total_stored[material]
            + self.cumulative_sunk[material]
            - self.total_initial[material]
            - self.cumulative_extracted[material]
            - self.cumulative_converted[material]
        )

    def total_residual(self) -> np.ndarray:
        # Conversion terms cancel across materials.
        return sum(self.residual(m) for m in self.materials)

    def scale(self) -> float:
        total = sum(self.total_initial.values()) + sum(
            float(self.cumulative_extracted[m][-1]) for m in self.materials
        )
        return max(total, 1e-30)


@dataclass
class Trajectory:
    network: Network
    config: SimConfig
    compiled: CompiledNetwork
    times: np.ndarray
    states: np.ndarray  # (n_steps + 1, n_slots)
    flows: np.ndarray  # (n_steps + 1, n_conn), rates at each recorded state
    events: list[SimEvent] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def store_series(self, k: int, material: str) -> np.ndarray:
        return self.states[:, self.compiled.slot_of[(k, material)]]

    def connection_rate_series(self, conn: Connection) -> np.ndarray:
        return self.flows[:, self.compiled.conn_index[conn]]

    def connection_cumulative(self, conn: Connection) -> np.ndarray:
        j = self.compiled.conn_index[conn]
        return self.states[:, self.compiled.n_store + j]

    def state_mapping(self, step_index: int) -> dict[tuple[int, str], float]:
        row = self.states[step_index]
        return {key: float(row[i]) for i, key in enumerate(self.compiled.store_slots)}

    def flow_record(self, step_index: int) -> dict[Connection, float]:
        row = self.flows[step_index]
        return {conn: float(row[j]) for j, conn in enumerate(self.compiled.connections)}

    @cached_property
    def ledger(self) -> Ledger:
        c = self.compiled
        labels = [m.label for m in self.network.materials]
        stored = {}
        extracted = {}
        sunk = {}
        converted = {}
        initial = {}
        zeros = np.zeros(len(self.times))
        for mat in labels:
            eco = c.economy_slots[mat]
            stored[mat] = self.states[:, eco].sum(axis=1) if eco else zeros.copy()
            initial[mat] = float(stored[mat][0])
            ext = c.extraction_conns[mat]
            if ext:
                cols = [c.n_store + j for j in ext]
                extracted[mat] = self.states[:, cols].sum(axis=1)
            else:
                extracted[mat] = zeros.copy()
            snk = c.sink_slots[mat]
            if snk:
                sunk_mass = self.states[:, snk].sum(axis=1)
                sunk[mat] = sunk_mass - sunk_mass[0]
            else:
                sunk[mat] = zeros.copy()
            converted[mat] = zeros.copy()
        for j, from_mat, to_mat in c.conversions:
            cum = self.states[:, c.n_store + j]
            converted[to_mat] = converted[to_mat] + cum
            converted[from_mat] = converted[from_mat] - cum
        return Ledger(labels, initial, stored, extracted, sunk, converted)

    def summary(self) -> dict:
        led = self.ledger
        final = {
            mat: {
                "total_stored": float(led.total_stored[mat][-1]),
                "cumulative_extracted": float(led.cumulative_extracted[mat][-1]),
                "cumulative_sunk": float(led.cumulative_sunk[mat][-1]),
                "cumulative_converted": float(led.cumulative_converted[mat][-1]),
            }
            for mat in led.materials
        }
        return {
            "network": self.network.name,
            "steps": self.n_steps,
            "dt": self.config.dt,
            "horizon": self.config.horizon,
            "method": self.config.method,
            "final_time": float(self.times[-1]),
            "ledger": final,
            "events": [
                {"time": e.time, "step": e.step, "kind": e.kind, "compartment": e.compartment}
                for e in self.events
            ],
        }


def simulate(network: Network, config: Optional[SimConfig] = None) -> Trajectory:
    """Integrate the assembled network over the configured horizon.

    The network must validate cleanly.  Reserve exhaustion and negative-store
    clamping are recorded as events, never as failures; non-finite state
    aborts with the offending compartments identified.
    """
    report = validate(network)
    if not report.ok:
        raise InvalidNetworkError(report)
    if config is None:
        config = SimConfig.from_network(network)

    compiled = compile_network(network, dt_ref=config.dt)
    n = config.n_steps
    y = compiled.initial_state()

    states = np.empty((n + 1, compiled.n_slots))
    flows = np.empty((n + 1, compiled.n_conn))
    states[0] = y
    events: list[SimEvent] = []
    exhausted: set[int] = set()
    warned_negative: set[int] = set()

    # The availability guard drains a reserve asymptotically, so exhaustion
    # is declared once it falls below a relative sliver of its initial value.
    source_reserve_slots = []
    for k in compiled.source_ks:
        slot = compiled.slot_of[(k, network.compartment(k).params.material)]
        threshold = max(y[slot], 1.0) * 1e-12
        source_reserve_slots.append((slot, k, threshold))

    dt = config.dt
    method = config.method
    n_store = compiled.n_store
    for i in range(n):
        y, r = step(compiled, y, dt, method)
        flows[i] = r
        t = (i + 1) * dt

        for s in range(n_store):
            v = y[s]
            if v < 0.0:
                k, mat = compiled.store_slots[s]
                if v < -_NEGATIVE_STORE_TOL and k not in warned_negative:
                    warned_negative.add(k)
                    events.append(
                        SimEvent(t, i + 1, "negative-store-clamped", k, f"{mat}: {v:.3e}")
                    )
                y[s] = 0.0
        for slot, k, threshold in source_reserve_slots:
            if y[slot] <= threshold and k not in exhausted:
                exhausted.add(k)
                events.append(SimEvent(t, i + 1, "reserve-exhausted", k))

        if any(not math.isfinite(v) for v in y):
            raise SimulationNumericsError(i + 1, t, _diagnose(compiled, states[i], y))
        states[i + 1] = y

    _, r = compiled.derivative(y)
    flows[n] = r
    times = np.arange(n + 1, dtype=float) * dt
    return Trajectory(network, config, compiled, times, states, flows, events)


@dataclass
class ConservationReport:
    passed: bool
    tolerance: float
    n_steps: int
    max_relative_drift: float
    worst_step: int
    worst_material: str
    per_material: dict[str, float]

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"conservation {status}: max relative drift {self.max_relative_drift:.3e} "
            f"({self.worst_material!r} at step {self.worst_step}), "
            f"budget {self.tolerance:.1e} x {self.n_steps} steps"
        )


def check_conservation(traj: Trajectory, tol: Optional[float] = None) -> ConservationReport:
    """Audit the ledger identity at every recorded step.

    Matter can be moved, stored, or dissipated into sinks, never created:
    per material, stored + sunk must equal initial + extracted + net
    converted.  Passes when the worst relative departure stays within
    ``tol`` per step, accumulated over the run.
    """
    if tol is None:
        tol = traj.config.conservation_tol
    led = traj.ledger
    scale = led.scale()
    worst = 0.0
    worst_step = 0
    worst_mat = led.materials[0] if led.materials else ""
    per_material: dict[str, float] = {}
    for mat in led.materials:
        res = np.abs(led.residual(mat)) / scale
        idx = int(np.argmax(res))
        per_material[mat] = float(res[idx])
        if res[idx] > worst:
            worst = float(res[idx])
            worst_step = idx
            worst_mat = mat
    n = traj.n_steps
    return ConservationReport(
        passed=worst <= tol * max(n, 1),
        tolerance=tol,
        n_steps=n,
        max_relative_drift=worst,
        worst_step=worst_step,
        worst_material=worst_mat,
        per_material=per_material,
    )


def write_trajectory_csv(
    traj: Trajectory,
    path,
    extra_columns: Optional[dict[str, np.ndarray]] = None,
) -> None:
    """One row per recorded step: time, stores by ascending compartment
    index, connection rates in file order, then any extra columns."""
    compiled = traj.compiled
    header = ["time"]
    header += [f"m_c{k}_{mat}" for k, mat in compiled.store_slots]
    header += [
        f"q{j}_c{c.from_port.compartment}.{c.from_port.name}"
        f"__c{c.to_port.compartment}.{c.to_port.name}"
        for j, c in enumerate(compiled.connections)
    ]
    extras = extra_columns or {}
    header += list(extras)

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(traj.times)):
            row = [repr(float(traj.times[i]))]
            row += [repr(float(v)) for v in traj.states[i, : compiled.n_store]]
            row += [repr(float(v)) for v in traj.flows[i]]
            row += [repr(float(extras[name][i])) for name in extras]
            writer.writerow(row)
