"""Domain types for material-flow networks: materials, compartment identity,
ports, connections, and whole-network structural validation.

A network is a set of compartments exchanging material along directed, typed
connections.  Compartments carry a global index ``k`` and a pair of life-cycle
stage indices ``(i, j)``: transport compartments bridge two distinct stages,
every other kind sits on the diagonal (i = j = k).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

__all__ = [
    "MaterialType",
    "CompartmentId",
    "Port",
    "Connection",
    "Network",
    "Violation",
    "ValidationReport",
    "validate",
    "total_mass",
]


@dataclass(frozen=True)
class MaterialType:
    """One material circulating in a network, e.g. ``synthetic-plastic``."""

    index: int
    label: str


@dataclass(frozen=True)
class CompartmentId:
    """Compartment identity: global index k, stage pair (i, j)."""

    k: int
    i: int
    j: int

    @property
    def is_diagonal(self) -> bool:
        return self.i == self.j == self.k

    def __str__(self) -> str:
        return f"c{self.k}({self.i},{self.j})"


@dataclass(frozen=True)
class Port:
    """A named material endpoint on one compartment."""

    compartment: int  # compartment index k
    direction: str  # "input" | "output"
    name: str
    material: str  # material label

    def __str__(self) -> str:
        return f"c{self.compartment}.{self.name}"


@dataclass(frozen=True)
class Connection:
    """Directed flow link from one output port to one input port."""

    from_port: Port
    to_port: Port

    def __str__(self) -> str:
        return f"{self.from_port}->{self.to_port}"


@dataclass(frozen=True)
class SimSpec:
    """Simulation settings carried by a network file (flags may override)."""

    dt: float = 1.0
    horizon: float = 100.0
    method: str = "rk4"
    seed: int = 0


@dataclass
class Network:
    """A validated set of compartments plus their typed flow connections.

    ``unsustainable`` and ``return_flows`` designate subsets of
    ``connections``: the boundary flows a design should minimize (virgin
    extraction, leaks to the environment) and the recovered flows re-entering
    the supply chain.  Designations are explicit annotations from the network
    file, never inferred.
    """

    materials: list[MaterialType]
    compartments: list  # list[Compartment]; typed in compartments.py
    connections: list[Connection]
    unsustainable: list[Connection] = field(default_factory=list)
    return_flows: list[Connection] = field(default_factory=list)
    name: str = ""
    simulation: SimSpec = field(default_factory=SimSpec)

    def material_labels(self) -> list[str]:
        return [m.label for m in self.materials]

    def compartment(self, k: int):
        for comp in self.compartments:
            if comp.id.k == k:
                return comp
        raise KeyError(f"no compartment with k={k}")

    def connections_from(self, k: int, port: Optional[str] = None) -> list[Connection]:
        return [
            c
            for c in self.connections
            if c.from_port.compartment == k and (port is None or c.from_port.name == port)
        ]

    def connections_into(self, k: int, port: Optional[str] = None) -> list[Connection]:
        return [
            c
            for c in self.connections
            if c.to_port.compartment == k and (port is None or c.to_port.name == port)
        ]

    def with_param(self, k: int, name: str, value) -> "Network":
        """Copy of the network with one compartment parameter replaced."""
        comps = []
        for comp in self.compartments:
            if comp.id.k == k:
                if not hasattr(comp.params, name):
                    raise AttributeError(
                        f"compartment {comp.id} ({comp.kind}) has no parameter {name!r}"
                    )
                comp = replace(comp, params=replace(comp.params, **{name: value}))
            comps.append(comp)
        return replace(self, compartments=comps)


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.subject}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, subject: str, message: str) -> None:
        self.violations.append(Violation(code, subject, message))

    def __iter__(self):
        return iter(self.violations)

    def __len__(self) -> int:
        return len(self.violations)

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(str(v) for v in self.violations)


class InvalidNetworkError(ValueError):
    """Raised when an operation requires a valid network and got violations."""

    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__(f"network is invalid:\n{report}")


def validate(network: Network) -> ValidationReport:
    """Check every structural invariant; violations are data, not failures.

    An empty report means the network is valid.  The checks cover material
    indexing, compartment identity, per-kind parameter bounds, port and
    connection typing, designation subsets, and the absence of instantaneous
    algebraic loops (every feedback cycle must pass through a stateful lag).
    """
    from . import compartments as _comp

    report = ValidationReport()

    # Materials: unique indices covering 1..Q, unique labels.
    labels = [m.label for m in network.materials]
    indices = sorted(m.index for m in network.materials)
    if len(set(labels)) != len(labels):
        report.add("material-duplicate-label", "materials", "labels must be unique")
    q = len(network.materials)
    if indices != list(range(1, q + 1)):
        report.add(
            "material-index-range",
            "materials",
            f"indices must be exactly 1..{q}, got {indices}",
        )
    label_set = set(labels)

    # Compartment identity: k unique and covering 1..n_c, stage rules.
    ks = [comp.id.k for comp in network.compartments]
    seen: set[int] = set()
    for k in ks:
        if k in seen:
            report.add("duplicate-compartment-index", f"k={k}", "compartment index reused")
        seen.add(k)
    n_c = len(network.compartments)
    if seen and (min(seen) < 1 or max(seen) > n_c):
        report.add(
            "compartment-index-range",
            "compartments",
            f"indices must lie in 1..{n_c}",
        )
    diagonal = {comp.id.k for comp in network.compartments if comp.id.is_diagonal}

    for comp in network.compartments:
        cid = comp.id
        if comp.kind == _comp.Kind.TRANSPORT:
            if cid.i == cid.j:
                report.add("transport-stage", str(cid), "transport requires i != j")
            else:
                for stage in (cid.i, cid.j):
                    if stage not in diagonal:
                        report.add(
                            "transport-stage",
                            str(cid),
                            f"stage {stage} has no diagonal compartment",
                        )
        else:
            if not cid.is_diagonal:
                report.add("stage-diagonal", str(cid), "non-transport requires i = j = k")
        for problem in _comp.check_params(comp, label_set):
            report.add("param-bounds", str(cid), problem)
        for mat, mass in comp.store.items():
            if mat not in label_set:
                report.add("store-material", str(cid), f"unknown material {mat!r}")
            elif mass < 0:
                report.add("store-negative", str(cid), f"initial mass of {mat!r} is negative")
            elif mat not in _comp.store_materials(comp):
                report.add(
                    "store-material",
                    str(cid),
                    f"material {mat!r} is not handled by this {comp.kind.value}",
                )

    by_k = {comp.id.k: comp for comp in network.compartments}

    # Connections: endpoint existence, port names, matched materials,
    # one connection per output port.
    seen_outputs: dict[tuple[int, str], int] = {}
    for conn in network.connections:
        subject = str(conn)
        ok_endpoints = True
        for port, direction in ((conn.from_port, "output"), (conn.to_port, "input")):
            if port.compartment not in by_k:
                report.add("connection-endpoint", subject, f"no compartment k={port.compartment}")
                ok_endpoints = False
                continue
            if port.direction != direction:
                report.add("connection-direction", subject, f"{port} is not an {direction} port")
            comp = by_k[port.compartment]
            err = _comp.check_port(comp, direction, port.name, port.material)
            if err:
                report.add("connection-port", subject, err)
        if not ok_endpoints:
            continue
        if conn.from_port.material != conn.to_port.material:
            report.add(
                "connection-material",
                subject,
                f"{conn.from_port.material!r} flows into {conn.to_port.material!r}",
            )
        key = (conn.from_port.compartment, conn.from_port.name)
        seen_outputs[key] = seen_outputs.get(key, 0) + 1
        if seen_outputs[key] == 2:
            report.add("output-fanout", subject, "output port feeds more than one connection")

    # Input ports may merge several feeders, but only of one material.
    port_materials: dict[tuple[int, str], str] = {}
    for conn in network.connections:
        key = (conn.to_port.compartment, conn.to_port.name)
        prev = port_materials.setdefault(key, conn.from_port.material)
        if prev != conn.from_port.material:
            report.add(
                "input-material-mix",
                str(conn.to_port),
                f"port receives both {prev!r} and {conn.from_port.material!r}",
            )

    # Every output port that can carry mass must be connected.
    connected = {(c.from_port.compartment, c.from_port.name) for c in network.connections}
    for comp in network.compartments:
        for port_name in _comp.active_output_ports(comp):
            if (comp.id.k, port_name) not in connected:
                report.add(
                    "output-unconnected",
                    f"{comp.id}.{port_name}",
                    "output port can carry mass but feeds no connection",
                )

    conn_set = set(network.connections)
    for label, designated in (
        ("unsustainable", network.unsustainable),
        ("return", network.return_flows),
    ):
        for conn in designated:
            if conn not in conn_set:
                report.add(
                    "designation-unknown",
                    str(conn),
                    f"designated {label} flow is not a network connection",
                )

    # Instantaneous dependency cycles make the vector field ill-defined.
    if report.ok:
        cycle = _comp.find_algebraic_loop(network)
        if cycle:
            report.add(
                "algebraic-loop",
                "->".join(f"c{k}" for k in cycle),
                "feedback cycle without a stateful lag compartment",
            )

    return report


def total_mass(
    network: Network,
    state: Optional[Mapping[tuple[int, str], float]] = None,
) -> dict[MaterialType, float]:
    """Sum stored mass per material over all compartments.

    ``state`` maps ``(k, material label)`` to mass and defaults to the
    network's initial stores.  Keys must match the network's compartments and
    materials exactly.
    """
    by_label = {m.label: m for m in network.materials}
    totals = {m: 0.0 for m in network.materials}
    if state is None:
        for comp in network.compartments:
            for mat, mass in comp.store.items():
                totals[by_label[mat]] += mass
        return totals

    known = {(comp.id.k, mat) for comp in network.compartments for mat in by_label}
    for (k, mat), mass in state.items():
        if (k, mat) not in known:
            raise KeyError(f"state entry ({k}, {mat!r}) does not match the network")
        totals[by_label[mat]] += mass
    return totals
