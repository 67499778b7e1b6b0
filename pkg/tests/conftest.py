from __future__ import annotations

import pytest

from circuflow import compartments as comp
from circuflow import netio
from circuflow.core import (
    CompartmentId,
    Connection,
    MaterialType,
    Network,
    Port,
    SimSpec,
)
from circuflow.simulator import SimConfig

BUNDLED = [
    "rankine_loop",
    "fig3b_synthetic_linear",
    "fig3c_synthetic_circular",
    "fig3d_bio_recycle",
    "fig3e_bio_reuse",
    "fig3f_bio_repair",
]


def connect(from_k: int, from_port: str, to_k: int, to_port: str, material: str) -> Connection:
    return Connection(
        Port(from_k, "output", from_port, material),
        Port(to_k, "input", to_port, material),
    )


def stock(k: int, material: str, demand: float, mass: float = 0.0,
          i: int | None = None, j: int | None = None) -> comp.Compartment:
    return comp.Compartment(
        CompartmentId(k, i if i is not None else k, j if j is not None else k),
        comp.Kind.STOCK,
        comp.StockParams(material, demand),
        {material: mass} if mass else {},
    )


def transport(k: int, i: int, j: int, material: str, time_constant: float,
              loss: float = 0.0, mass: float = 0.0) -> comp.Compartment:
    return comp.Compartment(
        CompartmentId(k, i, j),
        comp.Kind.TRANSPORT,
        comp.TransportParams(material, time_constant, loss),
        {material: mass} if mass else {},
    )


def source(k: int, material: str, reserve: float, max_rate: float, demand: float,
           offset: bool = False) -> comp.Compartment:
    return comp.Compartment(
        CompartmentId(k, k, k),
        comp.Kind.SOURCE,
        comp.SourceParams(material, reserve, max_rate, demand, offset),
        {material: reserve},
    )


def sink(k: int) -> comp.Compartment:
    return comp.Compartment(CompartmentId(k, k, k), comp.Kind.SINK, comp.SinkParams(), {})


def closed_loop_network(dt: float = 0.01, horizon: float = 1000.0) -> Network:
    """Stock -> transport -> stock -> (direct) -> first stock, mass 8 kg."""
    mat = "pellets"
    comps = [
        stock(1, mat, 0.5, mass=3.0),
        stock(2, mat, 0.5, mass=3.0),
        transport(3, 1, 2, mat, 10.0, mass=2.0),
    ]
    conns = [
        connect(1, "out", 3, "in", mat),
        connect(3, "out", 2, "in", mat),
        connect(2, "out", 1, "in", mat),
    ]
    return Network(
        [MaterialType(1, mat)],
        comps,
        conns,
        name="closed_loop",
        simulation=SimSpec(dt, horizon),
    )


def decay_network(dt: float, time_constant: float = 1.0, horizon: float = 1.0) -> Network:
    """Charged transport draining into a sink; analytic exp(-t/T) store."""
    mat = "pellets"
    comps = [
        stock(1, mat, 0.0),
        sink(2),
        transport(3, 1, 2, mat, time_constant, mass=1.0),
    ]
    conns = [connect(3, "out", 2, "in", mat)]
    return Network(
        [MaterialType(1, mat)],
        comps,
        conns,
        name="decay",
        simulation=SimSpec(dt, horizon),
    )


def chain_network(extraction_rate: float = 2.0, stock_demand: float = 1.0,
                  dt: float = 0.1, horizon: float = 10.0) -> Network:
    """Source -> stock -> sink with both boundary flows designated."""
    mat = "pellets"
    comps = [
        source(1, mat, 1e6, 10.0, extraction_rate),
        stock(2, mat, stock_demand),
        sink(3),
    ]
    conns = [
        connect(1, "out", 2, "in", mat),
        connect(2, "out", 3, "in", mat),
    ]
    return Network(
        [MaterialType(1, mat)],
        comps,
        conns,
        unsustainable=[conns[0], conns[1]],
        name="chain",
        simulation=SimSpec(dt, horizon),
    )


@pytest.fixture(scope="session")
def bundled_networks():
    return {name: netio.load_network(netio.bundled_path(name)) for name in BUNDLED}


@pytest.fixture(scope="session")
def fig3b(bundled_networks):
    return bundled_networks["fig3b_synthetic_linear"]


@pytest.fixture(scope="session")
def fig3c(bundled_networks):
    return bundled_networks["fig3c_synthetic_circular"]


@pytest.fixture(scope="session")
def fig3d(bundled_networks):
    return bundled_networks["fig3d_bio_recycle"]


@pytest.fixture
def short_config():
    """Two simulated days at two-minute steps: past the loop transients but
    quick enough for sweeps."""
    return SimConfig(dt=120.0, horizon=172800.0)
