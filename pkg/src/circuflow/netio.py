"""Network file loading and saving.

The on-disk format is a single JSON document with top-level keys
``materials``, ``compartments``, ``connections``, ``unsustainable``,
``return``, and ``simulation``.  Every compartment entry carries ``k``,
``i``, ``j``, ``kind``, ``params``, and ``initial_mass``.  Parameter keys are
the lower_snake_case field names of the parameter records (``yield`` for the
yield fraction).  Loading reports *all* problems, not just the first, with
the JSON path of each offending field.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Optional

from . import compartments as comp
from .core import (
    CompartmentId,
    Connection,
    InvalidNetworkError,
    MaterialType,
    Network,
    Port,
    SimSpec,
    validate,
)

__all__ = [
    "NetworkFormatError",
    "load_network",
    "network_from_dict",
    "network_to_dict",
    "save_network",
    "bundled_path",
    "bundled_names",
]

_KIND_NAMES = {k.value: k for k in comp.Kind}

_PARAM_FIELDS = {
    comp.Kind.SOURCE: {
        "material": str,
        "reserve": float,
        "max_rate": float,
        "demand": float,
        "offset_by_return": bool,
    },
    comp.Kind.STOCK: {"material": str, "demand": float},
    comp.Kind.TRANSPORT: {"material": str, "time_constant": float, "loss_fraction": float},
    comp.Kind.TRANSFORMER: {
        "input_material": str,
        "output_material": str,
        "yield": float,
        "rate_capacity": float,
    },
    comp.Kind.SORTER: {
        "material": str,
        "success_rate": float,
        "throughput": float,
        "item_mass": float,
        "item_rate": float,
        "secondary_fraction": float,
    },
    comp.Kind.RECYCLER: {
        "material": str,
        "yield": float,
        "processing_time": float,
        "output_material": str,
    },
    comp.Kind.SINK: {},
}

_OPTIONAL_PARAMS = {
    comp.Kind.SOURCE: {"demand", "offset_by_return"},
    comp.Kind.SORTER: {"item_mass", "item_rate", "throughput", "secondary_fraction"},
    comp.Kind.TRANSPORT: {"loss_fraction"},
    comp.Kind.RECYCLER: {"output_material"},
}


class NetworkFormatError(ValueError):
    """Raised with every schema problem found in a network document."""

    def __init__(self, source: str, problems: list[str]):
        self.source = source
        self.problems = problems
        lines = "\n".join(f"  - {p}" for p in problems)
        super().__init__(f"{source}: {len(problems)} problem(s)\n{lines}")


class _Collector:
    def __init__(self):
        self.problems: list[str] = []

    def add(self, path: str, message: str) -> None:
        self.problems.append(f"{path}: {message}")


def _coerce(value, target, path: str, errors: _Collector):
    if target is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.add(path, f"expected a number, got {value!r}")
            return 0.0
        return float(value)
    if target is str:
        if not isinstance(value, str):
            errors.add(path, f"expected a string, got {value!r}")
            return ""
        return value
    if target is bool:
        if not isinstance(value, bool):
            errors.add(path, f"expected true/false, got {value!r}")
            return False
        return value
    if target is int:
        if isinstance(value, bool) or not isinstance(value, int):
            errors.add(path, f"expected an integer, got {value!r}")
            return 0
        return value
    raise TypeError(target)


def _parse_params(kind: comp.Kind, raw: dict, path: str, errors: _Collector):
    fields = _PARAM_FIELDS[kind]
    optional = _OPTIONAL_PARAMS.get(kind, set())
    placeholders = {float: 0.0, str: "", bool: False, int: 0}
    values = {}
    for name, target in fields.items():
        if name not in raw:
            if name in optional:
                continue
            errors.add(f"{path}.{name}", "missing required parameter")
            values[name] = placeholders[target]
            continue
        values[name] = _coerce(raw[name], target, f"{path}.{name}", errors)
    for name in raw:
        if name not in fields:
            errors.add(f"{path}.{name}", f"unknown parameter for kind {kind.value!r}")
    if "yield" in values:
        values["yield_fraction"] = values.pop("yield")

    if kind == comp.Kind.SOURCE:
        return comp.SourceParams(**values)
    if kind == comp.Kind.STOCK:
        return comp.StockParams(**values)
    if kind == comp.Kind.TRANSPORT:
        return comp.TransportParams(**values)
    if kind == comp.Kind.TRANSFORMER:
        return comp.TransformerParams(**values)
    if kind == comp.Kind.SORTER:
        if "throughput" not in values:
            rate = values.get("item_rate")
            mass = values.get("item_mass")
            if rate is None or mass is None:
                errors.add(path, "sorter needs throughput or both item_rate and item_mass")
                values["throughput"] = 0.0
            else:
                values["throughput"] = rate * mass / 3600.0
        return comp.SorterParams(**values)
    if kind == comp.Kind.RECYCLER:
        return comp.RecyclerParams(**values)
    return comp.SinkParams()


def _parse_endpoint(raw, path: str, errors: _Collector) -> Optional[tuple[int, str]]:
    if (
        not isinstance(raw, (list, tuple))
        or len(raw) != 2
        or isinstance(raw[0], bool)
        or not isinstance(raw[0], int)
        or not isinstance(raw[1], str)
    ):
        errors.add(path, f"expected [k, \"port\"], got {raw!r}")
        return None
    return int(raw[0]), raw[1]


def _resolve_connection(raw, path: str, by_k: dict, errors: _Collector) -> Optional[Connection]:
    if not isinstance(raw, dict) or "from" not in raw or "to" not in raw:
        errors.add(path, "expected an object with 'from' and 'to'")
        return None
    src = _parse_endpoint(raw["from"], f"{path}.from", errors)
    dst = _parse_endpoint(raw["to"], f"{path}.to", errors)
    if src is None or dst is None:
        return None
    src_k, src_port = src
    dst_k, dst_port = dst
    if src_k not in by_k:
        errors.add(f"{path}.from", f"no compartment with k={src_k}")
        return None
    if dst_k not in by_k:
        errors.add(f"{path}.to", f"no compartment with k={dst_k}")
        return None
    material = comp.port_material(by_k[src_k], "output", src_port)
    if material is None:
        errors.add(
            f"{path}.from",
            f"{by_k[src_k].kind.value} c{src_k} has no output port {src_port!r}",
        )
        return None
    to_material = comp.port_material(by_k[dst_k], "input", dst_port)
    if to_material is None:
        # Sink input ports take the material of whatever feeds them.
        if by_k[dst_k].kind == comp.Kind.SINK:
            to_material = material
        else:
            errors.add(
                f"{path}.to",
                f"{by_k[dst_k].kind.value} c{dst_k} has no input port {dst_port!r}",
            )
            return None
    return Connection(
        Port(src_k, "output", src_port, material),
        Port(dst_k, "input", dst_port, to_material),
    )


def network_from_dict(data: dict, source: str = "<dict>") -> Network:
    """Build and validate a Network from parsed JSON data.

    Raises NetworkFormatError with every schema problem, then
    InvalidNetworkError with every structural violation.
    """
    errors = _Collector()
    if not isinstance(data, dict):
        raise NetworkFormatError(source, ["top level must be an object"])

    known_keys = {
        "name",
        "materials",
        "compartments",
        "connections",
        "unsustainable",
        "return",
        "simulation",
    }
    for key in data:
        if key not in known_keys:
            errors.add(key, "unknown top-level key")

    materials: list[MaterialType] = []
    for idx, raw in enumerate(data.get("materials", [])):
        path = f"materials[{idx}]"
        if not isinstance(raw, dict):
            errors.add(path, "expected an object")
            continue
        materials.append(
            MaterialType(
                index=_coerce(raw.get("index"), int, f"{path}.index", errors),
                label=_coerce(raw.get("label"), str, f"{path}.label", errors),
            )
        )

    compartments = []
    for idx, raw in enumerate(data.get("compartments", [])):
        path = f"compartments[{idx}]"
        if not isinstance(raw, dict):
            errors.add(path, "expected an object")
            continue
        k = _coerce(raw.get("k"), int, f"{path}.k", errors)
        i = _coerce(raw.get("i"), int, f"{path}.i", errors)
        j = _coerce(raw.get("j"), int, f"{path}.j", errors)
        kind_name = raw.get("kind")
        if kind_name not in _KIND_NAMES:
            errors.add(f"{path}.kind", f"unknown kind {kind_name!r}")
            continue
        kind = _KIND_NAMES[kind_name]
        raw_params = raw.get("params", {})
        if not isinstance(raw_params, dict):
            errors.add(f"{path}.params", "expected an object")
            raw_params = {}
        params = _parse_params(kind, raw_params, f"{path}.params", errors)

        store: dict[str, float] = {}
        raw_store = raw.get("initial_mass", None)
        if raw_store is not None:
            if not isinstance(raw_store, dict):
                errors.add(f"{path}.initial_mass", "expected an object of material: kg")
            else:
                for mat, mass in raw_store.items():
                    store[mat] = _coerce(mass, float, f"{path}.initial_mass.{mat}", errors)
        if kind == comp.Kind.SOURCE:
            if store:
                declared = store.get(params.material)
                if declared is not None and declared != params.reserve:
                    errors.add(
                        f"{path}.initial_mass",
                        f"source store {declared} must equal reserve {params.reserve}",
                    )
            else:
                store = {params.material: params.reserve}
        compartments.append(comp.Compartment(CompartmentId(k, i, j), kind, params, store))

    # Duplicate k are reported by validate(); connections resolve to the last.
    by_k = {c.id.k: c for c in compartments}

    connections: list[Connection] = []
    for idx, raw in enumerate(data.get("connections", [])):
        conn = _resolve_connection(raw, f"connections[{idx}]", by_k, errors)
        if conn is not None:
            connections.append(conn)

    conn_lookup = {
        (
            c.from_port.compartment,
            c.from_port.name,
            c.to_port.compartment,
            c.to_port.name,
        ): c
        for c in connections
    }

    def designated(key: str) -> list[Connection]:
        out = []
        for idx, raw in enumerate(data.get(key, [])):
            path = f"{key}[{idx}]"
            if not isinstance(raw, dict) or "from" not in raw or "to" not in raw:
                errors.add(path, "expected an object with 'from' and 'to'")
                continue
            src = _parse_endpoint(raw["from"], f"{path}.from", errors)
            dst = _parse_endpoint(raw["to"], f"{path}.to", errors)
            if src is None or dst is None:
                continue
            found = conn_lookup.get((src[0], src[1], dst[0], dst[1]))
            if found is None:
                errors.add(path, "does not match any connection")
                continue
            out.append(found)
        return out

    unsustainable = designated("unsustainable")
    return_flows = designated("return")

    sim = SimSpec()
    raw_sim = data.get("simulation")
    if raw_sim is not None:
        if not isinstance(raw_sim, dict):
            errors.add("simulation", "expected an object")
        else:
            sim = SimSpec(
                dt=_coerce(raw_sim.get("dt", 1.0), float, "simulation.dt", errors),
                horizon=_coerce(raw_sim.get("horizon", 100.0), float, "simulation.horizon", errors),
                method=_coerce(raw_sim.get("method", "rk4"), str, "simulation.method", errors),
                seed=_coerce(raw_sim.get("seed", 0), int, "simulation.seed", errors),
            )
            if sim.method not in ("rk4", "euler"):
                errors.add("simulation.method", f"unknown method {sim.method!r}")

    if errors.problems:
        raise NetworkFormatError(source, errors.problems)

    network = Network(
        materials=materials,
        compartments=compartments,
        connections=connections,
        unsustainable=unsustainable,
        return_flows=return_flows,
        name=str(data.get("name", "")),
        simulation=sim,
    )
    report = validate(network)
    if not report.ok:
        raise InvalidNetworkError(report)
    return network


def load_network(path) -> Network:
    """Parse, build, and validate a network file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(
            str(path), [f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]
        ) from exc
    return network_from_dict(data, source=str(path))


def _params_to_dict(compartment) -> dict:
    kind = compartment.kind
    p = compartment.params
    out = {}
    for name in _PARAM_FIELDS[kind]:
        attr = "yield_fraction" if name == "yield" else name
        value = getattr(p, attr)
        if value is None:
            continue
        out[name] = value
    return out


def network_to_dict(network: Network) -> dict:
    def endpoint_pair(conn: Connection) -> dict:
        return {
            "from": [conn.from_port.compartment, conn.from_port.name],
            "to": [conn.to_port.compartment, conn.to_port.name],
        }

    return {
        "name": network.name,
        "materials": [{"index": m.index, "label": m.label} for m in network.materials],
        "compartments": [
            {
                "k": c.id.k,
                "i": c.id.i,
                "j": c.id.j,
                "kind": c.kind.value,
                "params": _params_to_dict(c),
                "initial_mass": dict(c.store),
            }
            for c in network.compartments
        ],
        "connections": [endpoint_pair(c) for c in network.connections],
        "unsustainable": [endpoint_pair(c) for c in network.unsustainable],
        "return": [endpoint_pair(c) for c in network.return_flows],
        "simulation": {
            "dt": network.simulation.dt,
            "horizon": network.simulation.horizon,
            "method": network.simulation.method,
            "seed": network.simulation.seed,
        },
    }


def save_network(network: Network, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(network), indent=2) + "\n")


def bundled_path(name: str) -> Path:
    """Filesystem path of a bundled example network or manifest."""
    if not name.endswith(".json"):
        name += ".json"
    ref = resources.files("circuflow").joinpath("data", name)
    with resources.as_file(ref) as p:
        return Path(p)


def bundled_names() -> list[str]:
    ref = resources.files("circuflow").joinpath("data")
    return sorted(p.name[:-5] for p in ref.iterdir() if p.name.endswith(".json"))
