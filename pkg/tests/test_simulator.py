import math
from dataclasses import replace

import numpy as np
import pytest

from circuflow import compartments as comp
from circuflow.core import InvalidNetworkError, MaterialType, Network, SimSpec
from circuflow.simulator import (
    SimConfig,
    SimulationNumericsError,
    check_conservation,
    compile_network,
    simulate,
    step,
    write_trajectory_csv,
)

from conftest import chain_network, closed_loop_network, connect, decay_network, sink, source, stock


class TestStep:
    def test_constant_rate_accumulation_is_exact(self):
        # Inflow 2, offtake 1: the stock gains exactly 1 kg/s.
        net = chain_network(extraction_rate=2.0, stock_demand=1.0, dt=0.1, horizon=10.0)
        traj = simulate(net)
        assert traj.n_steps == 100
        m = traj.store_series(2, "pellets")[-1]
        assert m == pytest.approx(10.0, abs=1e-12)

    def test_transport_lag_matches_analytic_exponential(self):
        # dm/dt = -m/T integrates to exp(-t); classical RK4 at dt=0.1 carries
        # a global truncation error of 3.33e-7 at t=1 (per-step amplification
        # error |R(-0.1) - e^(-0.1)| ~ 8.2e-8, compounded over ten steps).
        traj = simulate(decay_network(dt=0.1))
        m = traj.store_series(3, "pellets")[-1]
        assert m == pytest.approx(math.exp(-1.0), abs=5e-7)
        assert abs(m - math.exp(-1.0)) == pytest.approx(3.33e-7, rel=0.05)

    def test_euler_is_first_order(self):
        errs = []
        for dt in (0.02, 0.01):
            net = decay_network(dt=dt)
            traj = simulate(net, SimConfig(dt=dt, horizon=1.0, method="euler"))
            errs.append(abs(traj.store_series(3, "pellets")[-1] - math.exp(-1.0)))
        assert 0.8 < math.log2(errs[0] / errs[1]) < 1.2

    def test_zero_network_step_is_identity(self):
        net = Network(materials=[], compartments=[], connections=[])
        compiled = compile_network(net, dt_ref=1.0)
        y, rates = step(compiled, [], 0.1)
        assert y == [] and rates == []

    def test_unknown_method_rejected(self):
        compiled = compile_network(closed_loop_network(), dt_ref=0.1)
        with pytest.raises(ValueError):
            step(compiled, compiled.initial_state(), 0.1, method="heun")


class TestSimulate:
    def test_requires_valid_network(self):
        net = closed_loop_network()
        broken = replace(net, connections=net.connections[1:])
        with pytest.raises(InvalidNetworkError):
            simulate(broken)

    def test_closed_loop_conserves_total_mass(self):
        traj = simulate(closed_loop_network(dt=0.01, horizon=100.0))
        report = check_conservation(traj)
        assert report.passed
        totals = traj.states[:, : traj.compiled.n_store].sum(axis=1)
        assert np.max(np.abs(totals - totals[0])) <= 1e-9 * totals[0]

    def test_linear_chain_sinks_monotonically(self, fig3b, short_config):
        traj = simulate(fig3b, short_config)
        sunk = traj.ledger.cumulative_sunk["synthetic-plastic"]
        diffs = np.diff(sunk)
        assert (diffs >= 0).all()
        assert (diffs[5:] > 0).all()
        assert not fig3b.return_flows

    def test_circular_variant_extracts_less_at_equal_demand(self, fig3b, fig3c, short_config):
        linear = simulate(fig3b, short_config)
        circular = simulate(fig3c, short_config)
        lin_ext = linear.ledger.cumulative_extracted["feedstock"][-1]
        cir_ext = circular.ledger.cumulative_extracted["feedstock"][-1]
        assert cir_ext < lin_ext

    def test_deterministic_repeat_runs(self, fig3c, short_config):
        a = simulate(fig3c, short_config)
        b = simulate(fig3c, short_config)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.flows, b.flows)

    def test_reserve_exhaustion_is_event_not_error(self):
        net = chain_network(extraction_rate=2.0, stock_demand=2.0, dt=0.1, horizon=10.0)
        small = replace(
            net,
            compartments=[
                replace(
                    c,
                    params=replace(c.params, reserve=5.0),
                    store={"pellets": 5.0},
                )
                if c.id.k == 1
                else c
                for c in net.compartments
            ],
        )
        traj = simulate(small)
        kinds = {e.kind for e in traj.events}
        assert "reserve-exhausted" in kinds
        # Extraction stops at the reserve: nothing more ever leaves.
        assert traj.ledger.cumulative_extracted["pellets"][-1] == pytest.approx(5.0, abs=1e-9)
        assert traj.flows[-1, 0] == pytest.approx(0.0, abs=1e-12)

    def test_stores_stay_nonnegative_on_bundled_configs(self, bundled_networks, short_config):
        for name, net in bundled_networks.items():
            cfg = short_config if name.startswith("fig") else None
            traj = simulate(net, cfg)
            stores = traj.states[:, : traj.compiled.n_store]
            assert stores.min() >= -1e-12, name
            assert not any(e.kind == "negative-store-clamped" for e in traj.events), name

    def test_times_strictly_increasing(self, fig3d, short_config):
        traj = simulate(fig3d, short_config)
        assert (np.diff(traj.times) > 0).all()

    def test_nan_reported_with_compartment(self, monkeypatch):
        def poisoned(params, processed):
            return float("nan"), float("nan")

        monkeypatch.setattr(comp, "sorter_split", poisoned)
        net = _sorter_chain()
        with pytest.raises(SimulationNumericsError) as err:
            simulate(net)
        assert err.value.compartments  # offending compartment identified
        assert 2 in err.value.compartments


def _sorter_chain() -> Network:
    mat = "pellets"
    comps = [
        source(1, mat, 1e6, 10.0, 1.0),
        comp.Compartment(
            comp.CompartmentId(2, 2, 2),
            comp.Kind.SORTER,
            comp.SorterParams(mat, success_rate=0.8, throughput=5.0),
            {},
        ),
        sink(3),
        sink(4),
    ]
    conns = [
        connect(1, "out", 2, "in", mat),
        connect(2, "accept", 3, "in", mat),
        connect(2, "reject", 4, "in", mat),
    ]
    return Network(
        [MaterialType(1, mat)],
        comps,
        conns,
        unsustainable=[conns[0]],
        name="sorter_chain",
        simulation=SimSpec(0.1, 50.0),
    )


class TestConservationAudit:
    def test_ledger_identity_with_source_and_sink(self):
        traj = simulate(chain_network(dt=0.1, horizon=50.0))
        led = traj.ledger
        res = np.abs(led.residual("pellets"))
        assert res.max() <= 1e-10

    def test_injected_sorter_bug_is_caught_with_step_index(self, monkeypatch):
        original = comp.sorter_split.__wrapped__ if hasattr(comp.sorter_split, "__wrapped__") else comp.sorter_split

        def inflating(params, processed):
            accept, reject = original(params, processed)
            return accept, reject * 1.01 + 0.01 * accept

        monkeypatch.setattr(comp, "sorter_split", inflating)
        traj = simulate(_sorter_chain())
        report = check_conservation(traj)
        assert not report.passed
        assert report.worst_step > 0
        assert report.max_relative_drift > 1e-6

    def test_clean_sorter_chain_passes(self):
        report = check_conservation(simulate(_sorter_chain()))
        assert report.passed


class TestExport:
    def test_csv_repeat_runs_byte_identical(self, tmp_path, fig3d):
        cfg = SimConfig(dt=300.0, horizon=43200.0)
        paths = []
        for tag in ("a", "b"):
            traj = simulate(fig3d, cfg)
            path = tmp_path / f"run_{tag}.csv"
            write_trajectory_csv(traj, path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_csv_layout(self, tmp_path):
        traj = simulate(chain_network(dt=0.5, horizon=5.0))
        path = tmp_path / "chain.csv"
        write_trajectory_csv(traj, path, extra_columns={"m_u_rate": np.zeros(len(traj.times))})
        header = path.read_text().splitlines()[0].split(",")
        assert header[0] == "time"
        assert header[-1] == "m_u_rate"
        assert len(header) == 1 + traj.compiled.n_store + traj.compiled.n_conn + 1
        assert len(path.read_text().splitlines()) == traj.n_steps + 2

    def test_summary_contents(self):
        traj = simulate(chain_network(dt=0.5, horizon=5.0))
        summary = traj.summary()
        assert summary["steps"] == traj.n_steps
        assert "pellets" in summary["ledger"]


class TestSimConfig:
    def test_bad_dt_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(dt=0.0, horizon=1.0)

    def test_horizon_shorter_than_dt_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(dt=1.0, horizon=0.5)

    def test_overrides_beat_file_values(self, fig3b):
        cfg = SimConfig.from_network(fig3b, dt=30.0)
        assert cfg.dt == 30.0
        assert cfg.horizon == fig3b.simulation.horizon

    def test_step_count_rounds_up(self):
        assert SimConfig(dt=0.4, horizon=1.0).n_steps == 3
