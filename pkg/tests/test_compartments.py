import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circuflow.compartments import (
    CyclePerformance,
    RankineState,
    RecyclerParams,
    SorterParams,
    SourceParams,
    TransformerParams,
    TransportParams,
    rankine_eval,
    recycler_rates,
    sorter_split,
    source_rates,
    stock_rates,
    transformer_rates,
    transport_rates,
)

finite_rates = st.floats(min_value=0.0, max_value=1e6, allow_nan=False)
positive = st.floats(min_value=1e-3, max_value=1e6, allow_nan=False)
fractions = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
scales = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


class TestSource:
    def test_below_both_caps(self):
        p = SourceParams("m", reserve=100.0, max_rate=2.0, demand=0.0)
        dm, out = source_rates(p, 100.0, demand=1.0)
        assert out == 1.0 and dm == -1.0

    def test_exhausted_reserve_emits_nothing(self):
        p = SourceParams("m", reserve=0.0, max_rate=2.0)
        for demand in (0.0, 1.0, 100.0):
            assert source_rates(p, 0.0, demand) == (0.0, 0.0)

    def test_rate_cap_binds(self):
        p = SourceParams("m", reserve=100.0, max_rate=2.0)
        _, out = source_rates(p, 100.0, demand=5.0)
        assert out == 2.0

    def test_negative_demand_rejected(self):
        p = SourceParams("m", reserve=100.0, max_rate=2.0)
        with pytest.raises(ValueError):
            source_rates(p, 100.0, demand=-1.0)

    def test_availability_guard_tapers(self):
        p = SourceParams("m", reserve=100.0, max_rate=10.0)
        _, out = source_rates(p, 0.5, demand=10.0, dt_ref=1.0)
        assert out == pytest.approx(0.5)


class TestStock:
    def test_empty_stock_cannot_emit(self):
        dm, out = stock_rates(0.0, in_rate=0.0, demand_rate=1.0)
        assert out == 0.0 and dm == 0.0

    def test_balance_holds_at_any_level(self):
        for m in (0.0, 0.1, 50.0):
            dm, out = stock_rates(m, in_rate=3.0, demand_rate=3.0)
            assert dm == pytest.approx(0.0)
            assert out == pytest.approx(3.0)

    def test_filled_stock_serves_demand(self):
        dm, out = stock_rates(10.0, in_rate=0.5, demand_rate=2.0)
        assert out == 2.0 and dm == -1.5

    def test_negative_rates_rejected(self):
        with pytest.raises(ValueError):
            stock_rates(1.0, -1.0, 1.0)


class TestTransport:
    def test_lag_fixed_point(self):
        p = TransportParams("m", time_constant=4.0)
        u = 2.5
        dm, out, loss = transport_rates(p, store=u * 4.0, in_rate=u)
        assert dm == pytest.approx(0.0)
        assert out == pytest.approx(u)
        assert loss == 0.0

    def test_lossy_steady_state_split(self):
        # Steady inflow 10 with 10% en-route loss: 9 delivered, 1 lost.
        p = TransportParams("m", time_constant=2.0, loss_fraction=0.1)
        dm, out, loss = transport_rates(p, store=20.0, in_rate=10.0)
        assert dm == pytest.approx(0.0)
        assert out == pytest.approx(9.0)
        assert loss == pytest.approx(1.0)

    def test_decay_rate(self):
        p = TransportParams("m", time_constant=1.0)
        dm, out, loss = transport_rates(p, store=1.0, in_rate=0.0)
        assert dm == -1.0 and out == 1.0


class TestSorter:
    def test_reference_split_high_success(self):
        # 95.97% success over 100 kg/h leaves 4.03 kg/h rejected.
        p = SorterParams("m", success_rate=0.9597, throughput=100.0)
        accept, reject = sorter_split(p, 100.0)
        assert accept == pytest.approx(95.97)
        assert reject == pytest.approx(4.03)

    def test_perfect_sorter(self):
        p = SorterParams("m", success_rate=1.0, throughput=10.0)
        assert sorter_split(p, 10.0) == (10.0, 0.0)

    def test_reference_split_low_success(self):
        p = SorterParams("m", success_rate=0.6091, throughput=10.0)
        accept, reject = sorter_split(p, 10.0)
        assert accept == pytest.approx(6.091)
        assert reject == pytest.approx(3.909)

    def test_throughput_exceeded_rejected(self):
        p = SorterParams("m", success_rate=0.5, throughput=1.0)
        with pytest.raises(ValueError):
            sorter_split(p, 2.0)

    @given(fractions, finite_rates)
    def test_partition_is_exact(self, s, processed):
        p = SorterParams("m", success_rate=s, throughput=max(processed, 1.0))
        accept, reject = sorter_split(p, min(processed, p.throughput))
        total = math.fsum((accept, reject))
        assert total == pytest.approx(min(processed, p.throughput), rel=1e-12, abs=1e-12)


class TestTransformer:
    def test_lossless_conversion(self):
        p = TransformerParams("a", "b", yield_fraction=1.0, rate_capacity=10.0)
        dm, out, waste = transformer_rates(p, store=0.0, in_rate=5.0)
        assert waste == 0.0 and out == 5.0 and dm == 0.0

    def test_fraction_split(self):
        p = TransformerParams("a", "b", yield_fraction=0.8, rate_capacity=10.0)
        dm, out, waste = transformer_rates(p, store=0.0, in_rate=5.0)
        assert out == pytest.approx(4.0)
        assert waste == pytest.approx(1.0)

    def test_capacity_binds(self):
        p = TransformerParams("a", "b", yield_fraction=1.0, rate_capacity=2.0)
        dm, out, waste = transformer_rates(p, store=0.0, in_rate=10.0)
        assert out + waste == pytest.approx(2.0)
        assert dm == pytest.approx(8.0)

    def test_buffer_drains_when_capacity_frees(self):
        p = TransformerParams("a", "b", yield_fraction=1.0, rate_capacity=2.0)
        dm, out, _ = transformer_rates(p, store=5.0, in_rate=0.5, dt_ref=1.0)
        assert out == pytest.approx(2.0)
        assert dm == pytest.approx(-1.5)


class TestRecycler:
    def test_perfect_recycler_never_leaks(self):
        p = RecyclerParams("m", yield_fraction=1.0, processing_time=3.0)
        for m in (0.0, 1.0, 7.5):
            _, ret, leak = recycler_rates(p, m, in_rate=2.0)
            assert leak == 0.0

    def test_lag_fixed_point_split(self):
        # Steady inflow 10 at 70% yield: 7 returned, 3 leaked.
        p = RecyclerParams("m", yield_fraction=0.7, processing_time=5.0)
        dm, ret, leak = recycler_rates(p, store=50.0, in_rate=10.0)
        assert dm == pytest.approx(0.0)
        assert ret == pytest.approx(7.0)
        assert leak == pytest.approx(3.0)


class TestKindConservation:
    """Every kind's rate call balances: outputs + dstore/dt = inputs."""

    @given(positive, fractions, st.floats(0, 1e4), finite_rates)
    @settings(max_examples=200)
    def test_transport(self, T, lam, m, u):
        p = TransportParams("m", T, min(lam, 0.999))
        dm, out, loss = transport_rates(p, m, u)
        scale = max(1.0, u, m / T)
        assert math.fsum((out, loss, dm)) == pytest.approx(u, abs=1e-12 * scale)

    @given(positive, st.floats(1e-6, 1.0), positive, st.floats(0, 1e4), finite_rates)
    @settings(max_examples=200)
    def test_transformer(self, cap, eta, dt_ref, m, u):
        p = TransformerParams("a", "b", eta, cap)
        dm, out, waste = transformer_rates(p, m, u, dt_ref)
        scale = max(1.0, u, u + m / dt_ref)
        assert math.fsum((out, waste, dm)) == pytest.approx(u, abs=1e-12 * scale)

    @given(fractions, positive, st.floats(0, 1e4), finite_rates)
    @settings(max_examples=200)
    def test_recycler(self, rho, t_r, m, u):
        p = RecyclerParams("m", rho, t_r)
        dm, ret, leak = recycler_rates(p, m, u)
        scale = max(1.0, u, m / t_r)
        assert math.fsum((ret, leak, dm)) == pytest.approx(u, abs=1e-12 * scale)

    @given(st.floats(0, 1e4), finite_rates, finite_rates, positive)
    @settings(max_examples=200)
    def test_stock(self, m, u, demand, dt_ref):
        dm, out = stock_rates(m, u, demand, dt_ref)
        scale = max(1.0, u, u + m / dt_ref)
        assert math.fsum((out, dm)) == pytest.approx(u, abs=1e-12 * scale)

    @given(st.floats(0, 1e6), positive, finite_rates, positive)
    @settings(max_examples=200)
    def test_source(self, reserve, max_rate, demand, dt_ref):
        p = SourceParams("m", reserve, max_rate)
        dm, out = source_rates(p, reserve, demand, dt_ref)
        assert dm == -out
        assert out >= 0.0


class TestPositiveHomogeneity:
    """Scaling stores, inflows, capacities, and reserves by c scales rates by c."""

    @given(scales, positive, fractions, st.floats(0, 1e4), finite_rates)
    def test_transport(self, c, T, lam, m, u):
        p = TransportParams("m", T, min(lam, 0.999))
        base = transport_rates(p, m, u)
        scaled = transport_rates(p, c * m, c * u)
        for b, s in zip(base, scaled):
            assert s == pytest.approx(c * b, rel=1e-9, abs=1e-12)

    @given(scales, positive, st.floats(1e-6, 1.0), st.floats(0, 1e4), finite_rates)
    def test_transformer(self, c, cap, eta, m, u):
        p = TransformerParams("a", "b", eta, cap)
        scaled_p = TransformerParams("a", "b", eta, c * cap)
        base = transformer_rates(p, m, u)
        scaled = transformer_rates(scaled_p, c * m, c * u)
        slack = 1e-12 * c * max(1.0, u + m, cap)  # cancellation in dm/dt
        for b, s in zip(base, scaled):
            assert s == pytest.approx(c * b, rel=1e-9, abs=slack)

    @given(scales, st.floats(0, 1e6), positive, finite_rates)
    def test_source(self, c, reserve, max_rate, demand):
        p = SourceParams("m", reserve, max_rate)
        scaled_p = SourceParams("m", c * reserve, c * max_rate)
        base = source_rates(p, reserve, demand)
        scaled = source_rates(scaled_p, c * reserve, c * demand)
        for b, s in zip(base, scaled):
            assert s == pytest.approx(c * b, rel=1e-9, abs=1e-12)


class TestRankine:
    def test_worked_point(self):
        state = RankineState(mass_flow=1.0, h1=3000.0, h2=2000.0, h3=100.0, h4=110.0)
        perf = rankine_eval(state)
        assert perf.work_turbine == pytest.approx(1000.0)
        assert perf.work_pump == pytest.approx(10.0)
        assert perf.heat_in == pytest.approx(2890.0)
        assert perf.heat_out == pytest.approx(1900.0)
        # Hand arithmetic: (1000 - 10) / 2890.
        assert perf.efficiency == pytest.approx(990.0 / 2890.0, rel=1e-12)
        assert perf.compartments == 8

    def test_degenerate_cycle_has_zero_efficiency(self):
        state = RankineState(1.0, h1=500.0, h2=500.0, h3=100.0, h4=100.0)
        perf = rankine_eval(state)
        assert perf.work_turbine == 0.0
        assert perf.work_pump == 0.0
        assert perf.efficiency == 0.0

    def test_efficiency_invariant_under_scaling(self):
        base = RankineState(1.0, 3000.0, 2000.0, 100.0, 110.0)
        eta = rankine_eval(base).efficiency
        for c in (0.5, 2.0, 7.3):
            scaled = RankineState(
                1.0,
                h1=c * (3000.0 - 100.0) + 100.0,
                h2=c * (2000.0 - 100.0) + 100.0,
                h3=100.0,
                h4=c * 10.0 + 100.0,
            )
            assert rankine_eval(scaled).efficiency == pytest.approx(eta, rel=1e-12)

    def test_reversed_turbine_rejected(self):
        with pytest.raises(ValueError):
            rankine_eval(RankineState(1.0, h1=2000.0, h2=3000.0, h3=100.0, h4=110.0))

    def test_zero_mass_flow_rejected(self):
        with pytest.raises(ValueError):
            rankine_eval(RankineState(0.0, 3000.0, 2000.0, 100.0, 110.0))

    @given(
        st.floats(1.1, 100.0),
        st.floats(0.01, 1.0),
        st.floats(0.0, 50.0),
        st.floats(0.001, 5.0),
    )
    def test_closure_residual_is_roundoff(self, h1, drop, h3, pump):
        h2 = h1 * drop
        h4 = h3 + pump
        if h1 - h4 <= 0:
            return
        perf = rankine_eval(RankineState(1.0, h1, max(h2, h3), h3, h4))
        assert abs(perf.closure_residual) <= 1e-9 * perf.heat_in

    def test_net_work_property(self):
        perf = CyclePerformance(1000.0, 10.0, 2890.0, 1900.0, 990 / 2890, 1.0)
        assert perf.net_work == pytest.approx(990.0)
