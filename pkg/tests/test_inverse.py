"""Inverse pipeline tests: arrivals, distance ODE, trilateration."""

import math

import numpy as np
import pytest

from emorbit.core import (
    BlowUpError,
    ConfigurationError,
    CoplanarReceiversError,
    DegenerateDataError,
    NoSignalError,
    OrbitSpec,
    Receiver,
    SignalComponent,
    SourceSignal,
    TimeGrid,
    TimeSeries,
    cross_signal,
    vec3,
)
from emorbit.inverse import (
    ArrivalTime,
    ComponentStrategy,
    SpeedBoundWarning,
    detect_arrival,
    distance_ode_rhs,
    reconstruct_orbit,
    solve_distance_ode,
    trilaterate,
)
from emorbit.pipeline import reconstruct_dataset, synthesize_dataset
from emorbit.presets import get_preset

TETRA = [
    Receiver.on_sphere(vec3(d) * (20000.0 / math.sqrt(3.0)))
    for d in [(1, 1, 1), (-1, -1, 1), (1, -1, -1), (-1, 1, -1)]
]


def test_trilateration_recovers_random_points():
    rng = np.random.default_rng(101)
    pts = rng.uniform(-100.0, 100.0, size=(1000, 3))
    pos = np.array([r.position for r in TETRA])
    dists = np.linalg.norm(pos[:, None, :] - pts[None, :, :], axis=2)
    recovered = trilaterate(TETRA, dists)
    assert recovered.shape == (1000, 3)
    assert np.max(np.abs(recovered - pts)) <= 1e-9


def test_trilateration_single_point():
    p = vec3(12.0, -7.0, 3.0)
    d = np.array([float(np.linalg.norm(r.position - p)) for r in TETRA])
    got = trilaterate(TETRA, d)
    assert got.shape == (3,)
    assert np.allclose(got, p, rtol=0, atol=1e-9)


def test_trilateration_accepts_raw_positions():
    p = vec3(1.0, 2.0, 3.0)
    pos = [r.position for r in TETRA]
    d = np.array([float(np.linalg.norm(x - p)) for x in pos])
    assert np.allclose(trilaterate(pos, d), p, rtol=0, atol=1e-9)


def test_trilateration_requires_four_receivers():
    with pytest.raises(ConfigurationError):
        trilaterate(TETRA[:3], np.ones(3))


def test_trilateration_rejects_coplanar():
    flat = [vec3(0, 0, 0), vec3(1, 0, 0), vec3(0, 1, 0), vec3(1, 1, 0)]
    with pytest.raises(CoplanarReceiversError):
        trilaterate(flat, np.ones(4))


def test_trilateration_distance_shape_checked():
    with pytest.raises(ValueError):
        trilaterate(TETRA, np.ones(3))


def test_detect_arrival_index_and_time():
    grid = TimeGrid(0.0, 0.5, 6)
    samples = np.zeros((6, 3))
    samples[3, 0] = 2.5
    samples[4:] = 1.0
    arr = detect_arrival(TimeSeries(grid, samples, 1), component=1)
    assert arr == ArrivalTime(1, 1.5, 3)


def test_detect_arrival_threshold():
    grid = TimeGrid(0.0, 0.5, 6)
    samples = np.zeros((6, 3))
    samples[2, 0] = 0.1
    samples[4, 0] = 5.0
    arr = detect_arrival(TimeSeries(grid, samples, 0), component=1, threshold=1.0)
    assert arr.detection_index == 4


def test_detect_arrival_no_signal():
    grid = TimeGrid(0.0, 0.5, 6)
    with pytest.raises(NoSignalError):
        detect_arrival(TimeSeries(grid, np.zeros((6, 3)), 0), component=2)


def probe_signal():
    return SourceSignal(
        (
            SignalComponent((1.0,), ()),
            SignalComponent((2.0,), ((1.0, 3.0, 0.0),)),
            SignalComponent((-1.0,), ()),
        )
    )


def radial_line_case():
    """Source on the x axis heading straight at a receiver 10 m out.

    With c = 2 and speed 1 the distance is v(t) = 10 - t, the retarded
    map is g(t) = 5 + t/2 and its inverse is tau(u) = 2(u - 5), all exact
    enough to check the ODE right-hand side against v' = -1.
    """
    c = 2.0
    orbit = OrbitSpec("Line", {"velocity": (1.0, 0.0, 0.0)}, 1.0, 0.0)
    x = vec3(10.0, 0.0, 0.0)
    nu = vec3(0.0, 0.0, 1.0)
    f = probe_signal()
    fx = cross_signal(f, nu)

    def trace_at(u):
        tau = 2.0 * (u - 5.0)
        dist = 10.0 - tau
        gp = 0.5
        return np.asarray(fx.eval(tau)) / (4.0 * math.pi * gp * dist)

    return c, orbit, x, nu, f, trace_at


def test_rhs_matches_rate_for_radial_line():
    c, orbit, x, nu, f, trace_at = radial_line_case()
    strat = ComponentStrategy(mode="maxsignal")
    for t in np.linspace(0.0, 4.0, 9):
        v_true = 10.0 - t
        rhs = distance_ode_rhs(v_true, float(t), trace_at, f, nu, strat, c)
        assert abs(rhs - (-1.0)) <= 1e-10


def test_rhs_matches_rate_for_stationary_source():
    c = 2.0
    r = 7.0
    nu = vec3(0.0, 0.0, 1.0)
    f = probe_signal()
    fx = cross_signal(f, nu)

    def trace_at(u):
        tau = u - r / c
        return np.asarray(fx.eval(tau)) / (4.0 * math.pi * r)

    strat = ComponentStrategy(mode="maxsignal")
    for t in np.linspace(0.0, 4.0, 9):
        rhs = distance_ode_rhs(r, float(t), trace_at, f, nu, strat, c)
        assert abs(rhs - 0.0) <= 1e-10


def oblique_line_case():
    """Source on the x axis, receiver off axis: v(t) is genuinely nonlinear."""
    c = 2.0
    orbit = OrbitSpec("Line", {"velocity": (1.0, 0.0, 0.0)}, 1.0, 0.0)
    x = vec3(10.0, 5.0, 0.0)
    nu = vec3(0.0, 0.0, 1.0)
    f = probe_signal()
    fx = cross_signal(f, nu)

    def v_true(t):
        return math.hypot(10.0 - t, 5.0)

    def tau_of(u):
        # solve tau + v(tau)/c = u by bisection to near machine precision
        lo, hi = 0.0, u
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if mid + v_true(mid) / c < u:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def trace_at(u):
        tau = tau_of(u)
        dist = v_true(tau)
        gp = 1.0 - (10.0 - tau) / (c * dist)
        return np.asarray(fx.eval(tau)) / (4.0 * math.pi * gp * dist)

    return c, orbit, x, nu, f, v_true, trace_at


def solve_with_closure(h, n_grid, dt_grid):
    c, orbit, x, nu, f, v_true, trace_at = oblique_line_case()
    grid = TimeGrid(0.0, dt_grid, n_grid)
    meas = TimeGrid(0.0, dt_grid, n_grid + 4)
    samples = np.array([trace_at(meas.t(k) + 1.0) for k in range(meas.n)])
    series = TimeSeries(meas, samples, 0)
    receiver = Receiver(x, nu)
    strat = ComponentStrategy(mode="maxsignal")
    arrival = v_true(0.0) / c
    df = solve_distance_ode(
        series, f, receiver, arrival, grid, strat, c, h, field_closure=trace_at
    )
    errs = np.abs(df.v - np.array([v_true(grid.t(k)) for k in range(grid.n)]))
    return float(np.max(errs))


def test_rk4_convergence_order():
    # halving h must shrink the error by about 2^4; require order >= 3.5
    err_h = solve_with_closure(h=0.05, n_grid=11, dt_grid=0.1)
    err_h2 = solve_with_closure(h=0.025, n_grid=11, dt_grid=0.1)
    assert err_h2 > 0.0
    order = math.log2(err_h / err_h2)
    assert order >= 3.5, (err_h, err_h2, order)


def test_solve_distance_ode_records_on_grid():
    c, orbit, x, nu, f, v_true, trace_at = oblique_line_case()
    grid = TimeGrid(0.0, 0.1, 11)
    meas = TimeGrid(0.0, 0.1, 15)
    samples = np.array([trace_at(meas.t(k) + 1.0) for k in range(meas.n)])
    series = TimeSeries(meas, samples, 0)
    strat = ComponentStrategy(mode="maxsignal")
    df = solve_distance_ode(
        series, f, Receiver(x, nu), v_true(0.0) / c, grid, strat, c, 0.025,
        field_closure=trace_at,
    )
    assert df.v.shape == (11,)
    assert math.isclose(df.v[0], v_true(0.0), rel_tol=1e-15)
    assert df.diagnostics["v0"] == pytest.approx(v_true(0.0))
    assert df.diagnostics["speed_bound_ok"]


def test_solve_distance_ode_grid_must_be_multiple_of_h():
    c, orbit, x, nu, f, v_true, trace_at = oblique_line_case()
    grid = TimeGrid(0.0, 0.1, 11)
    meas = TimeGrid(0.0, 0.1, 15)
    samples = np.array([trace_at(meas.t(k) + 1.0) for k in range(meas.n)])
    series = TimeSeries(meas, samples, 0)
    strat = ComponentStrategy(mode="maxsignal")
    with pytest.raises(ValueError):
        solve_distance_ode(
            series, f, Receiver(x, nu), v_true(0.0) / c, grid, strat, c, 0.03,
            field_closure=trace_at,
        )


def test_solve_distance_ode_grid_must_start_at_zero():
    c, orbit, x, nu, f, v_true, trace_at = oblique_line_case()
    grid = TimeGrid(1.0, 0.1, 11)
    meas = TimeGrid(0.0, 0.1, 30)
    samples = np.array([trace_at(meas.t(k) + 1.0) for k in range(meas.n)])
    series = TimeSeries(meas, samples, 0)
    strat = ComponentStrategy(mode="maxsignal")
    with pytest.raises(ValueError):
        solve_distance_ode(
            series, f, Receiver(x, nu), v_true(0.0) / c, grid, strat, c, 0.05,
            field_closure=trace_at,
        )


def test_degenerate_trace_raises_with_partial():
    f = probe_signal()
    grid = TimeGrid(0.0, 0.1, 6)
    meas = TimeGrid(0.0, 0.1, 60)
    series = TimeSeries(meas, np.zeros((60, 3)), 2)
    strat = ComponentStrategy(mode="maxsignal")
    with pytest.raises(DegenerateDataError) as info:
        solve_distance_ode(
            series, f, Receiver(vec3(10, 0, 0), vec3(0, 0, 1)), 1.0, grid,
            strat, 2.0, 0.05,
        )
    exc = info.value
    assert exc.receiver_index == 2
    assert exc.partial is not None and exc.partial.shape == (1,)
    assert exc.partial[0] == pytest.approx(2.0)


def test_blow_up_raises_with_partial():
    # trace sign opposite to f x nu forces rhs < -c and v through zero
    f = probe_signal()
    nu = vec3(0.0, 0.0, 1.0)
    fx = cross_signal(f, nu)
    grid = TimeGrid(0.0, 0.1, 6)
    meas = TimeGrid(0.0, 0.1, 60)
    samples = np.array([-np.asarray(fx.eval(meas.t(k))) * 1e-4 for k in range(meas.n)])
    series = TimeSeries(meas, samples, 1)
    strat = ComponentStrategy(mode="maxsignal")
    with pytest.raises(BlowUpError) as info:
        solve_distance_ode(
            series, f, Receiver(vec3(10, 0, 0), nu), 0.5, grid, strat, 2.0, 0.05,
        )
    exc = info.value
    assert exc.receiver_index == 1
    assert exc.partial is not None
    assert exc.partial.shape[0] >= 1


def test_speed_bound_warning():
    # scaling the trace by 0.2 inflates the rhs to 5(c+v') - c > c
    c, orbit, x, nu, f, v_true, trace_at = oblique_line_case()

    def shrunken(u):
        return 0.2 * trace_at(u)

    grid = TimeGrid(0.0, 0.1, 6)
    meas = TimeGrid(0.0, 0.1, 30)
    samples = np.array([shrunken(meas.t(k) + 1.0) for k in range(meas.n)])
    series = TimeSeries(meas, samples, 0)
    strat = ComponentStrategy(mode="maxsignal")
    with pytest.warns(SpeedBoundWarning):
        df = solve_distance_ode(
            series, f, Receiver(x, nu), v_true(0.0) / c, grid, strat, c, 0.05,
            field_closure=shrunken,
        )
    assert not df.diagnostics["speed_bound_ok"]
    assert df.diagnostics["max_rate"] > c


def test_component_strategy_validation():
    with pytest.raises(ConfigurationError):
        ComponentStrategy(mode="random")
    with pytest.raises(ConfigurationError):
        ComponentStrategy(components=(1, 2, 3))
    with pytest.raises(ConfigurationError):
        ComponentStrategy(components=(1, 2, 3, 4))
    with pytest.raises(ConfigurationError):
        ComponentStrategy(fallback_threshold=-0.1)
    with pytest.raises(ConfigurationError):
        ComponentStrategy(fallback_threshold=1.0)


def test_component_strategy_selection():
    fixed = ComponentStrategy()
    assert fixed.primary_index(0, np.array([1.0, 9.0, 1.0])) == 0
    assert fixed.primary_index(1, np.array([1.0, 9.0, 1.0])) == 1
    assert fixed.primary_index(3, np.array([1.0, 9.0, 1.0])) == 2
    assert fixed.detection_component(2, np.array([1.0, 9.0, 1.0])) == 3
    sig = ComponentStrategy(mode="maxsignal")
    assert sig.primary_index(0, np.array([1.0, -9.0, 1.0])) == 1
    assert sig.detection_component(0, np.array([1.0, -9.0, 1.0])) == 2


def test_reconstruct_orbit_requires_receiver_order():
    pre = get_preset("line_example1")
    ds = synthesize_dataset(pre.scenario, pre.settings)
    shuffled = (ds.series[1], ds.series[0], ds.series[2], ds.series[3])
    grid = TimeGrid(0.0, pre.settings.h, 101)
    with pytest.raises(ConfigurationError):
        reconstruct_orbit(
            shuffled, pre.scenario, grid, pre.settings.strategy, pre.settings.h,
            arrivals=ds.arrivals,
        )


def test_fallback_only_at_degenerate_receiver():
    # component 2 is proportional to the emission-time square at every
    # receiver of this geometry, so only receiver index 1 (which is
    # assigned component 2) needs the largest-|f x nu| fallback near t=0
    pre = get_preset("line_example1")
    ds = synthesize_dataset(pre.scenario, pre.settings)
    recon = reconstruct_dataset(ds)
    counts = [d.diagnostics["fallback_count"] for d in recon.distances]
    assert counts[0] == 0 and counts[2] == 0 and counts[3] == 0
    assert counts[1] > 0
    assert recon.distances[1].diagnostics["fallback_first_t"] == 0.0
    assert recon.distances[1].diagnostics["fallback_last_t"] < 5e-3
    per_comp = recon.distances[1].diagnostics["fallback_per_component"]
    assert per_comp[1] == 0
    assert per_comp[0] + per_comp[2] == counts[1]
