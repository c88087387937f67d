"""Error metric, geometry constants and noise sweep tests."""

import math

import numpy as np
import pytest

from emorbit.core import ConfigurationError, TimeGrid, UndefinedMetricError, cross_signal
from emorbit.inverse import ReconstructedOrbit
from emorbit.metrics import (
    geometry_constants,
    noise_sweep,
    relative_error,
    stability_constant,
)
from emorbit.pipeline import synthesize_dataset
from emorbit.presets import get_preset


def test_stability_constant_oracle():
    # 12*pi*d0*(c+c0)*T/(c*eta) with d0=3, c=2, c0=1, T=10, eta=0.5:
    # 12*pi*3*3*10/(2*0.5) = 1080*pi
    value = stability_constant(3.0, 2.0, 1.0, 10.0, 0.5)
    assert math.isclose(value, 1080.0 * math.pi, rel_tol=1e-15)


def test_stability_constant_requires_positive_eta():
    with pytest.raises(UndefinedMetricError):
        stability_constant(3.0, 2.0, 1.0, 10.0, 0.0)


def test_geometry_constants_line_preset():
    s = get_preset("line_example1").scenario
    g = geometry_constants(s)
    assert g.d0 == 20100.0
    assert g.d1 == 19900.0
    assert math.isclose(g.T1, 20100.0 / 3.0e8, rel_tol=1e-15)
    # brute-force eta over the same sampling density
    tt = np.linspace(0.0, s.T, 100_001)
    eta = math.inf
    for rec in s.receivers:
        fx = cross_signal(s.signal, rec.normal).eval(tt)
        eta = min(eta, float(np.min(np.max(np.abs(fx), axis=1))))
    assert math.isclose(g.eta, eta, rel_tol=1e-12)
    expected_C0 = 12.0 * math.pi * g.d0 * (s.c + s.orbit.declared_c0) * s.T / (
        s.c * eta
    )
    assert math.isclose(g.C0, expected_C0, rel_tol=1e-12)


def test_geometry_eta_positive_for_all_presets():
    for name in ("line_example1", "heart_example2", "spiral_example3",
                 "spiral_lowspeed"):
        g = geometry_constants(get_preset(name).scenario, n_samples=20_001)
        assert g.eta > 0.0
        assert g.C0 > 0.0


def test_relative_error_hand_case():
    grid = TimeGrid(0.0, 1.0, 2)
    ref = ReconstructedOrbit(grid, np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]))
    est = ReconstructedOrbit(grid, np.array([[1.1, 0.0, 0.0], [0.0, 2.0, -0.3]]))
    # max abs deviation 0.3, max abs reference component 2
    assert math.isclose(relative_error(ref, est), 0.15, rel_tol=1e-15)


def test_relative_error_grid_mismatch():
    a = ReconstructedOrbit(TimeGrid(0.0, 1.0, 2), np.zeros((2, 3)) + 1.0)
    b = ReconstructedOrbit(TimeGrid(0.0, 0.5, 2), np.zeros((2, 3)) + 1.0)
    with pytest.raises(ValueError):
        relative_error(a, b)


def test_relative_error_zero_reference():
    grid = TimeGrid(0.0, 1.0, 2)
    ref = ReconstructedOrbit(grid, np.zeros((2, 3)))
    est = ReconstructedOrbit(grid, np.ones((2, 3)))
    with pytest.raises(UndefinedMetricError):
        relative_error(ref, est)


def test_noise_sweep_structure_and_monotonicity():
    pre = get_preset("line_example1")
    ds = synthesize_dataset(pre.scenario, pre.settings)
    res = noise_sweep(pre, [0.0, 1e-4, 2e-4], seeds_per_point=2, dataset=ds)
    assert res.failures == ()
    # one row at eps=0 plus two seeds per positive level
    assert len(res.rows) == 1 + 2 + 2
    levels = [e for e, _ in res.points]
    assert levels == sorted(levels) == [0.0, 1e-4, 2e-4]
    means = [m for _, m in res.points]
    assert means[0] < means[1] < means[2]
    assert res.slope > 0.0
    assert math.isfinite(res.max_relative_residual)


def test_noise_sweep_same_seeds_every_level():
    pre = get_preset("line_example1")
    ds = synthesize_dataset(pre.scenario, pre.settings)
    res = noise_sweep(pre, [0.0, 1e-4, 2e-4], seeds_per_point=3, seed_base=7,
                      dataset=ds)
    for eps in (1e-4, 2e-4):
        seeds = sorted(seed for e, seed, _ in res.rows if e == eps)
        assert seeds == [7, 8, 9]


def test_noise_sweep_level_preconditions():
    pre = get_preset("line_example1")
    with pytest.raises(ConfigurationError):
        noise_sweep(pre, [0.0, 1e-4])
    with pytest.raises(ConfigurationError):
        noise_sweep(pre, [-1e-4, 0.0, 1e-4])
