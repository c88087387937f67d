"""Error measurement, stability constants and noise sweeps."""

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigurationError,
    EmorbitError,
    Scenario,
    UndefinedMetricError,
    cross_signal,
)
from .inverse import ReconstructedOrbit
from .noise import NoiseModel
from .pipeline import (
    reconstruct_dataset,
    reconstruction_grid,
    synthesize_dataset,
    true_orbit,
)

__all__ = [
    "GeometryConstants",
    "NoiseSweepResult",
    "relative_error",
    "stability_constant",
    "geometry_constants",
    "noise_sweep",
]


@dataclass(frozen=True)
class GeometryConstants:
    """Problem-geometry quantities entering the stability estimate.

    d0/d1 are the largest/smallest source-receiver distances possible,
    T1 the minimal far-field horizon d0/c, eta the worst-case max-norm
    floor of f(t) x nu over receivers and the full horizon, and C0 the
    resulting amplification constant.
    """

    d0: float
    d1: float
    T1: float
    eta: float
    C0: float


@dataclass(frozen=True)
class NoiseSweepResult:
    """Per-seed errors, per-level means and the linear fit Err ~ slope*eps."""

    rows: tuple
    points: tuple
    slope: float
    intercept: float
    max_relative_residual: float
    failures: tuple = ()


def relative_error(reference: ReconstructedOrbit, estimate: ReconstructedOrbit) -> float:
    """max |estimate - reference| over components and grid, relative to
    max |reference| over components and grid."""
    g1, g2 = reference.grid, estimate.grid
    if g1.n != g2.n or abs(g1.t_start - g2.t_start) > 1e-9 * g1.dt or (
        abs(g1.dt - g2.dt) > 1e-9 * g1.dt
    ):
        raise ValueError("orbits live on different grids")
    denom = float(np.max(np.abs(reference.points)))
    if denom == 0.0:
        raise UndefinedMetricError("reference orbit is identically zero")
    num = float(np.max(np.abs(estimate.points - reference.points)))
    return num / denom


def stability_constant(d0: float, c: float, c0: float, T: float, eta: float) -> float:
    """C0 = 12 pi d0 (c + c0) T / (c eta)."""
    if eta <= 0:
        raise UndefinedMetricError("eta must be positive")
    return 12.0 * math.pi * d0 * (c + c0) * T / (c * eta)


def geometry_constants(s: Scenario, n_samples: int = 100_001) -> GeometryConstants:
    """Evaluate the geometry constants for a scenario.

    eta is minimized over an n_samples uniform grid on [0, T]; d0 and d1
    come from the sphere/ball geometry in closed form.
    """
    d0 = s.R_Gamma + s.R_D
    d1 = s.R_Gamma - s.R_D
    tt = np.linspace(0.0, s.T, n_samples)
    eta = math.inf
    for rec in s.receivers:
        fx = cross_signal(s.signal, rec.normal).eval(tt)
        eta = min(eta, float(np.min(np.max(np.abs(fx), axis=1))))
    c0 = s.orbit.declared_c0
    return GeometryConstants(
        d0, d1, d0 / s.c, eta, stability_constant(d0, s.c, c0, s.T, eta)
    )


def noise_sweep(preset, epsilons, seeds_per_point: int = 5, seed_base: int = 0,
                dataset=None) -> NoiseSweepResult:
    """Reconstruction error versus noise level with common random numbers.

    Every level reuses the same seed list seed_base..seed_base+k-1, so the
    error curve is monotone apart from genuine method effects rather than
    sampling luck. Level 0 runs once (it is deterministic). A precomputed
    dataset for the preset's scenario/settings can be passed to skip
    synthesis. Failed runs are recorded, excluded from the means, and do
    not abort the sweep.
    """
    levels = sorted({float(e) for e in epsilons})
    if len(levels) < 3:
        raise ConfigurationError("need at least 3 distinct noise levels")
    if levels[0] < 0.0:
        raise ConfigurationError("noise levels must be non-negative")
    s, settings = preset.scenario, preset.settings
    ds = dataset if dataset is not None else synthesize_dataset(s, settings)
    grid = reconstruction_grid(s, settings)
    truth = true_orbit(s, grid)
    rows, failures = [], []
    for eps in levels:
        seeds = [seed_base] if eps == 0.0 else [
            seed_base + k for k in range(seeds_per_point)
        ]
        for seed in seeds:
            try:
                noise = NoiseModel(eps, seed, settings.per_sample_scalar) if eps > 0 else None
                recon = reconstruct_dataset(ds, noise=noise, grid=grid)
                rows.append((eps, seed, relative_error(truth, recon)))
            except EmorbitError as exc:
                failures.append((eps, seed, str(exc)))
    points = []
    for eps in levels:
        errs = [r[2] for r in rows if r[0] == eps]
        if errs:
            points.append((eps, float(np.mean(errs))))
    fit = [(e, m) for e, m in points if e > 0.0]
    slope = intercept = max_rel_residual = math.nan
    if len(fit) >= 2:
        A = np.array([[e, 1.0] for e, _ in fit])
        y = np.array([m for _, m in fit])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        slope, intercept = float(coef[0]), float(coef[1])
        resid = np.abs(A @ coef - y) / np.abs(y)
        max_rel_residual = float(np.max(resid))
    return NoiseSweepResult(
        tuple(rows), tuple(points), slope, intercept, max_rel_residual, tuple(failures)
    )
