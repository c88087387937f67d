"""Multiplicative uniform measurement noise.

Each stored sample is scaled by (1 + 2*epsilon*u - epsilon) with
u ~ U[0, 1], so the relative perturbation is uniform on [-epsilon,
+epsilon]. Draws come from a counter-based Philox stream keyed by
(seed, receiver_index); within a stream the draw order is row-major over
(sample, component), i.e. draw index 3*k + (i-1) perturbs component i of
sample k. The map is reproducible across platforms and independent of
how many receivers are processed or in what order.

Exact zeros stay exact zeros (0 * anything == 0), so noise never moves
an arrival time.
"""

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, TimeSeries

__all__ = ["NoiseModel", "apply_noise"]


@dataclass(frozen=True)
class NoiseModel:
    """Relative noise level epsilon in [0, 1) and a stream seed.

    per_sample_scalar=True draws one u per sample shared by all three
    components (draw index k) instead of the default one per component.
    """

    epsilon: float
    seed: int
    per_sample_scalar: bool = False

    def __post_init__(self):
        if not (0.0 <= self.epsilon < 1.0):
            raise ConfigurationError("epsilon must lie in [0, 1)")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigurationError("seed must be a nonnegative integer")


def apply_noise(series: TimeSeries, model: NoiseModel) -> TimeSeries:
    """Return a noisy copy of the series; the input is left untouched."""
    if model.epsilon == 0.0:
        return TimeSeries(series.grid, series.samples.copy(), series.receiver_index)
    key = np.array([model.seed, series.receiver_index], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    n = series.grid.n
    if model.per_sample_scalar:
        u = rng.random(n)[:, None]
    else:
        u = rng.random((n, 3))
    factor = 1.0 + 2.0 * model.epsilon * u - model.epsilon
    return TimeSeries(series.grid, series.samples * factor, series.receiver_index)
