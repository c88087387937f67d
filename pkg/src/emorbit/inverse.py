"""Orbit reconstruction from tangential boundary traces.

Pipeline: detect the first-arrival time at each receiver, integrate the
scalar distance ODE

    v'(t) = c * f_i(t) / (4 pi v(t) * H_i(t + v(t)/c)) - c,
    v(0) = c * t_arrival,

where f_i and H_i are matching components of f(t) x nu and of the
measured trace, then trilaterate the four receiver distances to the
source position at every reconstruction time.

The component index i comes from a ComponentStrategy. Near a time where
the chosen trace component vanishes the quotient is ill-conditioned, so
the strategy falls back to the component with the largest |f_j(t) x nu|
whenever |H_i| drops below fallback_threshold times the component's
series-wide peak. An absolute floor of 1e-300 guards the denominator in
all modes; if every component is below it the solve aborts with
DegenerateDataError.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .core import (
    BlowUpError,
    ConfigurationError,
    CoplanarReceiversError,
    DegenerateDataError,
    HorizonError,
    NoSignalError,
    Receiver,
    Scenario,
    SourceSignal,
    TimeGrid,
    TimeSeries,
    cross_signal,
    vec3,
)

__all__ = [
    "ArrivalTime",
    "DistanceFunction",
    "ComponentStrategy",
    "ReconstructedOrbit",
    "SpeedBoundWarning",
    "detect_arrival",
    "distance_ode_rhs",
    "solve_distance_ode",
    "trilaterate",
    "reconstruct_orbit",
]

logger = logging.getLogger("emorbit")

_TINY = 1e-300


class SpeedBoundWarning(UserWarning):
    """A recovered distance function changed faster than the wave speed."""


@dataclass(frozen=True)
class ArrivalTime:
    """First sample index and time at which a trace component is nonzero."""

    receiver_index: int
    t_arrival: float
    detection_index: int


@dataclass
class DistanceFunction:
    """Recovered source-receiver distance v(t_k) on a reconstruction grid."""

    grid: TimeGrid
    v: np.ndarray
    receiver_index: int
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        if self.v.shape != (self.grid.n,):
            raise ValueError(
                "v shape %r does not match grid length %d" % (self.v.shape, self.grid.n)
            )
        if not np.all(np.isfinite(self.v)) or not np.all(self.v > 0):
            raise ValueError("distances must be finite and positive")


@dataclass(frozen=True)
class ComponentStrategy:
    """Which trace component drives the distance ODE at each receiver.

    mode "fixed" uses components[receiver_index] (1-based). mode
    "maxsignal" picks argmax_j |f_j(t) x nu| at every evaluation time
    (ties go to the lowest index). fallback_threshold is relative to the
    per-component peak |H_j| over the whole series.
    """

    mode: str = "fixed"
    components: tuple = (1, 2, 3, 3)
    fallback_threshold: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "mode", str(self.mode).lower())
        object.__setattr__(self, "components", tuple(int(c) for c in self.components))
        if self.mode not in ("fixed", "maxsignal"):
            raise ConfigurationError("mode must be 'fixed' or 'maxsignal'")
        if len(self.components) != 4 or any(c not in (1, 2, 3) for c in self.components):
            raise ConfigurationError("components must be four indices from {1,2,3}")
        if not (0.0 <= self.fallback_threshold < 1.0):
            raise ConfigurationError("fallback_threshold must lie in [0, 1)")

    def primary_index(self, receiver_index, fx):
        """0-based component driving the ODE at this evaluation."""
        if self.mode == "fixed":
            return self.components[receiver_index] - 1
        return int(np.argmax(np.abs(fx)))

    def detection_component(self, receiver_index, fx0):
        """1-based component used for arrival detection at this receiver."""
        if self.mode == "fixed":
            return self.components[receiver_index]
        return int(np.argmax(np.abs(fx0))) + 1


@dataclass
class ReconstructedOrbit:
    """Reconstructed source positions on a uniform grid."""

    grid: TimeGrid
    points: np.ndarray
    distances: tuple = ()

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.shape != (self.grid.n, 3):
            raise ValueError(
                "points shape %r does not match grid length %d"
                % (self.points.shape, self.grid.n)
            )


def detect_arrival(series: TimeSeries, component: int, threshold: float = 0.0) -> ArrivalTime:
    """First grid index where |component| exceeds the threshold.

    With exact synthetic data and threshold 0 this returns
    ceil(t_arrival / dt) up to the component's own behaviour at the
    arrival instant (a component vanishing there pushes detection one
    sample later).
    """
    values = series.component(component)
    hits = np.flatnonzero(np.abs(values) > threshold)
    if hits.size == 0:
        raise NoSignalError(
            "component %d of receiver %d never exceeds threshold %g"
            % (component, series.receiver_index, threshold)
        )
    k = int(hits[0])
    return ArrivalTime(series.receiver_index, series.grid.t(k), k)


def _pick_component(strat, receiver_index, fx, H, scales, t=None):
    if scales is None:
        floors = (_TINY, _TINY, _TINY)
    else:
        floors = tuple(max(strat.fallback_threshold * float(s), _TINY) for s in scales)
    i = strat.primary_index(receiver_index, fx)
    if abs(H[i]) >= floors[i]:
        return i, False
    order = sorted(range(3), key=lambda j: (-abs(fx[j]), j))
    for j in order:
        if abs(H[j]) >= floors[j]:
            return j, True
    for j in order:
        if abs(H[j]) >= _TINY:
            return j, True
    raise DegenerateDataError(
        "all trace components below the denominator guard",
        t=t,
        receiver_index=receiver_index,
    )


def distance_ode_rhs(v, t, H_interp, f, nu, strat, c, receiver_index=0, scales=None):
    """Right-hand side c*f_i(t)/(4 pi v H_i(t + v/c)) - c.

    H_interp maps a reception time u to the (3,) trace vector; f is the
    source signal and nu the receiver normal, crossed here so the
    evaluation matches the synthesis identity exactly.
    """
    fx = np.cross(f.eval(t), vec3(nu))
    H = np.asarray(H_interp(t + v / c), dtype=float)
    i, _ = _pick_component(strat, receiver_index, fx, H, scales, t=t)
    return c * fx[i] / (4.0 * math.pi * v * H[i]) - c


def _grid_step_count(grid: TimeGrid, h: float):
    if not (h > 0):
        raise ValueError("step h must be positive")
    if abs(grid.t_start) > 1e-12 * max(abs(grid.t_end), 1.0):
        raise ValueError("reconstruction grid must start at t = 0")
    m = int(round(grid.dt / h))
    if m < 1 or abs(grid.dt - m * h) > 1e-9 * h:
        raise ValueError("grid spacing %g is not a multiple of h=%g" % (grid.dt, h))
    return m


def _rk4_closure(v0, h, n_steps, record_every, trace_at, fx_at, strat,
                 receiver_index, scales, c):
    out = np.full(n_steps // record_every + 1, np.nan)
    out[0] = v0
    stats = {"count": 0, "first": math.nan, "last": math.nan,
             "per_component": np.zeros(3, dtype=np.int64)}

    def rhs(t, vv):
        if not math.isfinite(vv) or vv <= 0.0:
            raise BlowUpError(
                "distance left (0, inf) during a stage evaluation",
                t=t, receiver_index=receiver_index,
            )
        fx = fx_at(t)
        H = np.asarray(trace_at(t + vv / c), dtype=float)
        i, fell_back = _pick_component(strat, receiver_index, fx, H, scales, t=t)
        if fell_back:
            if stats["count"] == 0:
                stats["first"] = t
            stats["last"] = t
            stats["count"] += 1
            stats["per_component"][i] += 1
        return c * fx[i] / (4.0 * math.pi * vv * H[i]) - c

    vv = float(v0)
    half = 0.5 * h
    sixth = h / 6.0
    for step in range(n_steps):
        t = step * h
        try:
            k1 = rhs(t, vv)
            k2 = rhs(t + half, vv + half * k1)
            k3 = rhs(t + half, vv + half * k2)
            k4 = rhs(t + h, vv + h * k3)
        except (DegenerateDataError, BlowUpError) as exc:
            exc.partial = out[: step // record_every + 1].copy()
            raise
        vv = vv + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not math.isfinite(vv) or vv <= 0.0:
            raise BlowUpError(
                "distance became non-positive at t=%.9g" % ((step + 1) * h),
                t=(step + 1) * h,
                receiver_index=receiver_index,
                partial=out[: step // record_every + 1].copy(),
            )
        if (step + 1) % record_every == 0:
            out[(step + 1) // record_every] = vv
    return out, stats


def solve_distance_ode(series: TimeSeries, f: SourceSignal, receiver: Receiver,
                       arrival, grid: TimeGrid, strat: ComponentStrategy,
                       c: float, h: float, field_closure=None) -> DistanceFunction:
    """Integrate the distance ODE with classic RK4 at internal step h.

    The grid spacing must be a positive integer multiple of h and the
    grid must start at 0; v is recorded at every grid time. The trace is
    accessed by linear interpolation in reception time (one-sided at the
    arrival discontinuity), or through field_closure (a callable
    u -> (3,) trace vector) when given, which bypasses interpolation
    entirely.
    """
    idx = series.receiver_index
    m = _grid_step_count(grid, h)
    n_steps = (grid.n - 1) * m
    t_arr = arrival.t_arrival if isinstance(arrival, ArrivalTime) else float(arrival)
    v0 = c * t_arr
    if not (v0 > 0):
        raise ValueError("arrival time must be positive, got %g" % t_arr)
    scales = np.max(np.abs(series.samples), axis=0)
    fx_sig = cross_signal(f, receiver.normal)

    if field_closure is not None:
        v_arr, stats = _rk4_closure(
            v0, h, n_steps, m, field_closure, fx_sig.eval, strat, idx, scales, c
        )
        fb_count = stats["count"]
        fb_first, fb_last = stats["first"], stats["last"]
        fb_comp = stats["per_component"]
    else:
        poly, poly_off, amp, omega, phase, sin_off = fx_sig.component_arrays()
        fixed = strat.components[idx] - 1 if strat.mode == "fixed" else -1
        H = np.ascontiguousarray(series.samples, dtype=float)
        v_arr, status, fail_step, fb_count, fb_first, fb_last, fb_comp = (
            backend.rk4_distance(
                v0, h, n_steps, m, H, series.grid.t_start, series.grid.dt,
                poly, poly_off, amp, omega, phase, sin_off,
                scales, fixed, strat.fallback_threshold, c,
            )
        )
        if status != 0:
            t_fail = fail_step * h
            partial = v_arr[: fail_step // m + 1].copy()
            if status == 1:
                raise DegenerateDataError(
                    "all trace components below the denominator guard at "
                    "t=%.9g (receiver %d)" % (t_fail, idx),
                    t=t_fail, receiver_index=idx, partial=partial,
                )
            if status == 2:
                raise BlowUpError(
                    "distance left (0, inf) at t=%.9g (receiver %d)" % (t_fail, idx),
                    t=t_fail, receiver_index=idx, partial=partial,
                )
            raise HorizonError(
                "reception time beyond the measured horizon at t=%.9g "
                "(receiver %d)" % (t_fail, idx)
            )

    if fb_count:
        logger.info(
            "[fallback] receiver=%d count=%d first_t=%.9g last_t=%.9g "
            "per_component=%s", idx, fb_count, fb_first, fb_last, list(fb_comp),
        )
    max_rate = float(np.max(np.abs(np.diff(v_arr)))) / grid.dt if grid.n > 1 else 0.0
    if max_rate >= c:
        logger.warning(
            "[speed-bound] receiver=%d max_rate=%.6g exceeds c=%.6g", idx, max_rate, c
        )
        warnings.warn(
            "recovered distance at receiver %d changes at %.3g m/s, faster "
            "than c=%.3g; the reconstruction violates the forward model"
            % (idx, max_rate, c),
            SpeedBoundWarning,
            stacklevel=2,
        )
    diagnostics = {
        "t_arrival": t_arr,
        "v0": v0,
        "fallback_count": int(fb_count),
        "fallback_first_t": float(fb_first) if fb_count else None,
        "fallback_last_t": float(fb_last) if fb_count else None,
        "fallback_per_component": [int(x) for x in fb_comp],
        "max_rate": max_rate,
        "speed_bound_ok": bool(max_rate < c),
    }
    return DistanceFunction(grid, v_arr, idx, diagnostics)


def trilaterate(receivers, v):
    """Source position(s) from four receiver distances.

    With receiver positions x_1..x_4 (non-coplanar differences), squared
    distances v_j^2 and the difference matrix X0 of consecutive receiver
    positions, the position solves

        a = 1/2 * X0^{-1} (X1 - [v_1^2-v_2^2, v_2^2-v_3^2, v_3^2-v_4^2]^T),

    X1 holding the consecutive differences of |x_j|^2. v may be shape (4,)
    for one time or (4, n) for a whole grid; the result is (3,) or (n, 3).
    """
    if len(receivers) != 4:
        raise ConfigurationError("exactly 4 receivers are required")
    pos = np.array(
        [r.position if isinstance(r, Receiver) else vec3(r) for r in receivers]
    )
    X0 = pos[:3] - pos[1:]
    sq = np.sum(pos * pos, axis=1)
    X1 = sq[:3] - sq[1:]
    det = float(np.linalg.det(X0))
    scale = float(np.linalg.norm(X0)) ** 3
    if abs(det) <= 1e-12 * scale:
        raise CoplanarReceiversError(
            "receiver difference matrix is singular (|det|=%.3g, scale=%.3g)"
            % (abs(det), scale)
        )
    v = np.asarray(v, dtype=float)
    if v.shape[0] != 4:
        raise ValueError("expected 4 distances, got shape %r" % (v.shape,))
    vsq = v * v
    diffs = vsq[:3] - vsq[1:]
    if v.ndim == 1:
        return 0.5 * np.linalg.solve(X0, X1 - diffs)
    return 0.5 * np.linalg.solve(X0, X1[:, None] - diffs).T


def reconstruct_orbit(series_set, s: Scenario, grid: TimeGrid,
                      strat: ComponentStrategy, h: float, arrivals=None,
                      field_closures=None) -> ReconstructedOrbit:
    """Full reconstruction: arrivals, four distance ODEs, trilateration.

    series_set must hold the four receiver traces in receiver order.
    arrivals (a sequence of ArrivalTime or seconds) overrides grid-based
    detection, e.g. with arrival times measured on a finer grid than the
    stored series.
    """
    series_set = tuple(series_set)
    if len(series_set) != 4:
        raise ConfigurationError("exactly 4 trace series are required")
    for j, ts in enumerate(series_set):
        if ts.receiver_index != j:
            raise ConfigurationError(
                "series %d carries receiver_index %d; pass traces in "
                "receiver order" % (j, ts.receiver_index)
            )
    if arrivals is None:
        arrivals = []
        for j, ts in enumerate(series_set):
            fx0 = np.cross(s.signal.eval(0.0), s.receivers[j].normal)
            comp = strat.detection_component(j, fx0)
            arrivals.append(detect_arrival(ts, comp))
    dfs = []
    for j, ts in enumerate(series_set):
        closure = field_closures[j] if field_closures is not None else None
        dfs.append(
            solve_distance_ode(
                ts, s.signal, s.receivers[j], arrivals[j], grid, strat,
                s.c, h, field_closure=closure,
            )
        )
    V = np.stack([df.v for df in dfs])
    points = trilaterate(s.receivers, V)
    return ReconstructedOrbit(grid, points, tuple(dfs))
